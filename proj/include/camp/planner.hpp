#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "camp/milp.hpp"
#include "camp/scenario.hpp"

// Distributed receding-horizon loop: per-period random priorities, neighbor
// discovery, priority-ordered per-agent solves, plan broadcast, synchronized
// first-step execution, and goal-based retirement.
namespace camp::planner {

enum class AgentStatus { Active, Arrived };

struct Plan {
  int agent = 0;
  int start = 0;  // global step of states.front()
  std::vector<Eigen::Vector4d> states;
  std::vector<Eigen::Vector2d> inputs;  // one fewer than states
  double objective = 0.0;
  milp::Status status = milp::Status::Infeasible;
  long nodes = 0;
  long iterations = 0;
  double solve_seconds = 0.0;  // in-memory only; never serialized
  bool goal_hard = false;
  bool fallback_goal_dropped = false;
  bool fallback_hold = false;

  // position at global step t, holding the last state past the plan end
  Eigen::Vector2d position_at(int t) const;
};

struct AgentRuntime {
  int id = 0;
  Eigen::Vector4d state = Eigen::Vector4d::Zero();
  AgentStatus status = AgentStatus::Active;
  std::optional<Plan> plan;  // most recent broadcast plan
  int arrived_at = -1;
};

// Deterministic seeded world. The permutation draw is implemented with an
// explicit rejection-sampled Fisher-Yates so logs are reproducible.
struct WorldState {
  int t = 0;
  std::vector<AgentRuntime> agents;
  std::uint64_t rng_state = 0;

  std::uint64_t next_u64();
  std::uint64_t next_below(std::uint64_t bound);  // uniform in [0, bound)
};

struct PlanRecord {
  int agent = 0;
  int order = 0;  // assembly position within the period
  std::vector<int> neighbors;
  Plan plan;
};

struct PeriodRecord {
  int t = 0;
  std::vector<int> priority_order;               // agent ids, highest first
  std::vector<std::pair<int, int>> neighbor_edges;  // i < j, within radius
  std::vector<PlanRecord> plans;                 // in assembly order
};

struct StepAgentRecord {
  int id = 0;
  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  Eigen::Vector2d u = Eigen::Vector2d::Zero();  // input applied at this step
  int cell_m = 0, cell_n = 0;
  AgentStatus status = AgentStatus::Active;
};

struct StepRecord {
  int t = 0;
  std::vector<StepAgentRecord> agents;
};

struct RunLog {
  scenario::Scenario scenario;
  bool complete = false;
  int end_step = 0;
  std::vector<PeriodRecord> periods;
  std::vector<StepRecord> steps;          // 0..end_step, every agent each step
  std::vector<qts::Occupancy> occupancy;  // per step, all agents counted
};

struct RunOptions {
  int threads = 1;          // >1 solves independent agents concurrently
  bool verbose = false;     // progress lines on stderr
  std::string dump_dir;     // when set, writes per-agent-period model dumps
};

// Uniform random permutation of the active agents (highest priority first).
std::vector<int> assign_priorities(WorldState& world);

// Agents strictly closer than `radius`, arrived ones included.
std::vector<int> neighbor_set(const WorldState& world, int agent_id, double radius);

// Assembles and solves one agent's problem against the given neighbor plans;
// applies the infeasibility fallbacks (drop hard goal, then hold).
Plan plan_agent(const WorldState& world, const scenario::Scenario& sc, int agent_id,
                const std::vector<int>& neighbors, const qts::PatternSet& patterns,
                const std::string& dump_dir = {});

// Advances every active agent by its plan's first input; marks arrivals.
void step_world(WorldState& world, const scenario::Scenario& sc);

RunLog run(const scenario::Scenario& sc, const RunOptions& options = {});

// JSON (de)serialization; deterministic bytes for a given log.
std::string runlog_to_json_text(const RunLog& log);
RunLog runlog_from_json_text(const std::string& text);
void save_runlog(const RunLog& log, const std::filesystem::path& path);
RunLog load_runlog(const std::filesystem::path& path);

// Flat per-step state table (step,agent,p1,p2,v1,v2,u1,u2,cell_m,cell_n,status).
std::string runlog_to_csv(const RunLog& log);

}  // namespace camp::planner
