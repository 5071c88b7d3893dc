#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "camp/encoder.hpp"
#include "camp/logic.hpp"
#include "camp/qts.hpp"

// Experiment configuration: workspace, capacity map, agents, dynamics and the
// planner/encoder parameter block, with JSON (de)serialization and validation.
namespace camp::scenario {

struct AgentSpec {
  int id = 0;
  Eigen::Vector4d x0 = Eigen::Vector4d::Zero();
  std::vector<logic::HalfPlane> goal;

  Eigen::Vector2d goal_center() const;
  bool inside_goal(const Eigen::Vector2d& p) const;
};

struct Parameters {
  int horizon = 5;           // H
  int polygon_sides = 8;     // L
  double dt = 1.0;
  int deadline = 50;         // T_f
  double lambda = 0.005;
  double alpha = 0.5;
  double d1 = 1.0, d2 = 1.0;
  Eigen::Vector4d q_weight = Eigen::Vector4d::Zero();
  Eigen::Vector2d r_weight = Eigen::Vector2d::Ones();
  logic::SeparationMode separation_mode = logic::SeparationMode::Disjunctive;
  double neighbor_radius = 40.0;
  std::uint64_t seed = 1;
  long node_cap = 1'000'000;
  bool stale_lower_priority_plans = true;  // false: ignore unplanned lower priorities
};

// Capacity source: either an explicit matrix or generator inputs.
struct CapacityGenerator {
  std::vector<Eigen::Vector2d> stations;
  qts::RadioParams radio;
};

struct Scenario {
  std::string name;
  std::string comment;
  qts::Grid grid;
  qts::CapacityMatrix capacity;                // resolved matrix (row 0 = north)
  std::optional<CapacityGenerator> generator;  // set when capacity was generated
  std::vector<qts::CellIndex> obstacles;
  std::vector<Eigen::Vector2d> stations;       // for plots; may be empty
  encoder::AgentModel dynamics;
  std::vector<AgentSpec> agents;
  Parameters params;

  const AgentSpec& agent(int id) const;
};

// Parses, resolves the capacity source, and validates (throws listing every
// violated invariant with its field path).
Scenario load_scenario(const std::filesystem::path& path);
Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& s);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

// All validation failures, empty when the scenario is well-formed.
std::vector<std::string> validate(const Scenario& s);

}  // namespace camp::scenario
