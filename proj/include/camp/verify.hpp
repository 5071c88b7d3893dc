#pragma once

#include <optional>
#include <string>
#include <vector>

#include "camp/planner.hpp"

// Post-hoc verification: rebuilds signals and the quadtree trace from a run
// log and judges every specification with the logic/qts monitors only.
namespace camp::verify {

struct AgentVerdict {
  int agent = 0;
  bool goal_reached = false;   // eventually-inside-goal formula
  bool separation_ok = false;  // always-separated formula vs. all other agents
};

struct SpatialViolation {
  int step = 0;
  int m = 0, n = 0;
  std::string pattern;  // "psi1".."psi5"
};

struct PeriodStats {
  int t = 0;
  long nodes = 0;
  long iterations = 0;
  int holds = 0;  // fallback hold plans this period
};

struct Report {
  std::vector<AgentVerdict> agents;
  bool spatial_ok = false;
  std::optional<SpatialViolation> violation;
  bool complete = false;  // every agent arrived within the deadline
  std::vector<PeriodStats> period_stats;
  // per-step quality sums over agents at their occupied cells
  std::vector<double> base_station_quality;
  std::vector<double> total_quality;  // adds inter-agent patterns over neighbors

  bool all_true() const;
};

// Pure function of (log, scenario): same inputs give identical reports.
Report verify_run(const planner::RunLog& log, const scenario::Scenario& sc);

std::string report_to_json_text(const Report& r);
void save_report(const Report& r, const std::filesystem::path& path);

// Signals padded to the deadline by holding final states (arrived agents keep
// occupying their cells). Exposed for tests.
logic::Signal joint_signal(const planner::RunLog& log, int agent_id);
qts::QtsTrace occupancy_trace(const planner::RunLog& log);

}  // namespace camp::verify
