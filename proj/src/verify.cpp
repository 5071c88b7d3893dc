#include "camp/verify.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace camp::verify {

using json = nlohmann::ordered_json;
using logic::StlFormula;
using logic::TsslFormula;

bool Report::all_true() const {
  if (!spatial_ok || !complete) return false;
  for (const auto& a : agents)
    if (!a.goal_reached || !a.separation_ok) return false;
  return true;
}

namespace {

// state of agent `id` at step t, holding the last logged state afterwards
Eigen::Vector4d state_at(const planner::RunLog& log, int id, int t) {
  const auto& steps = log.steps;
  const std::size_t idx =
      std::min(static_cast<std::size_t>(std::max(t, 0)), steps.size() - 1);
  for (const auto& a : steps[idx].agents)
    if (a.id == id) return a.x;
  throw std::invalid_argument("agent " + std::to_string(id) + " missing from log");
}

int find_violating_cell(const TsslFormula& f, const qts::Qts& q, int node,
                        qts::CellIndex& out) {
  using K = TsslFormula::Kind;
  const auto& v = q.nodes[static_cast<std::size_t>(node)];
  if (qts::eval_tssl(f, q, node)) return 0;
  switch (f.kind) {
    case K::ValCmp:
    case K::Not:
    case K::True:
      out = {v.m < 0 ? 0 : v.m, v.n < 0 ? 0 : v.n};
      return 1;
    case K::And:
    case K::Or: {
      for (const auto& c : f.children)
        if (!qts::eval_tssl(c, q, node)) return find_violating_cell(c, q, node, out);
      return 1;
    }
    case K::ForAllNext:
    case K::ExistsNext: {
      if (v.is_leaf()) return find_violating_cell(f.children.front(), q, node, out);
      for (int l = 0; l < 4; ++l) {
        if (!(f.labels & (1u << l))) continue;
        const int child = v.child[static_cast<std::size_t>(l)];
        if (!qts::eval_tssl(f.children.front(), q, child))
          return find_violating_cell(f.children.front(), q, child, out);
      }
      return 1;
    }
  }
  return 1;
}

}  // namespace

logic::Signal joint_signal(const planner::RunLog& log, int agent_id) {
  const auto& sc = log.scenario;
  logic::Signal s;
  std::vector<int> others;
  for (const auto& a : sc.agents)
    if (a.id != agent_id) others.push_back(a.id);
  std::sort(others.begin(), others.end());
  for (int t = 0; t <= sc.params.deadline; ++t) {
    std::vector<double> sample;
    const Eigen::Vector4d own = state_at(log, agent_id, t);
    for (int k = 0; k < 4; ++k) sample.push_back(own[k]);
    for (int id : others) {
      const Eigen::Vector4d x = state_at(log, id, t);
      sample.push_back(x[0]);
      sample.push_back(x[1]);
    }
    s.samples.push_back(std::move(sample));
  }
  return s;
}

qts::QtsTrace occupancy_trace(const planner::RunLog& log) {
  const auto& sc = log.scenario;
  qts::QtsTrace trace;
  for (int t = 0; t <= sc.params.deadline; ++t) {
    std::vector<Eigen::Vector2d> pos;
    for (const auto& a : sc.agents)
      pos.push_back(state_at(log, a.id, t).head<2>());
    trace.push_back(qts::build_qts(qts::occupancy_counts(pos, sc.grid)));
  }
  return trace;
}

Report verify_run(const planner::RunLog& log, const scenario::Scenario& sc) {
  // the log embeds the scenario it ran; the provided one must agree on agents
  if (log.scenario.agents.size() != sc.agents.size())
    throw std::invalid_argument("log/scenario mismatch: different agent counts");
  for (const auto& a : sc.agents)
    log.scenario.agent(a.id);  // throws on unknown id
  if (log.steps.empty()) throw std::invalid_argument("run log has no steps");
  for (const auto& s : log.steps)
    if (s.agents.size() != sc.agents.size())
      throw std::invalid_argument("truncated run log: step " + std::to_string(s.t) +
                                  " misses agents");

  Report rep;
  const int deadline = sc.params.deadline;

  // per-agent goal and separation verdicts from the realized joint signals
  for (const auto& a : sc.agents) {
    AgentVerdict v;
    v.agent = a.id;
    const logic::Signal s = joint_signal(log, a.id);
    const StlFormula goal = logic::build_goal_formula(a.goal, deadline);
    v.goal_reached = logic::eval_stl(goal, s, 0);
    const StlFormula sep = logic::build_separation_formula(
        sc.params.d1, sc.params.d2, sc.params.separation_mode,
        static_cast<int>(sc.agents.size()) - 1, deadline);
    v.separation_ok = logic::eval_stl(sep, s, 0);
    rep.agents.push_back(v);
  }

  // the global spatial-temporal property over the occupancy trace
  const qts::PatternSet patterns = qts::generate_patterns(sc.capacity);
  const qts::QtsTrace trace = occupancy_trace(log);
  const StlFormula phi = StlFormula::conj(
      {StlFormula::always(0, deadline,
                          StlFormula::spatial_atom(patterns.obstacle_free)),
       StlFormula::always(
           0, deadline,
           StlFormula::spatial_atom(TsslFormula::conj(
               {patterns.quadrant[0], patterns.quadrant[1], patterns.quadrant[2],
                patterns.quadrant[3]})))});
  rep.spatial_ok = qts::eval_spatel(phi, trace, 0);

  if (!rep.spatial_ok) {
    // locate the first failing step and a witness leaf
    const std::array<const TsslFormula*, 5> psis = {
        &patterns.obstacle_free, &patterns.quadrant[0], &patterns.quadrant[1],
        &patterns.quadrant[2], &patterns.quadrant[3]};
    for (int t = 0; t <= deadline && !rep.violation; ++t) {
      for (std::size_t i = 0; i < psis.size(); ++i) {
        if (qts::eval_tssl(*psis[i], trace[static_cast<std::size_t>(t)])) continue;
        qts::CellIndex cell;
        find_violating_cell(*psis[i], trace[static_cast<std::size_t>(t)], 0, cell);
        rep.violation = SpatialViolation{t, cell.m, cell.n,
                                         "psi" + std::to_string(i + 1)};
        break;
      }
    }
  }

  rep.complete = log.complete && log.end_step <= deadline;

  for (const auto& p : log.periods) {
    PeriodStats ps;
    ps.t = p.t;
    for (const auto& rec : p.plans) {
      ps.nodes += rec.plan.nodes;
      ps.iterations += rec.plan.iterations;
      ps.holds += rec.plan.fallback_hold ? 1 : 0;
    }
    rep.period_stats.push_back(ps);
  }

  // quality time series at occupied cells
  const qts::RadioParams radio = sc.generator ? sc.generator->radio : qts::RadioParams{};
  for (int t = 0; t <= deadline; ++t) {
    double base = 0.0, total = 0.0;
    std::vector<Eigen::Vector2d> pos;
    for (const auto& a : sc.agents) pos.push_back(state_at(log, a.id, t).head<2>());
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      const auto cell = qts::cell_of(pos[i], sc.grid);
      const double q = sc.capacity(cell.m, cell.n);
      base += q;
      double agent_total = q;
      for (std::size_t j = 0; j < sc.agents.size(); ++j) {
        if (i == j) continue;
        if ((pos[i] - pos[j]).norm() < sc.params.neighbor_radius) {
          const qts::ValueMatrix cj = qts::agent_comm_matrix(pos[j], sc.grid, radio);
          agent_total += cj(cell.m, cell.n);
        }
      }
      total += agent_total;
    }
    rep.base_station_quality.push_back(base);
    rep.total_quality.push_back(total);
  }
  return rep;
}

std::string report_to_json_text(const Report& r) {
  json j;
  j["all_true"] = r.all_true();
  j["complete"] = r.complete;
  json agents = json::array();
  for (const auto& a : r.agents)
    agents.push_back({{"agent", a.agent},
                      {"goal_reached", a.goal_reached},
                      {"separation_ok", a.separation_ok}});
  j["agents"] = std::move(agents);
  j["spatial_ok"] = r.spatial_ok;
  if (r.violation) {
    j["first_violation"] = {{"step", r.violation->step},
                            {"cell", {r.violation->m, r.violation->n}},
                            {"pattern", r.violation->pattern}};
  } else {
    j["first_violation"] = nullptr;
  }
  json stats = json::array();
  for (const auto& p : r.period_stats)
    stats.push_back({{"t", p.t},
                     {"nodes", p.nodes},
                     {"iterations", p.iterations},
                     {"holds", p.holds}});
  j["period_stats"] = std::move(stats);
  j["base_station_quality"] = r.base_station_quality;
  j["total_quality"] = r.total_quality;
  return j.dump(1) + "\n";
}

void save_report(const Report& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << report_to_json_text(r);
}

}  // namespace camp::verify
