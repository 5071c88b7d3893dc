#include "camp/planner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace camp::planner {

using json = nlohmann::ordered_json;

Eigen::Vector2d Plan::position_at(int t) const {
  if (states.empty()) throw std::logic_error("empty plan");
  const int idx = std::clamp(t - start, 0, static_cast<int>(states.size()) - 1);
  return states[static_cast<std::size_t>(idx)].head<2>();
}

std::uint64_t WorldState::next_u64() {
  // splitmix64: fully specified so logs reproduce across toolchains
  rng_state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = rng_state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t WorldState::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("zero bound");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

std::vector<int> assign_priorities(WorldState& world) {
  std::vector<int> active;
  for (const auto& a : world.agents)
    if (a.status == AgentStatus::Active) active.push_back(a.id);
  if (active.empty()) throw std::logic_error("no active agents to prioritize");
  std::sort(active.begin(), active.end());
  // Fisher-Yates with rejection-sampled draws: exactly uniform
  for (std::size_t i = active.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(world.next_below(static_cast<std::uint64_t>(i)));
    std::swap(active[i - 1], active[j]);
  }
  return active;
}

std::vector<int> neighbor_set(const WorldState& world, int agent_id, double radius) {
  if (radius <= 0) throw std::invalid_argument("neighbor radius must be positive");
  const AgentRuntime* self = nullptr;
  for (const auto& a : world.agents)
    if (a.id == agent_id) self = &a;
  if (!self) throw std::out_of_range("unknown agent id");
  std::vector<int> out;
  for (const auto& a : world.agents) {
    if (a.id == agent_id) continue;
    if ((a.state.head<2>() - self->state.head<2>()).norm() < radius)
      out.push_back(a.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

const AgentRuntime& agent_ref(const WorldState& world, int id) {
  for (const auto& a : world.agents)
    if (a.id == id) return a;
  throw std::out_of_range("unknown agent id");
}

std::vector<Eigen::Vector4d> roll_states(const encoder::AgentModel& am,
                                         const Eigen::Vector4d& x0,
                                         const std::vector<Eigen::Vector2d>& inputs) {
  std::vector<Eigen::Vector4d> states{x0};
  for (const auto& u : inputs) states.push_back(am.A * states.back() + am.B * u);
  return states;
}

Plan decode_plan(const scenario::Scenario& sc, int agent_id, int t0,
                 const encoder::AgentProblem& problem, const milp::Solution& sol) {
  Plan plan;
  plan.agent = agent_id;
  plan.start = t0;
  plan.status = sol.status;
  plan.objective = sol.objective;
  plan.nodes = sol.stats.nodes;
  plan.iterations = sol.stats.simplex_iterations;
  plan.solve_seconds = sol.stats.wall_seconds;
  plan.goal_hard = problem.goal_hard;
  for (const auto& uv : problem.ctx.u)
    plan.inputs.push_back({sol.values[static_cast<std::size_t>(uv[0])],
                           sol.values[static_cast<std::size_t>(uv[1])]});
  // states re-rolled through the exact dynamics so the recursion residual is 0
  Eigen::Vector4d x0;
  for (int j = 0; j < 4; ++j)
    x0[j] = sol.values[static_cast<std::size_t>(problem.ctx.x[0][static_cast<std::size_t>(j)])];
  plan.states = roll_states(sc.dynamics, x0, plan.inputs);
  return plan;
}

}  // namespace

Plan plan_agent(const WorldState& world, const scenario::Scenario& sc, int agent_id,
                const std::vector<int>& neighbors, const qts::PatternSet& patterns,
                const std::string& dump_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  const AgentRuntime& self = agent_ref(world, agent_id);
  const scenario::AgentSpec& spec = sc.agent(agent_id);
  const int t0 = world.t;
  const int window =
      std::min(sc.params.horizon, sc.params.deadline - t0 + 1);

  encoder::AgentProblemSpec ps;
  ps.dynamics = sc.dynamics;
  ps.x0 = self.state;
  ps.t0 = t0;
  ps.horizon = sc.params.horizon;
  ps.deadline = sc.params.deadline;
  ps.grid = sc.grid;
  ps.capacity = sc.capacity;
  ps.patterns = patterns;
  ps.q_weight = sc.params.q_weight;
  ps.r_weight = sc.params.r_weight;
  ps.lambda = sc.params.lambda;
  ps.alpha = sc.params.alpha;
  ps.goal = spec.goal;
  ps.goal_center = spec.goal_center();
  ps.d1 = sc.params.d1;
  ps.d2 = sc.params.d2;
  ps.separation_mode = sc.params.separation_mode;
  ps.opts.polygon_sides = sc.params.polygon_sides;

  const qts::RadioParams radio =
      sc.generator ? sc.generator->radio : qts::RadioParams{};

  for (int j : neighbors) {
    const AgentRuntime& other = agent_ref(world, j);
    std::vector<Eigen::Vector2d> traj;
    const bool fresh = other.plan && other.plan->start == t0;
    if (!fresh && other.status == AgentStatus::Active &&
        !sc.params.stale_lower_priority_plans)
      continue;  // sequential-responsibility mode: unplanned lower priorities wait
    for (int k = 0; k < window; ++k) {
      if (other.status == AgentStatus::Arrived && !fresh) {
        traj.push_back(other.state.head<2>());
      } else if (other.plan) {
        traj.push_back(other.plan->position_at(t0 + k));
      } else {
        traj.push_back(other.state.head<2>());  // never planned: hold position
      }
    }
    ps.neighbor_traj.push_back(std::move(traj));
    // inter-agent quality frozen at the neighbor's period-start position
    ps.neighbor_quality.push_back(
        qts::agent_comm_matrix(other.state.head<2>(), sc.grid, radio));
  }

  milp::SolveOptions sopts;
  sopts.node_limit = sc.params.node_cap;

  encoder::AgentProblem problem = encoder::assemble_agent_problem(ps, true);
  if (!dump_dir.empty()) {
    std::ofstream dump(dump_dir + "/agent" + std::to_string(agent_id) + "_t" +
                       std::to_string(t0) + ".lp");
    milp::write_lp_text(problem.ctx.model, dump);
  }
  milp::Solution sol = milp::solve_milp(problem.ctx.model, sopts);
  long nodes = sol.stats.nodes;
  long iterations = sol.stats.simplex_iterations;
  bool goal_dropped = false;

  if (sol.status != milp::Status::Optimal && problem.goal_hard) {
    // keep separation and patterns, drop the hard goal window
    problem = encoder::assemble_agent_problem(ps, false);
    sol = milp::solve_milp(problem.ctx.model, sopts);
    nodes += sol.stats.nodes;
    iterations += sol.stats.simplex_iterations;
    goal_dropped = true;
  }

  Plan plan;
  if (sol.status == milp::Status::Optimal) {
    plan = decode_plan(sc, agent_id, t0, problem, sol);
  } else {
    // zero-input hold: keeps the loop moving; the monitor owns the verdict
    plan.agent = agent_id;
    plan.start = t0;
    plan.status = sol.status;
    plan.objective = 0.0;
    plan.inputs.assign(static_cast<std::size_t>(window) - 1, Eigen::Vector2d::Zero());
    plan.states = roll_states(sc.dynamics, self.state, plan.inputs);
    plan.fallback_hold = true;
  }
  plan.fallback_goal_dropped = goal_dropped;
  plan.nodes = nodes;
  plan.iterations = iterations;
  plan.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return plan;
}

void step_world(WorldState& world, const scenario::Scenario& sc) {
  for (auto& a : world.agents) {
    if (a.status != AgentStatus::Active) continue;
    if (!a.plan || a.plan->start != world.t || a.plan->inputs.empty())
      throw std::logic_error("active agent " + std::to_string(a.id) +
                             " has no current plan to execute");
    a.state = sc.dynamics.A * a.state + sc.dynamics.B * a.plan->inputs.front();
  }
  world.t += 1;
  for (auto& a : world.agents) {
    if (a.status != AgentStatus::Active) continue;
    if (sc.agent(a.id).inside_goal(a.state.head<2>())) {
      a.status = AgentStatus::Arrived;
      a.arrived_at = world.t;
    }
  }
}

namespace {

StepRecord snapshot(const WorldState& world, const scenario::Scenario& sc) {
  StepRecord rec;
  rec.t = world.t;
  for (const auto& a : world.agents) {
    StepAgentRecord r;
    r.id = a.id;
    r.x = a.state;
    const auto cell = qts::cell_of(a.state.head<2>(), sc.grid);
    r.cell_m = cell.m;
    r.cell_n = cell.n;
    r.status = a.status;
    rec.agents.push_back(r);
  }
  return rec;
}

qts::Occupancy occupancy_of(const WorldState& world, const scenario::Scenario& sc) {
  std::vector<Eigen::Vector2d> pos;
  for (const auto& a : world.agents) pos.push_back(a.state.head<2>());
  return qts::occupancy_counts(pos, sc.grid);
}

}  // namespace

RunLog run(const scenario::Scenario& sc, const RunOptions& options) {
  RunLog log;
  log.scenario = sc;

  WorldState world;
  world.rng_state = sc.params.seed;
  for (const auto& a : sc.agents) {
    AgentRuntime rt;
    rt.id = a.id;
    rt.state = a.x0;
    // an agent starting inside its goal region is already done
    if (a.inside_goal(Eigen::Vector2d(a.x0[0], a.x0[1]))) {
      rt.status = AgentStatus::Arrived;
      rt.arrived_at = 0;
    }
    world.agents.push_back(rt);
  }
  if (world.agents.empty()) {
    log.complete = true;
    log.end_step = 0;
    return log;
  }

  const qts::PatternSet patterns = qts::generate_patterns(sc.capacity);
  log.steps.push_back(snapshot(world, sc));
  log.occupancy.push_back(occupancy_of(world, sc));

  auto any_active = [&] {
    return std::any_of(world.agents.begin(), world.agents.end(), [](const auto& a) {
      return a.status == AgentStatus::Active;
    });
  };

  while (any_active() && world.t < sc.params.deadline) {
    PeriodRecord period;
    period.t = world.t;
    period.priority_order = assign_priorities(world);

    // the period's neighbor graph over all agents (arrived ones still block)
    for (std::size_t i = 0; i < world.agents.size(); ++i)
      for (std::size_t k = i + 1; k < world.agents.size(); ++k) {
        const auto& a = world.agents[i];
        const auto& b = world.agents[k];
        if ((a.state.head<2>() - b.state.head<2>()).norm() <
            sc.params.neighbor_radius)
          period.neighbor_edges.emplace_back(std::min(a.id, b.id),
                                             std::max(a.id, b.id));
      }
    std::sort(period.neighbor_edges.begin(), period.neighbor_edges.end());

    std::vector<std::vector<int>> neighbor_lists(period.priority_order.size());
    for (std::size_t r = 0; r < period.priority_order.size(); ++r)
      neighbor_lists[r] =
          neighbor_set(world, period.priority_order[r], sc.params.neighbor_radius);

    if (options.threads <= 1) {
      for (std::size_t r = 0; r < period.priority_order.size(); ++r) {
        const int id = period.priority_order[r];
        Plan plan = plan_agent(world, sc, id, neighbor_lists[r], patterns,
                               options.dump_dir);
        for (auto& a : world.agents)
          if (a.id == id) a.plan = plan;  // broadcast
        PlanRecord rec;
        rec.agent = id;
        rec.order = static_cast<int>(r);
        rec.neighbors = neighbor_lists[r];
        rec.plan = std::move(plan);
        period.plans.push_back(std::move(rec));
      }
    } else {
      // wave scheduling: an agent may solve once every higher-priority
      // neighbor of its own period has broadcast; equivalent to the
      // sequential priority order by construction
      std::vector<bool> planned(period.priority_order.size(), false);
      std::vector<Plan> results(period.priority_order.size());
      auto rank_of = [&](int id) {
        for (std::size_t r = 0; r < period.priority_order.size(); ++r)
          if (period.priority_order[r] == id) return static_cast<int>(r);
        return -1;  // arrived agents never plan
      };
      std::size_t done = 0;
      while (done < period.priority_order.size()) {
        std::vector<std::size_t> wave;
        for (std::size_t r = 0; r < period.priority_order.size(); ++r) {
          if (planned[r]) continue;
          bool ready = true;
          for (int nb : neighbor_lists[r]) {
            const int nbr = rank_of(nb);
            if (nbr >= 0 && nbr < static_cast<int>(r) &&
                !planned[static_cast<std::size_t>(nbr)])
              ready = false;
          }
          if (ready) wave.push_back(r);
        }
        std::vector<std::future<Plan>> futs;
        for (std::size_t idx = 1; idx < wave.size(); ++idx) {
          const std::size_t r = wave[idx];
          futs.push_back(std::async(std::launch::async, [&, r] {
            return plan_agent(world, sc, period.priority_order[r], neighbor_lists[r],
                              patterns, options.dump_dir);
          }));
        }
        results[wave[0]] = plan_agent(world, sc, period.priority_order[wave[0]],
                                      neighbor_lists[wave[0]], patterns,
                                      options.dump_dir);
        planned[wave[0]] = true;
        ++done;
        for (std::size_t idx = 1; idx < wave.size(); ++idx) {
          results[wave[idx]] = futs[idx - 1].get();
          planned[wave[idx]] = true;
          ++done;
        }
        // broadcast the whole wave before the next one
        for (std::size_t r : wave)
          for (auto& a : world.agents)
            if (a.id == period.priority_order[r]) a.plan = results[r];
      }
      for (std::size_t r = 0; r < period.priority_order.size(); ++r) {
        PlanRecord rec;
        rec.agent = period.priority_order[r];
        rec.order = static_cast<int>(r);
        rec.neighbors = neighbor_lists[r];
        rec.plan = std::move(results[r]);
        period.plans.push_back(std::move(rec));
      }
    }

    if (options.verbose) {
      double total = 0;
      for (const auto& p : period.plans) total += p.plan.solve_seconds;
      std::cerr << "period t=" << period.t << " planned "
                << period.plans.size() << " agents in " << total << "s\n";
    }

    // the inputs applied at step t are the plans' first inputs
    for (auto& rec : log.steps.back().agents) {
      for (const auto& p : period.plans)
        if (p.agent == rec.id && !p.plan.inputs.empty()) rec.u = p.plan.inputs.front();
    }

    log.periods.push_back(std::move(period));
    step_world(world, sc);
    log.steps.push_back(snapshot(world, sc));
    log.occupancy.push_back(occupancy_of(world, sc));
  }

  log.complete = !any_active();
  log.end_step = world.t;
  return log;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Eigen::Vector4d& v) { return json{v[0], v[1], v[2], v[3]}; }
json vec_to_json(const Eigen::Vector2d& v) { return json{v[0], v[1]}; }

json plan_to_json(const Plan& p) {
  json j;
  j["agent"] = p.agent;
  j["start"] = p.start;
  j["status"] = milp::status_name(p.status);
  j["objective"] = p.objective;
  j["nodes"] = p.nodes;
  j["iterations"] = p.iterations;
  j["goal_hard"] = p.goal_hard;
  j["goal_dropped"] = p.fallback_goal_dropped;
  j["hold"] = p.fallback_hold;
  json states = json::array();
  for (const auto& x : p.states) states.push_back(vec_to_json(x));
  j["states"] = std::move(states);
  json inputs = json::array();
  for (const auto& u : p.inputs) inputs.push_back(vec_to_json(u));
  j["inputs"] = std::move(inputs);
  return j;
}

milp::Status status_from_name(const std::string& name) {
  if (name == "optimal") return milp::Status::Optimal;
  if (name == "infeasible") return milp::Status::Infeasible;
  if (name == "unbounded") return milp::Status::Unbounded;
  if (name == "node-limit") return milp::Status::NodeLimit;
  throw std::invalid_argument("unknown solver status '" + name + "'");
}

Plan plan_from_json(const json& j) {
  Plan p;
  p.agent = j.at("agent").get<int>();
  p.start = j.at("start").get<int>();
  p.status = status_from_name(j.at("status").get<std::string>());
  p.objective = j.at("objective").get<double>();
  p.nodes = j.at("nodes").get<long>();
  p.iterations = j.at("iterations").get<long>();
  p.goal_hard = j.at("goal_hard").get<bool>();
  p.fallback_goal_dropped = j.at("goal_dropped").get<bool>();
  p.fallback_hold = j.at("hold").get<bool>();
  for (const auto& x : j.at("states")) {
    Eigen::Vector4d v;
    for (int k = 0; k < 4; ++k) v[k] = x.at(static_cast<std::size_t>(k)).get<double>();
    p.states.push_back(v);
  }
  for (const auto& u : j.at("inputs")) {
    Eigen::Vector2d v{u.at(0).get<double>(), u.at(1).get<double>()};
    p.inputs.push_back(v);
  }
  return p;
}

}  // namespace

std::string runlog_to_json_text(const RunLog& log) {
  json j;
  j["format"] = "camp-runlog-v1";
  j["scenario"] = json::parse(scenario::scenario_to_json_text(log.scenario));
  j["complete"] = log.complete;
  j["end_step"] = log.end_step;

  json periods = json::array();
  for (const auto& p : log.periods) {
    json jp;
    jp["t"] = p.t;
    jp["priority_order"] = p.priority_order;
    json edges = json::array();
    for (const auto& e : p.neighbor_edges) edges.push_back({e.first, e.second});
    jp["neighbor_edges"] = std::move(edges);
    json plans = json::array();
    for (const auto& rec : p.plans) {
      json jr = plan_to_json(rec.plan);
      jr["order"] = rec.order;
      jr["neighbors"] = rec.neighbors;
      plans.push_back(std::move(jr));
    }
    jp["plans"] = std::move(plans);
    periods.push_back(std::move(jp));
  }
  j["periods"] = std::move(periods);

  json steps = json::array();
  for (const auto& s : log.steps) {
    json js;
    js["t"] = s.t;
    json agents = json::array();
    for (const auto& a : s.agents) {
      json ja;
      ja["id"] = a.id;
      ja["x"] = vec_to_json(a.x);
      ja["u"] = vec_to_json(a.u);
      ja["cell"] = {a.cell_m, a.cell_n};
      ja["status"] = a.status == AgentStatus::Active ? "active" : "arrived";
      agents.push_back(std::move(ja));
    }
    js["agents"] = std::move(agents);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);

  json occ = json::array();
  for (const auto& o : log.occupancy) {
    json rows = json::array();
    for (int m = 0; m < o.rows(); ++m)
      for (int n = 0; n < o.cols(); ++n) rows.push_back(o(m, n));
    occ.push_back(std::move(rows));
  }
  j["occupancy"] = std::move(occ);
  return j.dump(1) + "\n";
}

RunLog runlog_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run log parse error: ") + e.what());
  }
  if (j.value("format", "") != std::string("camp-runlog-v1"))
    throw std::invalid_argument("run log: unknown or missing format tag");

  RunLog log;
  log.scenario = scenario::scenario_from_json_text(j.at("scenario").dump());
  log.complete = j.at("complete").get<bool>();
  log.end_step = j.at("end_step").get<int>();

  for (const auto& jp : j.at("periods")) {
    PeriodRecord p;
    p.t = jp.at("t").get<int>();
    p.priority_order = jp.at("priority_order").get<std::vector<int>>();
    for (const auto& e : jp.at("neighbor_edges"))
      p.neighbor_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& jr : jp.at("plans")) {
      PlanRecord rec;
      rec.agent = jr.at("agent").get<int>();
      rec.order = jr.at("order").get<int>();
      rec.neighbors = jr.at("neighbors").get<std::vector<int>>();
      rec.plan = plan_from_json(jr);
      p.plans.push_back(std::move(rec));
    }
    log.periods.push_back(std::move(p));
  }

  for (const auto& js : j.at("steps")) {
    StepRecord s;
    s.t = js.at("t").get<int>();
    for (const auto& ja : js.at("agents")) {
      StepAgentRecord a;
      a.id = ja.at("id").get<int>();
      for (int k = 0; k < 4; ++k)
        a.x[k] = ja.at("x").at(static_cast<std::size_t>(k)).get<double>();
      a.u = {ja.at("u").at(0).get<double>(), ja.at("u").at(1).get<double>()};
      a.cell_m = ja.at("cell").at(0).get<int>();
      a.cell_n = ja.at("cell").at(1).get<int>();
      const std::string st = ja.at("status").get<std::string>();
      a.status = st == "arrived" ? AgentStatus::Arrived : AgentStatus::Active;
      s.agents.push_back(a);
    }
    log.steps.push_back(std::move(s));
  }

  const int side = log.scenario.grid.cells_per_side();
  for (const auto& jo : j.at("occupancy")) {
    if (static_cast<int>(jo.size()) != side * side)
      throw std::invalid_argument("run log: occupancy entry of wrong size");
    qts::Occupancy o(side, side);
    int idx = 0;
    for (int m = 0; m < side; ++m)
      for (int n = 0; n < side; ++n)
        o(m, n) = jo.at(static_cast<std::size_t>(idx++)).get<int>();
    log.occupancy.push_back(std::move(o));
  }
  return log;
}

void save_runlog(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run log: " + path.string());
  out << runlog_to_json_text(log);
}

RunLog load_runlog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return runlog_from_json_text(buf.str());
}

std::string runlog_to_csv(const RunLog& log) {
  std::ostringstream os;
  os << "step,agent,p1,p2,v1,v2,u1,u2,cell_m,cell_n,status\n";
  auto num = [](double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (const auto& s : log.steps)
    for (const auto& a : s.agents)
      os << s.t << ',' << a.id << ',' << num(a.x[0]) << ',' << num(a.x[1]) << ','
         << num(a.x[2]) << ',' << num(a.x[3]) << ',' << num(a.u[0]) << ','
         << num(a.u[1]) << ',' << a.cell_m << ',' << a.cell_n << ','
         << (a.status == AgentStatus::Active ? "active" : "arrived") << '\n';
  return os.str();
}

}  // namespace camp::planner
