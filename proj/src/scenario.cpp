#include "camp/scenario.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace camp::scenario {

using json = nlohmann::ordered_json;

Eigen::Vector2d AgentSpec::goal_center() const {
  // centroid of the polytope vertices is overkill here; the goal boxes are
  // axis-aligned, so the Chebyshev-style midpoint of the active bounds works.
  // For general polytopes we average the half-plane boundary projections.
  double xlo = -1e18, xhi = 1e18, ylo = -1e18, yhi = 1e18;
  bool boxy = true;
  for (const auto& hp : goal) {
    if (hp.a[0] != 0.0 && hp.a[1] == 0.0) {
      if (hp.a[0] > 0)
        xhi = std::min(xhi, -hp.b / hp.a[0]);
      else
        xlo = std::max(xlo, -hp.b / hp.a[0]);
    } else if (hp.a[0] == 0.0 && hp.a[1] != 0.0) {
      if (hp.a[1] > 0)
        yhi = std::min(yhi, -hp.b / hp.a[1]);
      else
        ylo = std::max(ylo, -hp.b / hp.a[1]);
    } else {
      boxy = false;
    }
  }
  if (boxy && xlo > -1e17 && xhi < 1e17 && ylo > -1e17 && yhi < 1e17)
    return {0.5 * (xlo + xhi), 0.5 * (ylo + yhi)};
  // fallback: average of the feasibility-boundary foot points from the origin
  Eigen::Vector2d c{0, 0};
  for (const auto& hp : goal) {
    const Eigen::Vector2d a{hp.a[0], hp.a[1]};
    const double norm2 = a.squaredNorm();
    if (norm2 > 0) c += -hp.b / norm2 * a;
  }
  return c / static_cast<double>(goal.size());
}

bool AgentSpec::inside_goal(const Eigen::Vector2d& p) const {
  for (const auto& hp : goal)
    if (hp.a[0] * p.x() + hp.a[1] * p.y() + hp.b > 0.0) return false;
  return true;
}

const AgentSpec& Scenario::agent(int id) const {
  for (const auto& a : agents)
    if (a.id == id) return a;
  throw std::out_of_range("no agent with id " + std::to_string(id));
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(where + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw std::invalid_argument(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

Eigen::Vector2d vec2_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument(where + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw std::invalid_argument(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(where + ": bad value for '" + key + "'");
  }
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }

  Scenario s;
  s.name = j.value("name", "");
  s.comment = j.value("comment", "");

  const json& ws = j.contains("workspace") ? j.at("workspace") : json::object();
  s.grid.origin = ws.contains("origin")
                      ? vec2_from_json(ws.at("origin"), "workspace.origin")
                      : Eigen::Vector2d{0, 0};
  s.grid.side = field<double>(ws, "side", "workspace");
  s.grid.depth = field<int>(ws, "depth", "workspace");

  if (j.contains("obstacles"))
    for (const auto& ob : j.at("obstacles"))
      s.obstacles.push_back(
          {ob.at(0).get<int>(), ob.at(1).get<int>()});

  if (j.contains("stations"))
    for (const auto& st : j.at("stations"))
      s.stations.push_back(vec2_from_json(st, "stations[]"));

  const json& cap = j.contains("capacity") ? j.at("capacity") : json::object();
  if (cap.contains("matrix")) {
    s.capacity = matrix_from_json(cap.at("matrix"), "capacity.matrix").cast<int>();
  } else if (cap.contains("generate")) {
    const json& gen = cap.at("generate");
    CapacityGenerator g;
    for (const auto& st : gen.at("stations"))
      g.stations.push_back(vec2_from_json(st, "capacity.generate.stations[]"));
    if (gen.contains("q_max")) g.radio.q_max = gen.at("q_max").get<int>();
    if (gen.contains("d0")) g.radio.d0 = gen.at("d0").get<double>();
    if (gen.contains("d_cut")) g.radio.d_cut = gen.at("d_cut").get<double>();
    if (gen.contains("shadow_penalty"))
      g.radio.shadow_penalty = gen.at("shadow_penalty").get<int>();
    s.capacity = qts::base_station_matrix(g.stations, s.obstacles, s.grid, g.radio);
    s.generator = std::move(g);
    if (s.stations.empty()) s.stations = s.generator->stations;
  } else {
    throw std::invalid_argument("capacity: need either 'matrix' or 'generate'");
  }

  const json& dyn = j.contains("dynamics") ? j.at("dynamics") : json::object();
  s.dynamics.A = matrix_from_json(field<json>(dyn, "A_d", "dynamics"), "dynamics.A_d");
  s.dynamics.B = matrix_from_json(field<json>(dyn, "B_d", "dynamics"), "dynamics.B_d");
  s.dynamics.u_max = field<double>(dyn, "u_max", "dynamics");
  s.dynamics.v_max = field<double>(dyn, "v_max", "dynamics");

  if (!j.contains("agents") || !j.at("agents").is_array())
    throw std::invalid_argument("agents: expected an array");
  for (std::size_t i = 0; i < j.at("agents").size(); ++i) {
    const json& a = j.at("agents")[i];
    const std::string where = "agents[" + std::to_string(i) + "]";
    AgentSpec spec;
    spec.id = field<int>(a, "id", where);
    const json& x0 = a.contains("x0") ? a.at("x0") : json::array();
    if (x0.size() != 4) throw std::invalid_argument(where + ".x0: expected 4 entries");
    for (int k = 0; k < 4; ++k) spec.x0[k] = x0[static_cast<std::size_t>(k)].get<double>();
    if (!a.contains("goal") || !a.at("goal").is_array())
      throw std::invalid_argument(where + ".goal: expected half-plane array");
    for (const auto& hp : a.at("goal")) {
      logic::HalfPlane h;
      const Eigen::Vector2d av = vec2_from_json(hp.at("a"), where + ".goal[].a");
      h.a = {av.x(), av.y()};
      h.b = hp.at("b").get<double>();
      spec.goal.push_back(h);
    }
    s.agents.push_back(std::move(spec));
  }

  const json& p = j.contains("params") ? j.at("params") : json::object();
  s.params.horizon = p.value("H", s.params.horizon);
  s.params.polygon_sides = p.value("L", s.params.polygon_sides);
  s.params.dt = p.value("dt", s.params.dt);
  s.params.deadline = p.value("T_f", s.params.deadline);
  s.params.lambda = p.value("lambda", s.params.lambda);
  s.params.alpha = p.value("alpha", s.params.alpha);
  s.params.d1 = p.value("d1", s.params.d1);
  s.params.d2 = p.value("d2", s.params.d2);
  if (p.contains("q")) {
    const json& q = p.at("q");
    if (q.size() != 4) throw std::invalid_argument("params.q: expected 4 entries");
    for (int k = 0; k < 4; ++k) s.params.q_weight[k] = q[static_cast<std::size_t>(k)].get<double>();
  }
  if (p.contains("r")) {
    const json& r = p.at("r");
    if (r.size() != 2) throw std::invalid_argument("params.r: expected 2 entries");
    for (int k = 0; k < 2; ++k) s.params.r_weight[k] = r[static_cast<std::size_t>(k)].get<double>();
  }
  const std::string mode = p.value("separation_mode", std::string("disjunctive"));
  if (mode == "disjunctive")
    s.params.separation_mode = logic::SeparationMode::Disjunctive;
  else if (mode == "conjunctive")
    s.params.separation_mode = logic::SeparationMode::Conjunctive;
  else
    throw std::invalid_argument("params.separation_mode: unknown mode '" + mode + "'");
  s.params.neighbor_radius = p.value("neighbor_radius", s.params.neighbor_radius);
  s.params.seed = p.value("seed", s.params.seed);
  s.params.node_cap = p.value("node_cap", s.params.node_cap);
  s.params.stale_lower_priority_plans =
      p.value("stale_lower_priority_plans", s.params.stale_lower_priority_plans);

  const auto problems = validate(s);
  if (!problems.empty()) {
    std::ostringstream os;
    os << "scenario invalid (" << problems.size() << " problem(s)):";
    for (const auto& pr : problems) os << "\n  - " << pr;
    throw std::invalid_argument(os.str());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

std::string scenario_to_json_text(const Scenario& s) {
  json j;
  if (!s.name.empty()) j["name"] = s.name;
  if (!s.comment.empty()) j["comment"] = s.comment;
  j["workspace"] = {{"origin", {s.grid.origin.x(), s.grid.origin.y()}},
                    {"side", s.grid.side},
                    {"depth", s.grid.depth}};
  json obstacles = json::array();
  for (const auto& ob : s.obstacles) obstacles.push_back({ob.m, ob.n});
  j["obstacles"] = std::move(obstacles);
  if (!s.stations.empty()) {
    json st = json::array();
    for (const auto& p : s.stations) st.push_back({p.x(), p.y()});
    j["stations"] = std::move(st);
  }
  // generated capacities serialize as the resolved matrix plus the generator
  // inputs, so a round-trip is exact even if the generator changes
  j["capacity"] = {{"matrix", matrix_to_json(s.capacity.cast<double>())}};
  if (s.generator) {
    json gen;
    json st = json::array();
    for (const auto& p : s.generator->stations) st.push_back({p.x(), p.y()});
    gen["stations"] = std::move(st);
    gen["q_max"] = s.generator->radio.q_max;
    gen["d0"] = s.generator->radio.d0;
    gen["d_cut"] = s.generator->radio.d_cut;
    gen["shadow_penalty"] = s.generator->radio.shadow_penalty;
    j["capacity"]["generator_inputs"] = std::move(gen);
  }
  j["dynamics"] = {{"A_d", matrix_to_json(s.dynamics.A)},
                   {"B_d", matrix_to_json(s.dynamics.B)},
                   {"u_max", s.dynamics.u_max},
                   {"v_max", s.dynamics.v_max}};
  json agents = json::array();
  for (const auto& a : s.agents) {
    json ja;
    ja["id"] = a.id;
    ja["x0"] = {a.x0[0], a.x0[1], a.x0[2], a.x0[3]};
    json goal = json::array();
    for (const auto& hp : a.goal) goal.push_back({{"a", {hp.a[0], hp.a[1]}}, {"b", hp.b}});
    ja["goal"] = std::move(goal);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  j["params"] = {{"H", s.params.horizon},
                 {"L", s.params.polygon_sides},
                 {"dt", s.params.dt},
                 {"T_f", s.params.deadline},
                 {"lambda", s.params.lambda},
                 {"alpha", s.params.alpha},
                 {"d1", s.params.d1},
                 {"d2", s.params.d2},
                 {"q", {s.params.q_weight[0], s.params.q_weight[1], s.params.q_weight[2],
                        s.params.q_weight[3]}},
                 {"r", {s.params.r_weight[0], s.params.r_weight[1]}},
                 {"separation_mode",
                  s.params.separation_mode == logic::SeparationMode::Disjunctive
                      ? "disjunctive"
                      : "conjunctive"},
                 {"neighbor_radius", s.params.neighbor_radius},
                 {"seed", s.params.seed},
                 {"node_cap", s.params.node_cap},
                 {"stale_lower_priority_plans", s.params.stale_lower_priority_plans}};
  return j.dump(2) + "\n";
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path.string());
  out << scenario_to_json_text(s);
}

std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> problems;
  auto add = [&](const std::string& msg) { problems.push_back(msg); };

  if (s.grid.side <= 0) add("workspace.side: must be positive");
  if (s.grid.depth < 1) add("workspace.depth: must be at least 1");
  if (s.grid.depth > 6) add("workspace.depth: larger than 6 is not supported");
  const int cells = s.grid.depth >= 1 && s.grid.depth <= 6 ? s.grid.cells_per_side() : 0;

  if (cells > 0 && (s.capacity.rows() != cells || s.capacity.cols() != cells))
    add("capacity.matrix: expected " + std::to_string(cells) + "x" +
        std::to_string(cells) + ", got " + std::to_string(s.capacity.rows()) + "x" +
        std::to_string(s.capacity.cols()));
  else if (cells > 0) {
    if ((s.capacity.array() < 0).any()) add("capacity.matrix: negative entries");
    // obstacle list and zero entries must coincide
    std::set<std::pair<int, int>> obs;
    for (const auto& ob : s.obstacles) {
      if (ob.m < 0 || ob.m >= cells || ob.n < 0 || ob.n >= cells)
        add("obstacles: cell (" + std::to_string(ob.m) + "," + std::to_string(ob.n) +
            ") outside the grid");
      else
        obs.insert({ob.m, ob.n});
    }
    for (int m = 0; m < cells; ++m)
      for (int n = 0; n < cells; ++n) {
        const bool zero = s.capacity(m, n) == 0;
        const bool listed = obs.count({m, n}) > 0;
        if (zero && !listed)
          add("capacity.matrix: zero cell (" + std::to_string(m) + "," +
              std::to_string(n) + ") missing from obstacles");
        if (!zero && listed)
          add("obstacles: cell (" + std::to_string(m) + "," + std::to_string(n) +
              ") has nonzero capacity");
      }
  }

  if (!encoder::controllable(s.dynamics))
    add("dynamics: (A_d, B_d) is not controllable");
  if (s.dynamics.u_max <= 0) add("dynamics.u_max: must be positive");
  if (s.dynamics.v_max <= 0) add("dynamics.v_max: must be positive");

  if (s.params.horizon < 1) add("params.H: must be at least 1");
  if (s.params.polygon_sides < 3) add("params.L: must be at least 3");
  if (s.params.deadline < 1) add("params.T_f: must be at least 1");
  if (s.params.alpha < 0 || s.params.alpha > 1) add("params.alpha: must be in [0,1]");
  if (s.params.d1 <= 0 || s.params.d2 <= 0) add("params.d1/d2: must be positive");
  if (s.params.lambda < 0) add("params.lambda: must be nonnegative");
  if (s.params.neighbor_radius <= 0) add("params.neighbor_radius: must be positive");
  if ((s.params.q_weight.array() < 0).any() || (s.params.r_weight.array() < 0).any())
    add("params.q/r: weights must be nonnegative");

  std::set<int> ids;
  qts::Occupancy initial = cells > 0 ? qts::Occupancy::Zero(cells, cells).eval()
                                     : qts::Occupancy{};
  for (const auto& a : s.agents) {
    const std::string where = "agents[id=" + std::to_string(a.id) + "]";
    if (!ids.insert(a.id).second) add(where + ": duplicate id");
    if (a.goal.empty()) add(where + ".goal: polytope must be nonempty");
    const Eigen::Vector2d p{a.x0[0], a.x0[1]};
    if (p.x() < s.grid.origin.x() || p.x() > s.grid.origin.x() + s.grid.side ||
        p.y() < s.grid.origin.y() || p.y() > s.grid.origin.y() + s.grid.side)
      add(where + ".x0: initial position outside the workspace");
    const Eigen::Vector2d gc = a.goal_center();
    if (gc.x() < s.grid.origin.x() || gc.x() > s.grid.origin.x() + s.grid.side ||
        gc.y() < s.grid.origin.y() || gc.y() > s.grid.origin.y() + s.grid.side)
      add(where + ".goal: center outside the workspace");
    if (cells > 0 && s.capacity.rows() == cells) {
      const auto c = qts::cell_of(p, s.grid);
      initial(c.m, c.n) += 1;
      // the encoder keeps positions an epsilon inside the exclusive cell
      // edges; a start on one would make the fixed first step infeasible
      if (s.grid.east(c.n) - p.x() < 1e-3 || p.y() - s.grid.south(c.m) < 1e-3)
        add(where + ".x0: position within 1e-3 of an exclusive cell edge");
    }
  }
  if (cells > 0 && s.capacity.rows() == cells) {
    for (int m = 0; m < cells; ++m)
      for (int n = 0; n < cells; ++n)
        if (initial(m, n) > s.capacity(m, n))
          add("agents: initial cell (" + std::to_string(m) + "," + std::to_string(n) +
              ") holds " + std::to_string(initial(m, n)) + " agents, capacity " +
              std::to_string(s.capacity(m, n)));
  }
  return problems;
}

}  // namespace camp::scenario
