#include "doctest.h"

#include <array>
#include <random>
#include <sstream>

#include "camp/milp.hpp"

using namespace camp::milp;

namespace {

// Brute-force reference: enumerate every binary assignment, solve the
// remaining LP, and keep the best outcome.
Solution enumerate_oracle(const Model& model) {
  std::vector<int> binaries;
  for (int j = 0; j < model.num_vars(); ++j)
    if (model.kind(j) == VarKind::Binary) binaries.push_back(j);

  Solution best;
  best.status = Status::Infeasible;
  bool found = false;
  Model work = model;
  const long combos = 1L << binaries.size();
  for (long mask = 0; mask < combos; ++mask) {
    for (std::size_t b = 0; b < binaries.size(); ++b) {
      const double v = (mask >> b) & 1 ? 1.0 : 0.0;
      work.set_bounds(binaries[b], v, v);
    }
    Solution lp = solve_lp(work);
    if (lp.status == Status::Unbounded) {
      best.status = Status::Unbounded;
      return best;
    }
    if (lp.status != Status::Optimal) continue;
    if (!found || lp.objective < best.objective) {
      best = lp;
      found = true;
    }
  }
  if (found) best.status = Status::Optimal;
  return best;
}

struct RandomMilp {
  Model model;
};

RandomMilp random_milp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvars(1, 8);
  std::uniform_int_distribution<int> coef(-5, 5);
  RandomMilp out;
  const int n = nvars(rng);
  std::uniform_int_distribution<int> nbin(0, std::min(6, n));
  const int nb = nbin(rng);
  for (int j = 0; j < n; ++j) {
    if (j < nb)
      out.model.add_var(VarKind::Binary, 0, 1);
    else
      out.model.add_var(VarKind::Continuous, -10, 10);
    out.model.add_objective_term(j, coef(rng));
  }
  std::uniform_int_distribution<int> nrows(0, 10);
  const int m = nrows(rng);
  for (int i = 0; i < m; ++i) {
    std::vector<Term> row;
    for (int j = 0; j < n; ++j) {
      const int c = coef(rng);
      if (c != 0) row.push_back({j, static_cast<double>(c)});
    }
    const Sense sense = std::array{Sense::Le, Sense::Ge, Sense::Eq}[rng() % 3];
    out.model.add_constraint(std::move(row), sense, coef(rng));
  }
  return out;
}

}  // namespace

TEST_CASE("variable and constraint intake") {
  Model m;
  CHECK(m.add_var(VarKind::Continuous, -10, 10, "a") == 0);
  CHECK(m.add_var(VarKind::Binary, -5, 5, "z") == 1);
  CHECK(m.lower(1) == 0.0);  // binary bounds forced to [0,1]
  CHECK(m.upper(1) == 1.0);
  CHECK_THROWS_AS(m.add_var(VarKind::Continuous, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(m.add_var(VarKind::Continuous, 0,
                            std::numeric_limits<double>::infinity()),
                  std::invalid_argument);

  CHECK(m.add_constraint({{0, 1.0}, {1, 1.0}}, Sense::Le, 1.0) == 0);
  // duplicate ids within a row are summed
  m.add_constraint({{0, 1.0}, {0, 2.0}}, Sense::Le, 6.0);
  CHECK(m.row(1).terms.size() == 1);
  CHECK(m.row(1).terms[0].coef == 3.0);
  CHECK_THROWS_AS(m.add_constraint({{7, 1.0}}, Sense::Le, 0.0), std::invalid_argument);

  // empty rows are accepted; feasibility is decided at solve time
  m.add_constraint({}, Sense::Le, 1.0);
}

TEST_CASE("small LPs") {
  {
    Model m;
    int x = m.add_var(VarKind::Continuous, 0, 10);
    m.add_objective_term(x, 1.0);
    m.add_constraint({{x, 1.0}}, Sense::Ge, 3.0);
    Solution s = solve_lp(m);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(3.0));
    CHECK(s.values[0] == doctest::Approx(3.0));
  }
  {
    Model m;
    int x = m.add_var(VarKind::Continuous, 0, 1);
    int y = m.add_var(VarKind::Continuous, 0, 1);
    m.add_objective_term(x, -1.0);
    m.add_objective_term(y, -1.0);
    m.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::Le, 1.0);
    Solution s = solve_lp(m);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-1.0));
  }
  {
    Model m;
    m.add_var(VarKind::Continuous, 0, 1);
    m.add_constraint({}, Sense::Le, -1.0);  // 0 <= -1
    CHECK(solve_lp(m).status == Status::Infeasible);
  }
}

TEST_CASE("LP relaxation treats binaries as continuous") {
  Model m;
  int z = m.add_var(VarKind::Binary, 0, 1);
  m.add_objective_term(z, 1.0);
  m.add_constraint({{z, 1.0}}, Sense::Ge, 0.25);
  Solution s = solve_lp(m);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.objective == doctest::Approx(0.25));
}

TEST_CASE("small MILPs") {
  {
    Model m;
    int x = m.add_var(VarKind::Binary, 0, 1);
    int y = m.add_var(VarKind::Binary, 0, 1);
    m.add_objective_term(x, 1.0);
    m.add_objective_term(y, 1.0);
    m.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::Ge, 1.5);
    Solution s = solve_milp(m);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(2.0));
  }
  {
    Model m;
    int x = m.add_var(VarKind::Continuous, -4, 4);
    m.add_objective_term(x, 2.0);
    m.add_constraint({{x, 1.0}}, Sense::Ge, -1.0);
    Solution milp = solve_milp(m);
    Solution lp = solve_lp(m);
    REQUIRE(milp.status == Status::Optimal);
    CHECK(milp.objective == doctest::Approx(lp.objective));
    CHECK(milp.stats.nodes == 0);  // no branching without binaries
  }
  {
    Model m;
    int z = m.add_var(VarKind::Binary, 0, 1);
    m.add_constraint({{z, 1.0}}, Sense::Ge, 0.3);
    m.add_constraint({{z, 1.0}}, Sense::Le, 0.7);
    CHECK(solve_milp(m).status == Status::Infeasible);
  }
}

TEST_CASE("objective constant flows through") {
  Model m;
  int x = m.add_var(VarKind::Continuous, 0, 5);
  m.add_objective_term(x, 1.0);
  m.add_objective_constant(10.0);
  Solution s = solve_lp(m);
  CHECK(s.objective == doctest::Approx(10.0));
}

TEST_CASE("random MILPs match the enumeration oracle") {
  std::mt19937_64 rng(12345);
  int infeasible_seen = 0;
  for (int i = 0; i < 60; ++i) {
    RandomMilp rm = random_milp(rng);
    Solution fast = solve_milp(rm.model);
    Solution slow = enumerate_oracle(rm.model);
    CAPTURE(i);
    REQUIRE(fast.status == slow.status);
    if (fast.status == Status::Optimal) {
      CHECK(fast.objective == doctest::Approx(slow.objective).epsilon(1e-9));
      CHECK(rm.model.feasibility_residual(fast.values) <= 1e-6);
      for (int j = 0; j < rm.model.num_vars(); ++j)
        if (rm.model.kind(j) == VarKind::Binary) {
          const double v = fast.values[static_cast<std::size_t>(j)];
          CHECK(std::min(v, 1.0 - v) <= 1e-6);
        }
    } else {
      ++infeasible_seen;
    }
  }
  CHECK(infeasible_seen > 2);
}

TEST_CASE("LP duality spot check") {
  std::mt19937_64 rng(777);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    RandomMilp rm = random_milp(rng);
    LpInfo info;
    Solution s = solve_lp(rm.model, &info);
    if (s.status != Status::Optimal) continue;
    CHECK(info.dual_objective == doctest::Approx(s.objective).epsilon(1e-7));
    // reduced costs of at-lower-bound variables are nonnegative at optimality
    for (int j = 0; j < rm.model.num_vars(); ++j) {
      const double v = s.values[static_cast<std::size_t>(j)];
      if (std::abs(v - rm.model.lower(j)) < 1e-9 &&
          std::abs(v - rm.model.upper(j)) > 1e-9)
        CHECK(info.reduced_costs[static_cast<std::size_t>(j)] >= -1e-6);
    }
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("determinism of repeated solves") {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 10; ++i) {
    RandomMilp rm = random_milp(rng);
    Solution a = solve_milp(rm.model);
    Solution b = solve_milp(rm.model);
    CHECK(a.status == b.status);
    CHECK(a.stats.nodes == b.stats.nodes);
    CHECK(a.stats.simplex_iterations == b.stats.simplex_iterations);
    if (a.status == Status::Optimal) {
      CHECK(a.objective == b.objective);
      CHECK(a.values == b.values);
    }
  }
}

TEST_CASE("adding a constraint never helps the minimum") {
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<int> coef(-5, 5);
  for (int i = 0; i < 40; ++i) {
    RandomMilp rm = random_milp(rng);
    Solution before = solve_milp(rm.model);
    std::vector<Term> row;
    for (int j = 0; j < rm.model.num_vars(); ++j) {
      const int c = coef(rng);
      if (c != 0) row.push_back({j, static_cast<double>(c)});
    }
    rm.model.add_constraint(std::move(row), Sense::Le, coef(rng));
    Solution after = solve_milp(rm.model);
    if (before.status == Status::Optimal && after.status == Status::Optimal)
      CHECK(after.objective >= before.objective - 1e-9);
    if (before.status == Status::Infeasible) CHECK(after.status == Status::Infeasible);
  }
}

TEST_CASE("plain-text dump carries all sections") {
  Model m;
  int x = m.add_var(VarKind::Continuous, -10, 10, "speed");
  int z = m.add_var(VarKind::Binary, 0, 1);
  m.add_objective_term(x, 2.5);
  m.add_constraint({{x, 1.0}, {z, -3.0}}, Sense::Le, 4.0);
  std::ostringstream os;
  write_lp_text(m, os);
  const std::string text = os.str();
  CHECK(text.find("minimize") != std::string::npos);
  CHECK(text.find("subject to") != std::string::npos);
  CHECK(text.find("bounds") != std::string::npos);
  CHECK(text.find("binaries") != std::string::npos);
  CHECK(text.find("speed") != std::string::npos);
}
