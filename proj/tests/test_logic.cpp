#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "camp/logic.hpp"

using namespace camp::logic;

namespace {

Signal make_signal(std::vector<std::vector<double>> samples) {
  return Signal{std::move(samples)};
}

Predicate pred1(double coef, double off) { return Predicate{{coef}, off}; }

// Independent table-filling evaluator: fills verdicts bottom-up for every
// subformula and time index instead of recursing on demand. Supports general
// negation, which the production monitor restricts to predicates.
class TableEvaluator {
 public:
  TableEvaluator(const StlFormula& f, const Signal& s) : signal_(s) {
    evaluate(f);
    root_ = &f;
  }
  bool at(int k) const { return table_.at(root_).at(k); }

 private:
  const Signal& signal_;
  const StlFormula* root_ = nullptr;
  std::map<const StlFormula*, std::map<int, bool>> table_;

  void evaluate(const StlFormula& f) {
    using K = StlFormula::Kind;
    for (const auto& c : f.children) evaluate(c);
    const int len = static_cast<int>(signal_.size());
    const int last = len - 1 - horizon(f);
    auto& row = table_[&f];
    for (int k = 0; k <= last; ++k) {
      bool v = false;
      switch (f.kind) {
        case K::True: v = true; break;
        case K::Pred:
          v = f.pred.holds(signal_.samples[static_cast<std::size_t>(k)]);
          break;
        case K::Not: v = !table_[&f.children[0]].at(k); break;
        case K::And: {
          v = true;
          for (const auto& c : f.children) v = v && table_[&c].at(k);
          break;
        }
        case K::Or: {
          v = false;
          for (const auto& c : f.children) v = v || table_[&c].at(k);
          break;
        }
        case K::Always: {
          v = true;
          for (int t = k + f.a; t <= k + f.b; ++t)
            v = v && table_[&f.children[0]].at(t);
          break;
        }
        case K::Eventually: {
          v = false;
          for (int t = k + f.a; t <= k + f.b; ++t)
            v = v || table_[&f.children[0]].at(t);
          break;
        }
        case K::Until: {
          v = false;
          for (int t = k + f.a; t <= k + f.b && !v; ++t) {
            if (!table_[&f.children[1]].at(t)) continue;
            bool lhs = true;
            for (int t2 = k; t2 <= t; ++t2) lhs = lhs && table_[&f.children[0]].at(t2);
            v = lhs;
          }
          break;
        }
        case K::SpatialAtom: throw std::logic_error("not used here");
      }
      row[k] = v;
    }
  }
};

bool has_until(const StlFormula& g) {
  if (g.kind == StlFormula::Kind::Until) return true;
  for (const auto& c : g.children)
    if (has_until(c)) return true;
  return false;
}

// Random formula generator over 2-dimensional signals. Predicates use integer
// coefficients with half-integer offsets so no sample ever sits on a boundary.
StlFormula random_formula(std::mt19937_64& rng, int depth, bool allow_general_not) {
  std::uniform_int_distribution<int> kind_pick(0, depth == 0 ? 1 : 7);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_int_distribution<int> off(-4, 4);
  std::uniform_int_distribution<int> win(0, 3);
  const int k = kind_pick(rng);
  auto atom = [&] {
    Predicate p;
    p.coeffs = {static_cast<double>(coef(rng)), static_cast<double>(coef(rng))};
    if (p.coeffs[0] == 0.0 && p.coeffs[1] == 0.0) p.coeffs[0] = 1.0;
    p.offset = off(rng) + 0.5;
    return StlFormula::predicate(p);
  };
  switch (k) {
    case 0: return atom();
    case 1: return StlFormula::negation(atom());
    case 2:
      return StlFormula::conj({random_formula(rng, depth - 1, allow_general_not),
                               random_formula(rng, depth - 1, allow_general_not)});
    case 3:
      return StlFormula::disj({random_formula(rng, depth - 1, allow_general_not),
                               random_formula(rng, depth - 1, allow_general_not)});
    case 4: {
      int a = win(rng), b = a + win(rng);
      return StlFormula::always(a, b, random_formula(rng, depth - 1, allow_general_not));
    }
    case 5: {
      int a = win(rng), b = a + win(rng);
      return StlFormula::eventually(a, b,
                                    random_formula(rng, depth - 1, allow_general_not));
    }
    case 6: {
      int a = win(rng), b = a + win(rng);
      return StlFormula::until(a, b, random_formula(rng, depth - 1, allow_general_not),
                               random_formula(rng, depth - 1, allow_general_not));
    }
    default: {
      if (!allow_general_not) return atom();
      // general negation over a negation-free, Until-free subtree
      StlFormula sub = random_formula(rng, std::max(0, depth - 1), false);
      if (has_until(sub)) return sub;
      return StlFormula::negation(std::move(sub));
    }
  }
}

Signal random_signal(std::mt19937_64& rng, int len) {
  std::uniform_int_distribution<int> v(-5, 5);
  std::vector<std::vector<double>> data;
  for (int i = 0; i < len; ++i)
    data.push_back({static_cast<double>(v(rng)), static_cast<double>(v(rng))});
  return make_signal(std::move(data));
}

}  // namespace

TEST_CASE("predicate evaluation pads missing coefficients") {
  Predicate p{{1.0}, -1.0};
  std::vector<double> x{2.0, 99.0};
  CHECK(p.holds(x));
  CHECK_FALSE(p.holds(std::vector<double>{1.0}));  // strict
}

TEST_CASE("parse of G with >= atom") {
  StlFormula f = parse_stl("G[0,50](x1 >= 1)");
  REQUIRE(f.kind == StlFormula::Kind::Always);
  CHECK(f.a == 0);
  CHECK(f.b == 50);
  REQUIRE(f.children[0].kind == StlFormula::Kind::Pred);
  CHECK(f.children[0].pred.coeffs == std::vector<double>{1.0});
  CHECK(f.children[0].pred.offset == -1.0);
}

TEST_CASE("parse of F with <= atom sign-flips the affine form") {
  StlFormula f = parse_stl("F[0,50]((x1 + 2 <= 0))");
  REQUIRE(f.kind == StlFormula::Kind::Eventually);
  REQUIRE(f.children[0].kind == StlFormula::Kind::Pred);
  CHECK(f.children[0].pred.coeffs == std::vector<double>{-1.0});
  CHECK(f.children[0].pred.offset == -2.0);
}

TEST_CASE("malformed input reports a position") {
  CHECK_THROWS_AS(parse_stl("G[0,"), ParseError);
  try {
    parse_stl("G[0,");
  } catch (const ParseError& e) {
    CHECK(e.position >= 3);
  }
  CHECK_THROWS_AS(parse_stl("G[3,1] x1 > 0"), ParseError);  // inverted window
  CHECK_THROWS_AS(parse_stl("x1 >"), ParseError);
  CHECK_THROWS_AS(parse_stl("!(G[0,2] x1 > 0)"), ParseError);  // negation on non-atom
  CHECK_THROWS_AS(parse_stl("x1 > 0 extra"), ParseError);
}

TEST_CASE("parser round-trips through the printer") {
  const char* cases[] = {
      "G[0,50] (x1 > 0)",
      "F[0,3] ((x1 - x2 + 0.5 > 0) && (x2 > 0))",
      "(x1 > 0) U[1,4] (!(x2 - 1 > 0))",
      "true",
      "(x1 > 0) || (x2 > 0) || (-x1 + 2*x2 - 1.25 > 0)",
      "G[0,2] (F[1,3] ((x1 > 0) U[0,2] (x2 > 0)))",
  };
  for (const char* c : cases) {
    StlFormula f = parse_stl(c);
    StlFormula g = parse_stl(print_stl(f));
    CHECK(f == g);
  }
}

TEST_CASE("random formulas round-trip through the printer") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    StlFormula f = random_formula(rng, 3, false);
    CAPTURE(print_stl(f));
    CHECK(parse_stl(print_stl(f)) == f);
  }
}

TEST_CASE("horizon recursion") {
  CHECK(horizon(StlFormula::predicate(pred1(1, 0))) == 0);
  CHECK(horizon(parse_stl("G[0,50] (x1 > 0)")) == 50);
  CHECK(horizon(StlFormula::eventually(
            0, 3, StlFormula::always(0, 2, StlFormula::predicate(pred1(1, 0))))) == 5);
  CHECK(horizon(parse_stl("(x1 > 0) U[2,4] (G[0,3] (x2 > 0))")) == 7);
}

TEST_CASE("basic Boolean semantics") {
  Signal s = make_signal({{1}, {2}, {3}});
  CHECK(eval_stl(parse_stl("G[0,2] (x1 > 0)"), s, 0));

  Signal s2 = make_signal({{-1}, {-1}, {0}});
  CHECK_FALSE(eval_stl(parse_stl("F[0,2] (x1 > 0)"), s2, 0));  // strict: 0 not > 0

  Signal s3 = make_signal({{1}, {2}, {6}});
  CHECK(eval_stl(parse_stl("(x1 > 0) U[0,2] (x1 > 5)"), s3, 0));
  Signal s4 = make_signal({{1}, {-2}, {6}});
  CHECK_FALSE(eval_stl(parse_stl("(x1 > 0) U[0,2] (x1 > 5)"), s4, 0));
  // the left operand must hold at the witness step too
  Signal s5 = make_signal({{1}, {1}, {-6}});
  CHECK_FALSE(eval_stl(parse_stl("(x1 > 0) U[0,2] (-x1 > 5)"), s5, 0));
}

TEST_CASE("signal too short raises") {
  Signal s = make_signal({{1}, {1}});
  CHECK_THROWS_AS(eval_stl(parse_stl("G[0,2] (x1 > 0)"), s, 0), std::out_of_range);
  CHECK_THROWS_AS(eval_stl(parse_stl("x1 > 0"), s, 2), std::out_of_range);
}

TEST_CASE("goal formula construction") {
  // unit square around the origin
  std::vector<HalfPlane> box = {
      {{1, 0}, -0.5}, {{-1, 0}, -0.5}, {{0, 1}, -0.5}, {{0, -1}, -0.5}};
  StlFormula f = build_goal_formula(box, 50);
  REQUIRE(f.kind == StlFormula::Kind::Eventually);
  CHECK(f.b == 50);
  CHECK(f.children[0].children.size() == 4);

  std::vector<HalfPlane> tri = {{{1, 0}, 0}, {{0, 1}, 0}, {{-1, -1}, 1}};
  CHECK(build_goal_formula(tri, 10).children[0].children.size() == 3);

  CHECK_THROWS_AS(build_goal_formula({}, 10), std::invalid_argument);

  Signal inside = make_signal({{0.2, -0.1, 0.0, 0.0}});
  CHECK(eval_stl(StlFormula{f.children[0]}, inside, 0));
  Signal outside = make_signal({{0.7, 0.0, 0.0, 0.0}});
  CHECK_FALSE(eval_stl(StlFormula{f.children[0]}, outside, 0));
}

TEST_CASE("separation formula modes") {
  // joint signal: agent state dims 0..3, neighbor position dims 4,5
  StlFormula disj = build_separation_formula(1, 1, SeparationMode::Disjunctive, 1, 0);
  StlFormula conj = build_separation_formula(1, 1, SeparationMode::Conjunctive, 1, 0);

  Signal sx = make_signal({{0, 0, 0, 0, 2, 0.5}});  // separated on x only
  CHECK(eval_stl(disj, sx, 0));
  CHECK_FALSE(eval_stl(conj, sx, 0));
  Signal sboth = make_signal({{0, 0, 0, 0, 2, 2}});
  CHECK(eval_stl(conj, sboth, 0));
  Signal stight = make_signal({{0, 0, 0, 0, 1, 0}});  // exactly at distance 1
  CHECK_FALSE(eval_stl(disj, stight, 0));

  CHECK(build_separation_formula(1, 1, SeparationMode::Disjunctive, 0, 5).kind ==
        StlFormula::Kind::True);
  CHECK_THROWS_AS(build_separation_formula(0, 1, SeparationMode::Disjunctive, 1, 5),
                  std::invalid_argument);
}

TEST_CASE("recursive monitor equals the table-filling evaluator") {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    StlFormula f = random_formula(rng, 4, false);
    const int h = horizon(f);
    if (h > 10) continue;
    Signal s = random_signal(rng, std::min(12, h + 1 + static_cast<int>(rng() % 3)));
    TableEvaluator table(f, s);
    const int kmax = static_cast<int>(s.size()) - 1 - h;
    for (int k = 0; k <= kmax; ++k) {
      CAPTURE(print_stl(f));
      CHECK(eval_stl(f, s, k) == table.at(k));
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("normalization preserves verdicts of general-negation trees") {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int i = 0; i < 600; ++i) {
    StlFormula f = random_formula(rng, 3, true);
    StlFormula g = to_nnf(f);
    const int h = std::max(horizon(f), horizon(g));
    if (h > 10) continue;
    Signal s = random_signal(rng, h + 2);
    TableEvaluator before(f, s);  // the reference supports general negation
    TableEvaluator after(g, s);
    CHECK(before.at(0) == after.at(0));
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("double negation collapses") {
  StlFormula f = parse_stl("G[0,2] (x1 > 0)");
  StlFormula nn = StlFormula::negation(StlFormula::negation(f));
  CHECK(to_nnf(nn) == f);
}

TEST_CASE("horizon is tight: samples beyond it never matter") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    StlFormula f = random_formula(rng, 3, false);
    const int h = horizon(f);
    if (h > 9) continue;
    Signal s = random_signal(rng, h + 3);
    const bool verdict = eval_stl(f, s, 0);
    Signal mutated = s;
    for (std::size_t t = static_cast<std::size_t>(h) + 1; t < s.size(); ++t)
      for (auto& v : mutated.samples[t]) v = -v + 17.5;
    CHECK(eval_stl(f, mutated, 0) == verdict);
  }
}

TEST_CASE("Until satisfaction implies Eventually of the right operand") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 300; ++i) {
    std::uniform_int_distribution<int> win(0, 3);
    int a = win(rng), b = a + win(rng);
    StlFormula l = random_formula(rng, 1, false);
    StlFormula r = random_formula(rng, 1, false);
    StlFormula u = StlFormula::until(a, b, l, r);
    StlFormula ev = StlFormula::eventually(a, b, r);
    const int h = std::max(horizon(u), horizon(ev));
    Signal s = random_signal(rng, h + 2);
    if (eval_stl(u, s, 0)) CHECK(eval_stl(ev, s, 0));
  }
}
