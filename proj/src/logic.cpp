#include "camp/logic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace camp::logic {

double Predicate::value(std::span<const double> x) const {
  double v = offset;
  const std::size_t n = std::min(coeffs.size(), x.size());
  for (std::size_t i = 0; i < n; ++i) v += coeffs[i] * x[i];
  return v;
}

const char* quadrant_name(Quadrant q) {
  switch (q) {
    case NW: return "NW";
    case NE: return "NE";
    case SW: return "SW";
    case SE: return "SE";
  }
  return "?";
}

TsslFormula TsslFormula::truth() { return {}; }

TsslFormula TsslFormula::cmp(CmpSense sense, double threshold) {
  TsslFormula f;
  f.kind = Kind::ValCmp;
  f.sense = sense;
  f.threshold = threshold;
  return f;
}

TsslFormula TsslFormula::negation(TsslFormula f) {
  if (f.kind != Kind::ValCmp)
    throw std::invalid_argument("spatial negation is restricted to value comparisons");
  TsslFormula g;
  g.kind = Kind::Not;
  g.children.push_back(std::move(f));
  return g;
}

TsslFormula TsslFormula::conj(std::vector<TsslFormula> cs) {
  TsslFormula f;
  f.kind = Kind::And;
  f.children = std::move(cs);
  return f;
}

TsslFormula TsslFormula::disj(std::vector<TsslFormula> cs) {
  TsslFormula f;
  f.kind = Kind::Or;
  f.children = std::move(cs);
  return f;
}

TsslFormula TsslFormula::forall_next(LabelSet labels, TsslFormula f) {
  if ((labels & kAllLabels) == 0) throw std::invalid_argument("empty label set");
  TsslFormula g;
  g.kind = Kind::ForAllNext;
  g.labels = labels & kAllLabels;
  g.children.push_back(std::move(f));
  return g;
}

TsslFormula TsslFormula::exists_next(LabelSet labels, TsslFormula f) {
  if ((labels & kAllLabels) == 0) throw std::invalid_argument("empty label set");
  TsslFormula g;
  g.kind = Kind::ExistsNext;
  g.labels = labels & kAllLabels;
  g.children.push_back(std::move(f));
  return g;
}

StlFormula StlFormula::truth() { return {}; }

StlFormula StlFormula::falsity() {
  StlFormula f;
  f.kind = Kind::Pred;
  f.pred = Predicate{{}, -1.0};
  return f;
}

StlFormula StlFormula::predicate(Predicate p) {
  while (!p.coeffs.empty() && p.coeffs.back() == 0.0) p.coeffs.pop_back();
  StlFormula f;
  f.kind = Kind::Pred;
  f.pred = std::move(p);
  return f;
}

StlFormula StlFormula::negation(StlFormula f) {
  StlFormula g;
  g.kind = Kind::Not;
  g.children.push_back(std::move(f));
  return g;
}

StlFormula StlFormula::conj(std::vector<StlFormula> cs) {
  StlFormula f;
  f.kind = Kind::And;
  f.children = std::move(cs);
  return f;
}

StlFormula StlFormula::disj(std::vector<StlFormula> cs) {
  StlFormula f;
  f.kind = Kind::Or;
  f.children = std::move(cs);
  return f;
}

static void check_window(int a, int b) {
  if (a < 0 || b < a)
    throw std::invalid_argument("temporal window must satisfy 0 <= a <= b");
}

StlFormula StlFormula::always(int a, int b, StlFormula f) {
  check_window(a, b);
  StlFormula g;
  g.kind = Kind::Always;
  g.a = a;
  g.b = b;
  g.children.push_back(std::move(f));
  return g;
}

StlFormula StlFormula::eventually(int a, int b, StlFormula f) {
  check_window(a, b);
  StlFormula g;
  g.kind = Kind::Eventually;
  g.a = a;
  g.b = b;
  g.children.push_back(std::move(f));
  return g;
}

StlFormula StlFormula::until(int a, int b, StlFormula lhs, StlFormula rhs) {
  check_window(a, b);
  StlFormula g;
  g.kind = Kind::Until;
  g.a = a;
  g.b = b;
  g.children.push_back(std::move(lhs));
  g.children.push_back(std::move(rhs));
  return g;
}

StlFormula StlFormula::spatial_atom(TsslFormula f) {
  StlFormula g;
  g.kind = Kind::SpatialAtom;
  g.spatial = std::move(f);
  return g;
}

int horizon(const StlFormula& f) {
  using K = StlFormula::Kind;
  switch (f.kind) {
    case K::True:
    case K::Pred:
    case K::SpatialAtom:
      return 0;
    case K::Not:
      return horizon(f.children.front());
    case K::And:
    case K::Or: {
      int h = 0;
      for (const auto& c : f.children) h = std::max(h, horizon(c));
      return h;
    }
    case K::Always:
    case K::Eventually:
      return f.b + horizon(f.children.front());
    case K::Until:
      return f.b + std::max(horizon(f.children[0]), horizon(f.children[1]));
  }
  return 0;
}

namespace {

bool eval_rec(const StlFormula& f, const Signal& s, int k) {
  using K = StlFormula::Kind;
  switch (f.kind) {
    case K::True:
      return true;
    case K::Pred:
      return f.pred.holds(s.samples[static_cast<std::size_t>(k)]);
    case K::Not:
      return !eval_rec(f.children.front(), s, k);
    case K::And:
      for (const auto& c : f.children)
        if (!eval_rec(c, s, k)) return false;
      return true;
    case K::Or:
      for (const auto& c : f.children)
        if (eval_rec(c, s, k)) return true;
      return false;
    case K::Always:
      for (int t = k + f.a; t <= k + f.b; ++t)
        if (!eval_rec(f.children.front(), s, t)) return false;
      return true;
    case K::Eventually:
      for (int t = k + f.a; t <= k + f.b; ++t)
        if (eval_rec(f.children.front(), s, t)) return true;
      return false;
    case K::Until:
      for (int t = k + f.a; t <= k + f.b; ++t) {
        if (!eval_rec(f.children[1], s, t)) continue;
        bool lhs_ok = true;
        for (int t2 = k; t2 <= t; ++t2) {
          if (!eval_rec(f.children[0], s, t2)) {
            lhs_ok = false;
            break;
          }
        }
        if (lhs_ok) return true;
      }
      return false;
    case K::SpatialAtom:
      throw std::invalid_argument(
          "spatial atoms require a quadtree trace; use camp::qts::eval_spatel");
  }
  return false;
}

}  // namespace

bool eval_stl(const StlFormula& f, const Signal& s, int k) {
  if (k < 0) throw std::out_of_range("negative start step");
  const int h = horizon(f);
  if (static_cast<std::size_t>(k) + static_cast<std::size_t>(h) >= s.size())
    throw std::out_of_range("signal too short for the formula horizon (need " +
                            std::to_string(k + h + 1) + " samples, have " +
                            std::to_string(s.size()) + ")");
  return eval_rec(f, s, k);
}

StlFormula to_nnf(const StlFormula& f) {
  using K = StlFormula::Kind;
  if (f.kind != K::Not) {
    StlFormula g = f;
    for (auto& c : g.children) c = to_nnf(c);
    return g;
  }
  const StlFormula& c = f.children.front();
  switch (c.kind) {
    case K::True:
      return StlFormula::falsity();
    case K::Pred:
      return f;  // negation on a predicate is already normal form
    case K::Not:
      return to_nnf(c.children.front());
    case K::And: {
      std::vector<StlFormula> kids;
      kids.reserve(c.children.size());
      for (const auto& k : c.children) kids.push_back(to_nnf(StlFormula::negation(k)));
      return StlFormula::disj(std::move(kids));
    }
    case K::Or: {
      std::vector<StlFormula> kids;
      kids.reserve(c.children.size());
      for (const auto& k : c.children) kids.push_back(to_nnf(StlFormula::negation(k)));
      return StlFormula::conj(std::move(kids));
    }
    case K::Always:
      return StlFormula::eventually(c.a, c.b,
                                    to_nnf(StlFormula::negation(c.children.front())));
    case K::Eventually:
      return StlFormula::always(c.a, c.b,
                                to_nnf(StlFormula::negation(c.children.front())));
    case K::Until:
      throw std::invalid_argument("negated Until has no negation normal form here");
    case K::SpatialAtom:
      throw std::invalid_argument("negation of a spatial atom is not supported");
  }
  return f;
}

StlFormula build_goal_formula(const std::vector<HalfPlane>& polytope, int deadline) {
  if (polytope.empty()) throw std::invalid_argument("goal polytope must be nonempty");
  std::vector<StlFormula> preds;
  preds.reserve(polytope.size());
  for (const auto& hp : polytope) {
    // a . p + b <= 0  rewritten as  -a . p - b > 0 over state dims 0,1.
    Predicate p;
    p.coeffs = {-hp.a[0], -hp.a[1]};
    p.offset = -hp.b;
    preds.push_back(StlFormula::predicate(std::move(p)));
  }
  return StlFormula::eventually(0, deadline, StlFormula::conj(std::move(preds)));
}

StlFormula build_separation_formula(double d1, double d2, SeparationMode mode,
                                    int neighbor_count, int window_end) {
  if (d1 <= 0.0 || d2 <= 0.0)
    throw std::invalid_argument("separation distances must be positive");
  if (neighbor_count < 0) throw std::invalid_argument("negative neighbor count");
  if (neighbor_count == 0) return StlFormula::truth();

  auto axis_term = [](int own_dim, int other_dim, double d) {
    // |p_own - p_other| >= d as a disjunction of two strict half-planes.
    Predicate fwd;
    fwd.coeffs.assign(static_cast<std::size_t>(other_dim) + 1, 0.0);
    fwd.coeffs[static_cast<std::size_t>(own_dim)] = 1.0;
    fwd.coeffs[static_cast<std::size_t>(other_dim)] = -1.0;
    fwd.offset = -d;
    Predicate rev;
    rev.coeffs.assign(static_cast<std::size_t>(other_dim) + 1, 0.0);
    rev.coeffs[static_cast<std::size_t>(own_dim)] = -1.0;
    rev.coeffs[static_cast<std::size_t>(other_dim)] = 1.0;
    rev.offset = -d;
    return StlFormula::disj(
        {StlFormula::predicate(std::move(fwd)), StlFormula::predicate(std::move(rev))});
  };

  std::vector<StlFormula> clauses;
  clauses.reserve(static_cast<std::size_t>(neighbor_count));
  for (int j = 0; j < neighbor_count; ++j) {
    StlFormula t1 = axis_term(0, 4 + 2 * j, d1);
    StlFormula t2 = axis_term(1, 5 + 2 * j, d2);
    if (mode == SeparationMode::Conjunctive)
      clauses.push_back(StlFormula::conj({std::move(t1), std::move(t2)}));
    else
      clauses.push_back(StlFormula::disj({std::move(t1), std::move(t2)}));
  }
  return StlFormula::always(0, window_end, StlFormula::conj(std::move(clauses)));
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos); }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eof() {
    skip_ws();
    return pos >= text.size();
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool consume(std::string_view token) {
    skip_ws();
    if (text.substr(pos, token.size()) == token) {
      pos += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!consume(token)) fail("expected '" + std::string(token) + "'");
  }

  int parse_int() {
    skip_ws();
    std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start) fail("expected an integer");
    int value = 0;
    auto res = std::from_chars(text.data() + start, text.data() + pos, value);
    if (res.ec != std::errc{}) fail("integer out of range");
    return value;
  }

  bool at_number() {
    skip_ws();
    if (pos >= text.size()) return false;
    char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return true;
    if ((c == '+' || c == '-') && pos + 1 < text.size()) {
      char d = text[pos + 1];
      return std::isdigit(static_cast<unsigned char>(d)) || d == '.';
    }
    return false;
  }

  double parse_number() {
    skip_ws();
    const char* begin = text.data() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos += static_cast<std::size_t>(end - begin);
    return v;
  }

  std::pair<int, int> parse_window() {
    expect("[");
    int a = parse_int();
    expect(",");
    int b = parse_int();
    expect("]");
    if (a < 0 || b < a) fail("window must satisfy 0 <= a <= b");
    return {a, b};
  }

  // affine := ['+'|'-'] term (('+'|'-') term)* ; term := number ['*' var] | var
  struct Affine {
    std::vector<double> coeffs;
    double constant = 0.0;
  };

  int parse_var_index() {
    // 'x' followed by a 1-based dimension index
    skip_ws();
    if (pos >= text.size() || text[pos] != 'x') fail("expected a variable like x1");
    ++pos;
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start) fail("expected a dimension index after 'x'");
    int idx = 0;
    std::from_chars(text.data() + start, text.data() + pos, idx);
    if (idx < 1) fail("variable indices are 1-based");
    return idx - 1;
  }

  Affine parse_affine() {
    Affine acc;
    bool first = true;
    for (;;) {
      skip_ws();
      double sign = 1.0;
      if (consume("+")) {
        // explicit plus
      } else if (consume("-")) {
        sign = -1.0;
      } else if (!first) {
        break;
      }
      skip_ws();
      if (pos < text.size() && text[pos] == 'x') {
        int d = parse_var_index();
        if (acc.coeffs.size() <= static_cast<std::size_t>(d))
          acc.coeffs.resize(static_cast<std::size_t>(d) + 1, 0.0);
        acc.coeffs[static_cast<std::size_t>(d)] += sign;
      } else if (at_number()) {
        double v = sign * parse_number();
        skip_ws();
        if (consume("*")) {
          int d = parse_var_index();
          if (acc.coeffs.size() <= static_cast<std::size_t>(d))
            acc.coeffs.resize(static_cast<std::size_t>(d) + 1, 0.0);
          acc.coeffs[static_cast<std::size_t>(d)] += v;
        } else {
          acc.constant += v;
        }
      } else {
        fail("expected a term");
      }
      first = false;
      skip_ws();
      if (pos >= text.size() || (text[pos] != '+' && text[pos] != '-')) break;
    }
    return acc;
  }

  StlFormula parse_atom() {
    if (consume("true")) return StlFormula::truth();
    Affine lhs = parse_affine();
    skip_ws();
    std::string op;
    if (consume(">=")) op = ">=";
    else if (consume("<=")) op = "<=";
    else if (consume(">")) op = ">";
    else if (consume("<")) op = "<";
    else fail("expected a comparison operator");
    double rhs = parse_number();

    Predicate p;
    if (op == ">" || op == ">=") {
      p.coeffs = lhs.coeffs;
      p.offset = lhs.constant - rhs;
    } else {
      p.coeffs = lhs.coeffs;
      for (auto& c : p.coeffs) c = -c;
      p.offset = rhs - lhs.constant;
    }
    return StlFormula::predicate(std::move(p));
  }

  StlFormula parse_primary() {
    if (consume("(")) {
      StlFormula f = parse_formula();
      expect(")");
      return f;
    }
    return parse_atom();
  }

  StlFormula parse_unary() {
    skip_ws();
    if (pos < text.size() && (text[pos] == 'G' || text[pos] == 'F')) {
      char op = text[pos];
      // only a temporal operator if immediately followed by a window
      std::size_t save = pos;
      ++pos;
      skip_ws();
      if (pos < text.size() && text[pos] == '[') {
        auto [a, b] = parse_window();
        StlFormula child = parse_unary();
        return op == 'G' ? StlFormula::always(a, b, std::move(child))
                         : StlFormula::eventually(a, b, std::move(child));
      }
      pos = save;
    }
    if (consume("!")) {
      StlFormula f = parse_primary();
      if (f.kind != StlFormula::Kind::Pred)
        fail("negation is only allowed on atomic predicates");
      return StlFormula::negation(std::move(f));
    }
    return parse_primary();
  }

  StlFormula parse_until() {
    StlFormula lhs = parse_unary();
    for (;;) {
      skip_ws();
      std::size_t save = pos;
      if (pos < text.size() && text[pos] == 'U') {
        ++pos;
        skip_ws();
        if (pos < text.size() && text[pos] == '[') {
          auto [a, b] = parse_window();
          StlFormula rhs = parse_unary();
          lhs = StlFormula::until(a, b, std::move(lhs), std::move(rhs));
          continue;
        }
        pos = save;
      }
      break;
    }
    return lhs;
  }

  StlFormula parse_and() {
    StlFormula lhs = parse_until();
    std::vector<StlFormula> terms;
    while (consume("&&")) {
      if (terms.empty()) terms.push_back(std::move(lhs));
      terms.push_back(parse_until());
    }
    if (terms.empty()) return lhs;
    return StlFormula::conj(std::move(terms));
  }

  StlFormula parse_formula() {
    StlFormula lhs = parse_and();
    std::vector<StlFormula> terms;
    while (consume("||")) {
      if (terms.empty()) terms.push_back(std::move(lhs));
      terms.push_back(parse_and());
    }
    if (terms.empty()) return lhs;
    return StlFormula::disj(std::move(terms));
  }
};

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string affine_string(const Predicate& p) {
  std::string out;
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
    double c = p.coeffs[i];
    if (c == 0.0) continue;
    if (!out.empty()) {
      out += c < 0 ? " - " : " + ";
      c = std::abs(c);
    } else if (c < 0) {
      out += "-";
      c = -c;
    }
    if (c != 1.0) out += format_double(c) + "*";
    out += "x" + std::to_string(i + 1);
  }
  if (out.empty()) return format_double(p.offset);
  if (p.offset != 0.0) {
    out += p.offset < 0 ? " - " : " + ";
    out += format_double(std::abs(p.offset));
  }
  return out;
}

std::string print_rec(const StlFormula& f) {
  using K = StlFormula::Kind;
  auto wrap = [](const StlFormula& c) { return "(" + print_rec(c) + ")"; };
  switch (f.kind) {
    case K::True:
      return "true";
    case K::Pred:
      return affine_string(f.pred) + " > 0";
    case K::Not:
      return "!(" + print_rec(f.children.front()) + ")";
    case K::And: {
      std::string out;
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) out += " && ";
        out += wrap(f.children[i]);
      }
      return out;
    }
    case K::Or: {
      std::string out;
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) out += " || ";
        out += wrap(f.children[i]);
      }
      return out;
    }
    case K::Always:
      return "G[" + std::to_string(f.a) + "," + std::to_string(f.b) + "] " +
             wrap(f.children.front());
    case K::Eventually:
      return "F[" + std::to_string(f.a) + "," + std::to_string(f.b) + "] " +
             wrap(f.children.front());
    case K::Until:
      return wrap(f.children[0]) + " U[" + std::to_string(f.a) + "," +
             std::to_string(f.b) + "] " + wrap(f.children[1]);
    case K::SpatialAtom:
      throw std::invalid_argument("spatial atoms have no text form");
  }
  return {};
}

}  // namespace

StlFormula parse_stl(std::string_view text) {
  Parser p{text};
  StlFormula f = p.parse_formula();
  if (!p.eof()) p.fail("unexpected trailing input");
  return f;
}

std::string print_stl(const StlFormula& f) { return print_rec(f); }

}  // namespace camp::logic
