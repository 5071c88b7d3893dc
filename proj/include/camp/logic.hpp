#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Syntax trees and Boolean monitors for bounded-time signal temporal logic,
// plus the tree-spatial formulas that can be embedded in them as atoms.
namespace camp::logic {

// Affine atomic predicate: holds iff coeffs . x + offset > 0 (strict).
// coeffs may be shorter than the signal dimension; missing entries are zero.
struct Predicate {
  std::vector<double> coeffs;
  double offset = 0.0;

  double value(std::span<const double> x) const;
  bool holds(std::span<const double> x) const { return value(x) > 0.0; }
  bool operator==(const Predicate&) const = default;
};

// Quadrant edge labels of the spatial tree, bitmask-encoded.
enum Quadrant : unsigned { NW = 0, NE = 1, SW = 2, SE = 3 };
using LabelSet = unsigned;  // bit i set <=> Quadrant i in the set
inline constexpr LabelSet kAllLabels = 0xF;
inline constexpr LabelSet label_bit(Quadrant q) { return 1u << q; }
const char* quadrant_name(Quadrant q);

enum class CmpSense { Leq, Geq };

// Spatial formula over quadtree nodes. Spatial until is not supported.
struct TsslFormula {
  enum class Kind { True, ValCmp, Not, And, Or, ForAllNext, ExistsNext };

  Kind kind = Kind::True;
  CmpSense sense = CmpSense::Leq;  // ValCmp
  double threshold = 0.0;          // ValCmp
  LabelSet labels = 0;             // ForAllNext / ExistsNext
  std::vector<TsslFormula> children;

  bool operator==(const TsslFormula&) const = default;

  static TsslFormula truth();
  static TsslFormula cmp(CmpSense sense, double threshold);
  static TsslFormula negation(TsslFormula f);  // f must be ValCmp
  static TsslFormula conj(std::vector<TsslFormula> cs);
  static TsslFormula disj(std::vector<TsslFormula> cs);
  static TsslFormula forall_next(LabelSet labels, TsslFormula f);
  static TsslFormula exists_next(LabelSet labels, TsslFormula f);
};

// Temporal formula in negation normal form (negation on predicates only,
// except trees built explicitly for the reference evaluator in tests).
struct StlFormula {
  enum class Kind { True, Pred, Not, And, Or, Always, Eventually, Until, SpatialAtom };

  Kind kind = Kind::True;
  Predicate pred;                    // Pred
  int a = 0, b = 0;                  // Always / Eventually / Until window
  std::vector<StlFormula> children;  // Not:1, And/Or:n, temporal:1, Until:2
  TsslFormula spatial;               // SpatialAtom

  bool operator==(const StlFormula&) const = default;

  static StlFormula truth();
  static StlFormula falsity();  // predicate with zero coefficients, offset -1
  static StlFormula predicate(Predicate p);
  static StlFormula negation(StlFormula f);
  static StlFormula conj(std::vector<StlFormula> cs);
  static StlFormula disj(std::vector<StlFormula> cs);
  static StlFormula always(int a, int b, StlFormula f);
  static StlFormula eventually(int a, int b, StlFormula f);
  static StlFormula until(int a, int b, StlFormula lhs, StlFormula rhs);
  static StlFormula spatial_atom(TsslFormula f);
};

// Uniformly sampled discrete-time signal; samples[k][d] is dimension d at step k.
struct Signal {
  std::vector<std::vector<double>> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
};

struct ParseError : std::runtime_error {
  std::size_t position;
  ParseError(const std::string& what, std::size_t pos)
      : std::runtime_error(what), position(pos) {}
};

// Parses the infix grammar (see README); result is in negation normal form
// and round-trips through print_stl.
StlFormula parse_stl(std::string_view text);
std::string print_stl(const StlFormula& f);

// Number of future steps needed past k to decide satisfaction at k.
int horizon(const StlFormula& f);

// Boolean semantics at step k. Requires k + horizon(f) < s.size() and no
// spatial atoms (those are evaluated against a quadtree trace, see camp::qts).
bool eval_stl(const StlFormula& f, const Signal& s, int k);

// Pushes general negation inward (double negation, De Morgan, window duals).
// Negated Until has no bounded NNF form here and is rejected.
StlFormula to_nnf(const StlFormula& f);

// Goal-region half-plane: a . p + b <= 0.
struct HalfPlane {
  std::array<double, 2> a{0.0, 0.0};
  double b = 0.0;
};

// Eventually within `deadline` steps, all half-planes hold on the position
// coordinates (dims 0,1) of the 4-dimensional state.
StlFormula build_goal_formula(const std::vector<HalfPlane>& polytope, int deadline);

enum class SeparationMode { Conjunctive, Disjunctive };

// Pairwise axis separation against `neighbor_count` neighbors, wrapped in an
// Always over [0, window_end]. The formula reads a joint signal: dims 0..3 are
// the agent state, dims 4+2j, 5+2j the j-th neighbor position.
StlFormula build_separation_formula(double d1, double d2, SeparationMode mode,
                                    int neighbor_count, int window_end);

}  // namespace camp::logic
