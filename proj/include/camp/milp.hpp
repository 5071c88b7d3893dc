#pragma once

#include <iosfwd>
#include <string>
#include <vector>

// Mixed-integer linear programming substrate: model container, two-phase
// primal simplex for LP relaxations, and best-bound branch-and-bound over
// binary variables. Minimization throughout.
namespace camp::milp {

enum class VarKind { Continuous, Binary };
enum class Sense { Le, Eq, Ge };
enum class Status { Optimal, Infeasible, Unbounded, NodeLimit };

const char* status_name(Status s);

struct Term {
  int var = 0;
  double coef = 0.0;
};

class Model {
 public:
  // Binary variables get bounds [0,1] regardless of the arguments; continuous
  // variables require finite bounds (big-M discipline).
  int add_var(VarKind kind, double lb, double ub, std::string name = {});
  int add_constraint(std::vector<Term> row, Sense sense, double rhs);

  void add_objective_term(int var, double coef);
  void add_objective_constant(double c) { objective_constant_ += c; }

  void set_bounds(int var, double lb, double ub);

  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }
  int num_binaries() const;

  VarKind kind(int var) const { return vars_[static_cast<std::size_t>(var)].kind; }
  double lower(int var) const { return vars_[static_cast<std::size_t>(var)].lb; }
  double upper(int var) const { return vars_[static_cast<std::size_t>(var)].ub; }
  const std::string& name(int var) const {
    return vars_[static_cast<std::size_t>(var)].name;
  }
  double objective_coef(int var) const {
    return objective_[static_cast<std::size_t>(var)];
  }
  double objective_constant() const { return objective_constant_; }

  struct Row {
    std::vector<Term> terms;  // normalized: ids unique and ascending
    Sense sense = Sense::Le;
    double rhs = 0.0;
  };
  const Row& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

  double objective_value(const std::vector<double>& x) const;
  // Largest constraint/bound violation of an assignment.
  double feasibility_residual(const std::vector<double>& x) const;

 private:
  struct Var {
    VarKind kind;
    double lb, ub;
    std::string name;
  };
  std::vector<Var> vars_;
  std::vector<Row> rows_;
  std::vector<double> objective_;
  double objective_constant_ = 0.0;
};

struct SolveStats {
  long simplex_iterations = 0;
  long nodes = 0;
  double wall_seconds = 0.0;
};

struct Solution {
  Status status = Status::Infeasible;
  std::vector<double> values;  // per model variable; empty unless a point exists
  double objective = 0.0;
  SolveStats stats;
};

// Dual information from the final simplex basis (LP only).
struct LpInfo {
  std::vector<double> duals;          // per constraint row
  std::vector<double> reduced_costs;  // per model variable
  double dual_objective = 0.0;
};

struct SolveOptions {
  long node_limit = 1'000'000;
  double feas_tol = 1e-6;
  double int_tol = 1e-6;
  bool rounding_heuristic = true;  // root-LP rounding probe for an incumbent
};

// LP relaxation (binaries treated as continuous on [0,1]).
Solution solve_lp(const Model& model, const SolveOptions& options = {});
Solution solve_lp(const Model& model, LpInfo* info, const SolveOptions& options = {});

// Proven-optimal branch-and-bound: best-bound node order, branching on the
// most fractional binary with lowest-id tie-breaks; deterministic.
Solution solve_milp(const Model& model, const SolveOptions& options = {});

// Plain-text dump (objective, constraints, bounds, binaries sections).
void write_lp_text(const Model& model, std::ostream& os);

}  // namespace camp::milp
