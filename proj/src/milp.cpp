#include "camp/milp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace camp::milp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;    // minimum acceptable pivot magnitude
constexpr double kDualTol = 1e-7;     // reduced-cost optimality tolerance
constexpr double kPrimalTol = 1e-7;   // phase-1 residual tolerance
constexpr double kDropTol = 1e-11;    // snap tiny tableau entries to zero
constexpr int kStallLimit = 60;       // degenerate pivots before Bland's rule
}  // namespace

const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NodeLimit: return "node-limit";
  }
  return "?";
}

int Model::add_var(VarKind kind, double lb, double ub, std::string name) {
  if (kind == VarKind::Binary) {
    lb = 0.0;
    ub = 1.0;
  } else {
    if (!(lb <= ub)) throw std::invalid_argument("inverted bounds on variable " + name);
    if (!std::isfinite(lb) || !std::isfinite(ub))
      throw std::invalid_argument("continuous variables require finite bounds: " + name);
  }
  vars_.push_back({kind, lb, ub, std::move(name)});
  objective_.push_back(0.0);
  return static_cast<int>(vars_.size()) - 1;
}

int Model::add_constraint(std::vector<Term> row, Sense sense, double rhs) {
  std::map<int, double> merged;
  for (const auto& t : row) {
    if (t.var < 0 || t.var >= num_vars())
      throw std::invalid_argument("constraint references unknown variable id " +
                                  std::to_string(t.var));
    merged[t.var] += t.coef;
  }
  Row r;
  r.sense = sense;
  r.rhs = rhs;
  for (auto [v, c] : merged)
    if (c != 0.0) r.terms.push_back({v, c});
  rows_.push_back(std::move(r));
  return static_cast<int>(rows_.size()) - 1;
}

void Model::add_objective_term(int var, double coef) {
  if (var < 0 || var >= num_vars())
    throw std::invalid_argument("objective references unknown variable id");
  objective_[static_cast<std::size_t>(var)] += coef;
}

void Model::set_bounds(int var, double lb, double ub) {
  if (!(lb <= ub)) throw std::invalid_argument("inverted bounds");
  auto& v = vars_[static_cast<std::size_t>(var)];
  v.lb = lb;
  v.ub = ub;
}

int Model::num_binaries() const {
  int k = 0;
  for (const auto& v : vars_)
    if (v.kind == VarKind::Binary) ++k;
  return k;
}

double Model::objective_value(const std::vector<double>& x) const {
  double obj = objective_constant_;
  for (std::size_t j = 0; j < objective_.size(); ++j) obj += objective_[j] * x[j];
  return obj;
}

double Model::feasibility_residual(const std::vector<double>& x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    worst = std::max(worst, vars_[j].lb - x[j]);
    worst = std::max(worst, x[j] - vars_[j].ub);
  }
  for (const auto& r : rows_) {
    double lhs = 0.0;
    for (const auto& t : r.terms) lhs += t.coef * x[static_cast<std::size_t>(t.var)];
    switch (r.sense) {
      case Sense::Le: worst = std::max(worst, lhs - r.rhs); break;
      case Sense::Ge: worst = std::max(worst, r.rhs - lhs); break;
      case Sense::Eq: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Bounded-variable two-phase primal simplex on a dense tableau.
// ---------------------------------------------------------------------------

namespace {

enum class VarState : unsigned char { Basic, AtLb, AtUb };

// Internal signal: the tableau went numerically bad; restart conservatively.
struct NumericalTrouble {};

class Simplex {
 public:
  Simplex(const Model& model, const std::vector<double>& lb,
          const std::vector<double>& ub, bool safe_mode)
      : model_(model),
        m_(model.num_constraints()),
        n_(model.num_vars()),
        safe_mode_(safe_mode) {
    lb_ = lb;
    ub_ = ub;
    build();
  }

  Status run() {
    if (!phase1()) return Status::Infeasible;
    return phase2();
  }

  long iterations() const { return iterations_; }

  std::vector<double> primal_values() const {
    std::vector<double> x(full_values());
    x.resize(static_cast<std::size_t>(n_));
    return x;
  }

  void fill_info(LpInfo& info) const {
    info.duals.assign(static_cast<std::size_t>(m_), 0.0);
    for (int i = 0; i < m_; ++i) {
      const int col = row_unit_col_[static_cast<std::size_t>(i)];
      if (col >= 0)
        info.duals[static_cast<std::size_t>(i)] =
            -d2_[static_cast<std::size_t>(col)] * row_unit_sign_[static_cast<std::size_t>(i)];
    }
    info.reduced_costs.assign(d2_.begin(), d2_.begin() + n_);
    // dual objective: y.b plus bound contributions of nonbasic variables
    double obj = model_.objective_constant();
    for (int i = 0; i < m_; ++i)
      obj += info.duals[static_cast<std::size_t>(i)] * model_.row(i).rhs;
    const std::vector<double> x = full_values();
    for (int j = 0; j < ncols_; ++j) {
      if (state_[static_cast<std::size_t>(j)] == VarState::Basic) continue;
      const double d = d2_[static_cast<std::size_t>(j)];
      if (d == 0.0) continue;
      obj += d * x[static_cast<std::size_t>(j)];
    }
    info.dual_objective = obj;
  }

 private:
  const Model& model_;
  int m_, n_;
  int ncols_ = 0;
  std::vector<double> lb_, ub_;        // per tableau column
  std::vector<double> tab_;            // m_ x ncols_, row-major
  std::vector<double> xb_;             // basic values per row
  std::vector<double> d1_, d2_;        // phase-1 / phase-2 reduced cost rows
  std::vector<int> basis_;             // column basic in each row
  std::vector<VarState> state_;
  std::vector<int> artificials_;       // artificial column per row (-1 if none)
  std::vector<bool> is_art_;           // per column
  std::vector<int> row_unit_col_;      // slack-or-artificial column identifying row i
  std::vector<double> row_unit_sign_;  // its coefficient (+1/-1)
  std::vector<double> row_sign_;       // +1, or -1 for Ge rows normalized to Le
  std::vector<int> slack_col_;         // slack column per row (-1 on equalities)
  std::vector<double> art_sign_;       // artificial orientation per row
  long iterations_ = 0;
  bool bland_ = false;
  int stall_ = 0;
  bool safe_mode_ = false;

  void check_finite() const {
    for (int i = 0; i < m_; ++i)
      if (!std::isfinite(xb_[static_cast<std::size_t>(i)])) throw NumericalTrouble{};
  }

  // standard-form column (after Ge negation) for the tableau rebuild
  Eigen::VectorXd std_column(int col) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m_);
    if (col < n_) {
      for (int i = 0; i < m_; ++i) {
        for (const auto& t : model_.row(i).terms)
          if (t.var == col) v[i] = row_sign_[static_cast<std::size_t>(i)] * t.coef;
      }
    } else {
      for (int i = 0; i < m_; ++i) {
        if (slack_col_[static_cast<std::size_t>(i)] == col) v[i] = 1.0;
        if (artificials_[static_cast<std::size_t>(i)] == col)
          v[i] = art_sign_[static_cast<std::size_t>(i)];
      }
    }
    return v;
  }

  // Recomputes the tableau, basic values, and both cost rows from the
  // original data and the current basis.
  void rebuild_from_basis() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i)
      B.col(i) = std_column(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);

    // dense standard-form matrix built column-wise (row-major target)
    Eigen::MatrixXd A(m_, ncols_);
    for (int j = 0; j < ncols_; ++j) A.col(j) = std_column(j);
    const Eigen::MatrixXd T = lu.solve(A);
    if (!T.allFinite()) throw NumericalTrouble{};  // basis gone singular
    // the basis columns must reduce to near-unit vectors, or the pivots
    // that built this basis were numerically worthless
    for (int i = 0; i < m_; ++i) {
      const double diag = T(i, basis_[static_cast<std::size_t>(i)]);
      if (std::abs(diag - 1.0) > 1e-6) throw NumericalTrouble{};
    }
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < ncols_; ++j) tab(i, j) = T(i, j);

    Eigen::VectorXd rhs(m_);
    for (int i = 0; i < m_; ++i)
      rhs[i] = row_sign_[static_cast<std::size_t>(i)] * model_.row(i).rhs;
    Eigen::VectorXd xnb = Eigen::VectorXd::Zero(ncols_);
    for (int j = 0; j < ncols_; ++j)
      if (state_[static_cast<std::size_t>(j)] != VarState::Basic)
        xnb[j] = state_[static_cast<std::size_t>(j)] == VarState::AtUb
                     ? ub_[static_cast<std::size_t>(j)]
                     : lb_[static_cast<std::size_t>(j)];
    const Eigen::VectorXd xb = lu.solve(rhs - A * xnb);
    for (int i = 0; i < m_; ++i) xb_[static_cast<std::size_t>(i)] = xb[i];

    auto rebuild_costs = [&](std::vector<double>& d, bool phase1_costs) {
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) {
        const int b = basis_[static_cast<std::size_t>(i)];
        if (phase1_costs)
          cb[i] = is_art_[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
        else
          cb[i] = b < n_ ? model_.objective_coef(b) : 0.0;
      }
      const Eigen::VectorXd y = lu.transpose().solve(cb);
      const Eigen::VectorXd yA = A.transpose() * y;
      for (int j = 0; j < ncols_; ++j) {
        double cj;
        if (phase1_costs)
          cj = is_art_[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
        else
          cj = j < n_ ? model_.objective_coef(j) : 0.0;
        d[static_cast<std::size_t>(j)] = cj - yA[j];
      }
    };
    rebuild_costs(d1_, true);
    rebuild_costs(d2_, false);
  }

  bool has_entering(const std::vector<double>& d, bool phase1) const {
    for (int j = 0; j < ncols_; ++j) {
      const auto st = state_[static_cast<std::size_t>(j)];
      if (st == VarState::Basic) continue;
      if (lb_[static_cast<std::size_t>(j)] == ub_[static_cast<std::size_t>(j)]) continue;
      if (!phase1 && is_art_[static_cast<std::size_t>(j)]) continue;
      const double dj = d[static_cast<std::size_t>(j)];
      if (st == VarState::AtLb ? dj < -kDualTol : dj > kDualTol) return true;
    }
    return false;
  }

  double& tab(int r, int c) {
    return tab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(ncols_) +
                static_cast<std::size_t>(c)];
  }
  double tab(int r, int c) const {
    return tab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(ncols_) +
                static_cast<std::size_t>(c)];
  }

  std::vector<double> full_values() const {
    std::vector<double> x(static_cast<std::size_t>(ncols_));
    for (int j = 0; j < ncols_; ++j)
      x[static_cast<std::size_t>(j)] =
          state_[static_cast<std::size_t>(j)] == VarState::AtUb
              ? ub_[static_cast<std::size_t>(j)]
              : lb_[static_cast<std::size_t>(j)];
    for (int i = 0; i < m_; ++i)
      x[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] =
          xb_[static_cast<std::size_t>(i)];
    return x;
  }

  void build() {
    // Columns: structural | slack per inequality row | artificials as needed.
    // Ge rows are normalized to Le by negation at intake below.
    std::vector<int>& slack_col = slack_col_;
    slack_col.assign(static_cast<std::size_t>(m_), -1);
    int cols = n_;
    for (int i = 0; i < m_; ++i)
      if (model_.row(i).sense != Sense::Eq) slack_col[static_cast<std::size_t>(i)] = cols++;

    // nonbasic start: bound closest to zero
    state_.assign(static_cast<std::size_t>(cols), VarState::AtLb);
    for (int j = 0; j < n_; ++j)
      if (std::abs(ub_[static_cast<std::size_t>(j)]) <
          std::abs(lb_[static_cast<std::size_t>(j)]))
        state_[static_cast<std::size_t>(j)] = VarState::AtUb;

    // residuals at the starting point decide which rows need artificials
    std::vector<double> resid(static_cast<std::size_t>(m_));
    std::vector<double>& row_sign = row_sign_;
    row_sign.assign(static_cast<std::size_t>(m_), 1.0);
    for (int i = 0; i < m_; ++i) {
      const auto& r = model_.row(i);
      if (r.sense == Sense::Ge) row_sign[static_cast<std::size_t>(i)] = -1.0;
      double lhs = 0.0;
      for (const auto& t : r.terms) {
        const double v = state_[static_cast<std::size_t>(t.var)] == VarState::AtUb
                             ? ub_[static_cast<std::size_t>(t.var)]
                             : lb_[static_cast<std::size_t>(t.var)];
        lhs += t.coef * v;
      }
      resid[static_cast<std::size_t>(i)] =
          row_sign[static_cast<std::size_t>(i)] * (r.rhs - lhs);
    }

    artificials_.assign(static_cast<std::size_t>(m_), -1);
    for (int i = 0; i < m_; ++i) {
      const bool ineq = slack_col[static_cast<std::size_t>(i)] >= 0;
      if (!ineq || resid[static_cast<std::size_t>(i)] < 0.0)
        artificials_[static_cast<std::size_t>(i)] = cols++;
    }
    ncols_ = cols;

    lb_.resize(static_cast<std::size_t>(ncols_), 0.0);
    ub_.resize(static_cast<std::size_t>(ncols_), kInf);
    state_.resize(static_cast<std::size_t>(ncols_), VarState::AtLb);

    tab_.assign(static_cast<std::size_t>(m_) * static_cast<std::size_t>(ncols_), 0.0);
    xb_.assign(static_cast<std::size_t>(m_), 0.0);
    basis_.assign(static_cast<std::size_t>(m_), -1);
    d1_.assign(static_cast<std::size_t>(ncols_), 0.0);
    d2_.assign(static_cast<std::size_t>(ncols_), 0.0);
    row_unit_col_.assign(static_cast<std::size_t>(m_), -1);
    row_unit_sign_.assign(static_cast<std::size_t>(m_), 1.0);

    is_art_.assign(static_cast<std::size_t>(ncols_), false);
    for (int a : artificials_)
      if (a >= 0) is_art_[static_cast<std::size_t>(a)] = true;
    art_sign_.assign(static_cast<std::size_t>(m_), 1.0);

    for (int i = 0; i < m_; ++i) {
      const auto& r = model_.row(i);
      const double sgn = row_sign[static_cast<std::size_t>(i)];
      for (const auto& t : r.terms) tab(i, t.var) = sgn * t.coef;
      const int slack = slack_col[static_cast<std::size_t>(i)];
      if (slack >= 0) tab(i, slack) = 1.0;

      const int art = artificials_[static_cast<std::size_t>(i)];
      if (art >= 0) {
        // artificial oriented so it starts basic and nonnegative
        const double sigma = resid[static_cast<std::size_t>(i)] >= 0.0 ? 1.0 : -1.0;
        art_sign_[static_cast<std::size_t>(i)] = sigma;
        tab(i, art) = sigma;
        if (sigma < 0.0)
          for (int j = 0; j < ncols_; ++j) tab(i, j) = -tab(i, j);
        basis_[static_cast<std::size_t>(i)] = art;
        xb_[static_cast<std::size_t>(i)] = std::abs(resid[static_cast<std::size_t>(i)]);
        // dual of the original row recovers from the slack (inequalities) or
        // the artificial (equalities): y_i = -mult * d2[col]
        if (slack >= 0) {
          row_unit_col_[static_cast<std::size_t>(i)] = slack;
          row_unit_sign_[static_cast<std::size_t>(i)] = sgn;
        } else {
          row_unit_col_[static_cast<std::size_t>(i)] = art;
          row_unit_sign_[static_cast<std::size_t>(i)] = sigma;
        }
      } else {
        basis_[static_cast<std::size_t>(i)] = slack;
        xb_[static_cast<std::size_t>(i)] = resid[static_cast<std::size_t>(i)];
        row_unit_col_[static_cast<std::size_t>(i)] = slack;
        row_unit_sign_[static_cast<std::size_t>(i)] = sgn;
      }
      state_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] =
          VarState::Basic;
    }

    // reduced costs: phase 1 minimizes the artificial sum, phase 2 the model
    // objective; both start consistent with the (unit) initial basis.
    for (int j = 0; j < n_; ++j) d2_[static_cast<std::size_t>(j)] = model_.objective_coef(j);
    for (int i = 0; i < m_; ++i) {
      if (artificials_[static_cast<std::size_t>(i)] < 0) continue;
      // c1 of this basic artificial is 1: subtract its (scaled) row
      for (int j = 0; j < ncols_; ++j) d1_[static_cast<std::size_t>(j)] -= tab(i, j);
    }
    for (int i = 0; i < m_; ++i) {
      const int art = artificials_[static_cast<std::size_t>(i)];
      if (art >= 0) d1_[static_cast<std::size_t>(art)] += 1.0;
    }
  }

  double phase1_objective() const {
    double obj = 0.0;
    for (int i = 0; i < m_; ++i)
      if (is_art_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])])
        obj += xb_[static_cast<std::size_t>(i)];
    return obj;
  }

  // One simplex iteration against cost row d. Returns:
  //   0 = optimal for this cost row, 1 = pivot done, -1 = unbounded.
  int iterate(std::vector<double>& d, bool phase1) {
    // entering column: Dantzig pricing, Bland's rule while stalled
    int enter = -1;
    double best = -kDualTol;
    int dir = +1;
    for (int j = 0; j < ncols_; ++j) {
      const auto st = state_[static_cast<std::size_t>(j)];
      if (st == VarState::Basic) continue;
      if (lb_[static_cast<std::size_t>(j)] == ub_[static_cast<std::size_t>(j)]) continue;
      if (!phase1 && is_art_[static_cast<std::size_t>(j)]) continue;
      const double dj = d[static_cast<std::size_t>(j)];
      const double viol = st == VarState::AtLb ? dj : -dj;
      if (viol >= (bland_ ? -kDualTol : best - 1e-15)) continue;
      enter = j;
      dir = st == VarState::AtLb ? +1 : -1;
      best = viol;
      if (bland_) break;  // lowest eligible index
    }
    if (enter < 0) return 0;

    // Two-pass (Harris) ratio test with bounds. Pass 1 finds the step limit
    // with a small feasibility expansion; pass 2 picks, among rows whose
    // exact limit fits under it, the numerically strongest pivot. Tiny pivot
    // elements otherwise wreck the tableau.
    const double flip_gap = ub_[static_cast<std::size_t>(enter)] -
                            lb_[static_cast<std::size_t>(enter)];
    constexpr double kExpand = 1e-9;
    auto row_limit = [&](int i, double expand) -> double {
      const double coef = tab(i, enter);
      const double rate = -static_cast<double>(dir) * coef;  // d(xb_i)/d(theta)
      const int bi = basis_[static_cast<std::size_t>(i)];
      if (rate < 0.0) {
        const double lo = lb_[static_cast<std::size_t>(bi)];
        if (lo == -kInf) return kInf;
        return std::max(0.0, (xb_[static_cast<std::size_t>(i)] - lo + expand) / (-rate));
      }
      const double hi = ub_[static_cast<std::size_t>(bi)];
      if (hi == kInf) return kInf;
      return std::max(0.0, (hi - xb_[static_cast<std::size_t>(i)] + expand) / rate);
    };

    // Bland mode runs the exact textbook test so its termination proof holds
    double theta_max = flip_gap;  // may be +inf for slacks
    for (int i = 0; i < m_; ++i) {
      if (std::abs(tab(i, enter)) < kPivotTol) continue;
      theta_max = std::min(theta_max, row_limit(i, bland_ ? 0.0 : kExpand));
    }

    int pivot_row = -1;
    double pivot_abs = 0.0;
    double theta = theta_max;
    for (int i = 0; i < m_; ++i) {
      const double coef_abs = std::abs(tab(i, enter));
      if (coef_abs < kPivotTol) continue;
      const double exact = row_limit(i, 0.0);
      if (exact > theta_max) continue;
      bool take;
      if (pivot_row < 0)
        take = true;
      else if (bland_)
        take = basis_[static_cast<std::size_t>(i)] <
               basis_[static_cast<std::size_t>(pivot_row)];
      else
        take = coef_abs > pivot_abs;
      if (take) {
        pivot_row = i;
        pivot_abs = coef_abs;
        theta = exact;
      }
    }

    if (pivot_row < 0) {
      if (theta == kInf) return -1;  // unbounded direction
      theta = flip_gap;
      // bound flip: entering moves across to its other bound
      apply_column_move(enter, dir, theta);
      state_[static_cast<std::size_t>(enter)] =
          state_[static_cast<std::size_t>(enter)] == VarState::AtLb ? VarState::AtUb
                                                                    : VarState::AtLb;
      ++iterations_;
      stall_ = 0;
      return 1;
    }

    // degeneracy tracking; Bland's rule stays on for the rest of the phase
    if (theta <= 1e-9) {
      if (++stall_ > kStallLimit) bland_ = true;
    } else {
      stall_ = 0;
    }

    apply_column_move(enter, dir, theta);
    const int leave = basis_[static_cast<std::size_t>(pivot_row)];
    const double rate_leave = -static_cast<double>(dir) * tab(pivot_row, enter);
    state_[static_cast<std::size_t>(leave)] =
        rate_leave < 0.0 ? VarState::AtLb : VarState::AtUb;

    const double entering_value =
        (state_[static_cast<std::size_t>(enter)] == VarState::AtLb
             ? lb_[static_cast<std::size_t>(enter)]
             : ub_[static_cast<std::size_t>(enter)]) +
        static_cast<double>(dir) * theta;
    if (!std::isfinite(entering_value)) throw NumericalTrouble{};

    eliminate(pivot_row, enter);
    basis_[static_cast<std::size_t>(pivot_row)] = enter;
    state_[static_cast<std::size_t>(enter)] = VarState::Basic;
    xb_[static_cast<std::size_t>(pivot_row)] = entering_value;
    ++iterations_;
    if ((iterations_ & 63) == 0) check_finite();
    if (safe_mode_ && iterations_ % 512 == 0) rebuild_from_basis();
    return 1;
  }

  // Moves the entering variable by dir*theta, updating basic values.
  void apply_column_move(int enter, int dir, double theta) {
    if (theta == 0.0) return;
    for (int i = 0; i < m_; ++i) {
      const double coef = tab(i, enter);
      if (coef != 0.0)
        xb_[static_cast<std::size_t>(i)] -= static_cast<double>(dir) * coef * theta;
    }
  }

  void eliminate(int prow, int pcol) {
    double* prow_ptr = &tab(prow, 0);
    const double piv = prow_ptr[pcol];
    const double inv = 1.0 / piv;
    for (int j = 0; j < ncols_; ++j) {
      prow_ptr[j] *= inv;
      if (std::abs(prow_ptr[j]) < kDropTol) prow_ptr[j] = 0.0;
    }
    prow_ptr[pcol] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == prow) continue;
      double* row = &tab(i, 0);
      const double f = row[pcol];
      if (f == 0.0) continue;
      for (int j = 0; j < ncols_; ++j) {
        row[j] -= f * prow_ptr[j];
        if (std::abs(row[j]) < kDropTol) row[j] = 0.0;
      }
      row[pcol] = 0.0;
    }
    auto fix_costs = [&](std::vector<double>& d) {
      const double f = d[static_cast<std::size_t>(pcol)];
      if (f == 0.0) return;
      for (int j = 0; j < ncols_; ++j) {
        d[static_cast<std::size_t>(j)] -= f * prow_ptr[j];
        if (std::abs(d[static_cast<std::size_t>(j)]) < kDropTol)
          d[static_cast<std::size_t>(j)] = 0.0;
      }
      d[static_cast<std::size_t>(pcol)] = 0.0;
    };
    fix_costs(d1_);
    fix_costs(d2_);
  }

  bool phase1() {
    bool any_artificial = false;
    for (int a : artificials_)
      if (a >= 0) any_artificial = true;
    if (!any_artificial) return true;

    const bool trace = std::getenv("CAMP_MILP_TRACE") != nullptr;
    bland_ = safe_mode_;
    stall_ = 0;
    int rebuilds = 0;
    for (;;) {
      const int r = iterate(d1_, true);
      if (trace)
        std::cerr << "p1 it=" << iterations_ << " r=" << r
                  << " obj=" << phase1_objective() << " bland=" << bland_ << "\n";
      if (r == 0) {
        // confirm the claim against a freshly refactorized tableau; pivot
        // drift can otherwise hide an entering candidate
        if (rebuilds < 4) {
          ++rebuilds;
          rebuild_from_basis();
          if (has_entering(d1_, true)) {
            bland_ = rebuilds >= 2;  // be conservative after repeated stalls
            stall_ = 0;
            continue;
          }
        }
        break;
      }
      if (r < 0)
        throw std::runtime_error("phase-1 subproblem reported unbounded");
      if (iterations_ > 200000 + 500L * m_)
        throw std::runtime_error("simplex iteration limit exceeded (phase 1)");
    }
    if (phase1_objective() > kPrimalTol) return false;

    // artificials may remain basic at zero; freeze them so phase 2 cannot
    // move them away (the bounded ratio test enforces [0,0])
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[static_cast<std::size_t>(i)];
      if (is_art_[static_cast<std::size_t>(b)]) {
        xb_[static_cast<std::size_t>(i)] = 0.0;
        ub_[static_cast<std::size_t>(b)] = 0.0;
      }
    }
    for (int a : artificials_)
      if (a >= 0 && state_[static_cast<std::size_t>(a)] != VarState::Basic)
        ub_[static_cast<std::size_t>(a)] = 0.0;
    return true;
  }

  Status phase2() {
    const bool trace = std::getenv("CAMP_MILP_TRACE") != nullptr;
    bland_ = safe_mode_;
    stall_ = 0;
    int rebuilds = 0;
    for (;;) {
      const int r = iterate(d2_, false);
      if (trace && iterations_ % 1 == 0) {
        double obj = 0;
        for (int i = 0; i < m_; ++i) {
          const int b = basis_[static_cast<std::size_t>(i)];
          if (b < n_) obj += model_.objective_coef(b) * xb_[static_cast<std::size_t>(i)];
        }
        std::cerr << "p2 it=" << iterations_ << " r=" << r << " bland=" << bland_
                  << " stall=" << stall_ << " basicobj~=" << obj << "\n";
      }
      if (r == 0) {
        if (rebuilds < 4) {
          ++rebuilds;
          rebuild_from_basis();
          if (has_entering(d2_, false)) {
            bland_ = rebuilds >= 2;
            stall_ = 0;
            continue;
          }
        }
        return Status::Optimal;
      }
      if (r < 0) return Status::Unbounded;
      if (iterations_ > 400000 + 1000L * m_)
        throw std::runtime_error("simplex iteration limit exceeded (phase 2)");
    }
  }
};

struct LpOutcome {
  Status status;
  std::vector<double> values;
  double objective = 0.0;
  long iterations = 0;
};

LpOutcome run_lp(const Model& model, const std::vector<double>& lb,
                 const std::vector<double>& ub, LpInfo* info) {
  LpOutcome out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Simplex spx(model, lb, ub, attempt > 0);
    try {
      out.status = spx.run();
    } catch (const NumericalTrouble&) {
      // deterministic fallback: restart with Bland's rule, the exact ratio
      // test, and periodic refactorization from the initial basis
      out.iterations += spx.iterations();
      if (attempt > 0)
        throw std::runtime_error("simplex failed numerically even in safe mode");
      continue;
    }
    out.iterations += spx.iterations();
    if (out.status == Status::Optimal) {
      out.values = spx.primal_values();
      out.objective = model.objective_value(out.values);
      if (info) spx.fill_info(*info);
    }
    return out;
  }
  return out;
}

void relaxed_bounds(const Model& model, std::vector<double>& lb,
                    std::vector<double>& ub) {
  const int n = model.num_vars();
  lb.resize(static_cast<std::size_t>(n));
  ub.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    lb[static_cast<std::size_t>(j)] = model.lower(j);
    ub[static_cast<std::size_t>(j)] = model.upper(j);
  }
}

}  // namespace

Solution solve_lp(const Model& model, const SolveOptions& options) {
  return solve_lp(model, nullptr, options);
}

Solution solve_lp(const Model& model, LpInfo* info, const SolveOptions& options) {
  (void)options;
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> lb, ub;
  relaxed_bounds(model, lb, ub);
  LpOutcome out = run_lp(model, lb, ub, info);
  Solution sol;
  sol.status = out.status;
  sol.values = std::move(out.values);
  sol.objective = out.objective;
  sol.stats.simplex_iterations = out.iterations;
  sol.stats.nodes = 0;
  sol.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

Solution solve_milp(const Model& model, const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&](Solution s) {
    s.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
  };

  std::vector<int> binaries;
  for (int j = 0; j < model.num_vars(); ++j)
    if (model.kind(j) == VarKind::Binary) binaries.push_back(j);

  if (binaries.empty()) return finish(solve_lp(model, options));

  std::vector<double> base_lb, base_ub;
  relaxed_bounds(model, base_lb, base_ub);

  struct Node {
    double bound;
    long id;
    std::vector<std::pair<int, int>> fixes;  // (binary var, value)
    bool operator>(const Node& o) const {
      return bound > o.bound || (bound == o.bound && id > o.id);
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;

  Solution best;
  best.status = Status::Infeasible;
  bool have_incumbent = false;
  long nodes = 0;
  long iterations = 0;
  long next_id = 0;

  auto fractional_binary = [&](const std::vector<double>& x) {
    int pick = -1;
    double most = options.int_tol;
    for (int j : binaries) {
      const double v = x[static_cast<std::size_t>(j)];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > most + 1e-12) {
        most = frac;
        pick = j;
      }
    }
    return pick;
  };

  std::vector<double> lb = base_lb, ub = base_ub;
  auto apply_fixes = [&](const std::vector<std::pair<int, int>>& fixes) {
    lb = base_lb;
    ub = base_ub;
    for (auto [v, val] : fixes) {
      lb[static_cast<std::size_t>(v)] = val;
      ub[static_cast<std::size_t>(v)] = val;
    }
  };

  auto consider_incumbent = [&](const std::vector<double>& x, double obj) {
    if (!have_incumbent || obj < best.objective - 1e-12) {
      best.values = x;
      best.objective = obj;
      best.status = Status::Optimal;
      have_incumbent = true;
    }
  };

  open.push({-kInf, next_id++, {}});
  bool hit_node_limit = false;
  bool root_heuristic_pending = options.rounding_heuristic;

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (have_incumbent && node.bound >= best.objective - 1e-9) continue;
    if (nodes >= options.node_limit) {
      hit_node_limit = true;
      break;
    }

    apply_fixes(node.fixes);
    LpOutcome lp = run_lp(model, lb, ub, nullptr);
    ++nodes;
    iterations += lp.iterations;

    if (lp.status == Status::Unbounded) {
      // a bounded-below MILP cannot have an unbounded relaxation node
      Solution s;
      s.status = Status::Unbounded;
      s.stats.nodes = nodes;
      s.stats.simplex_iterations = iterations;
      return finish(s);
    }
    if (lp.status != Status::Optimal) continue;
    if (have_incumbent && lp.objective >= best.objective - 1e-9) continue;

    const int branch_var = fractional_binary(lp.values);
    if (branch_var < 0) {
      consider_incumbent(lp.values, lp.objective);
      continue;
    }

    if (root_heuristic_pending) {
      root_heuristic_pending = false;
      std::vector<std::pair<int, int>> rounded = node.fixes;
      for (int j : binaries)
        rounded.emplace_back(
            j, lp.values[static_cast<std::size_t>(j)] >= 0.5 ? 1 : 0);
      apply_fixes(rounded);
      LpOutcome probe = run_lp(model, lb, ub, nullptr);
      iterations += probe.iterations;
      if (probe.status == Status::Optimal)
        consider_incumbent(probe.values, probe.objective);
      if (have_incumbent && lp.objective >= best.objective - 1e-9) continue;
    }

    for (int val = 0; val <= 1; ++val) {
      Node child;
      child.bound = lp.objective;
      child.id = next_id++;
      child.fixes = node.fixes;
      child.fixes.emplace_back(branch_var, val);
      open.push(std::move(child));
    }
  }

  Solution s = std::move(best);
  if (hit_node_limit) s.status = Status::NodeLimit;
  s.stats.nodes = nodes;
  s.stats.simplex_iterations = iterations;
  return finish(s);
}

void write_lp_text(const Model& model, std::ostream& os) {
  auto var_name = [&](int j) {
    const std::string& n = model.name(j);
    return n.empty() ? "x" + std::to_string(j) : n;
  };
  os << "minimize\n obj:";
  bool first = true;
  for (int j = 0; j < model.num_vars(); ++j) {
    const double c = model.objective_coef(j);
    if (c == 0.0) continue;
    os << (first ? " " : " + ") << c << " " << var_name(j);
    first = false;
  }
  if (model.objective_constant() != 0.0)
    os << (first ? " " : " + ") << model.objective_constant();
  os << "\nsubject to\n";
  for (int i = 0; i < model.num_constraints(); ++i) {
    const auto& r = model.row(i);
    os << " c" << i << ":";
    for (std::size_t k = 0; k < r.terms.size(); ++k)
      os << (k ? " + " : " ") << r.terms[k].coef << " " << var_name(r.terms[k].var);
    if (r.terms.empty()) os << " 0";
    switch (r.sense) {
      case Sense::Le: os << " <= "; break;
      case Sense::Eq: os << " = "; break;
      case Sense::Ge: os << " >= "; break;
    }
    os << r.rhs << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < model.num_vars(); ++j)
    os << " " << model.lower(j) << " <= " << var_name(j) << " <= " << model.upper(j)
       << "\n";
  os << "binaries\n";
  for (int j = 0; j < model.num_vars(); ++j)
    if (model.kind(j) == VarKind::Binary) os << " " << var_name(j);
  os << "\n";
}

}  // namespace camp::milp
