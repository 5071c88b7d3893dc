#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "camp/logic.hpp"
#include "camp/milp.hpp"
#include "camp/qts.hpp"

// Lowers one agent's horizon-H planning problem (dynamics, input and velocity
// limits, energy/goal and communication costs, temporal-logic and spatial
// pattern constraints with neighbors as constants) into a MilpModel.
namespace camp::encoder {

struct AgentModel {
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();     // discrete state map
  Eigen::Matrix<double, 4, 2> B = Eigen::Matrix<double, 4, 2>::Zero();
  double u_max = 1.0;  // per-axis input bound
  double v_max = 1.0;  // speed bound enforced by the velocity polygon
};

// Controllability of (A, B) via the rank of [B AB A^2B A^3B].
bool controllable(const AgentModel& am);

// Result of encoding a Boolean subformula: decided at encode time, or a
// model binary.
struct BoolRef {
  int var = -1;
  bool constant = false;
  bool is_const() const { return var < 0; }
  static BoolRef truth() { return {-1, true}; }
  static BoolRef falsity() { return {-1, false}; }
  static BoolRef of(int v) { return {v, false}; }
};

struct AffineExpr {
  std::vector<milp::Term> terms;
  double constant = 0.0;
};

struct EncodeOptions {
  int polygon_sides = 8;  // L
  double eps = 1e-4;      // strictness margin for predicate rows
  // Interval-fold subformulas that are certain over the variable box. Purely
  // a model-size reduction; the feasible set is unchanged.
  bool fold_constants = true;
  // Emit the per-cell big-M linking rows instead of the aggregated
  // (convex-hull) rows. Same feasible set over binary occupancies; the
  // aggregated form is smaller and tighter in relaxation.
  bool per_cell_bigm_linking = false;
};

// Variable handles and bindings for one agent's window. Window slots
// 0..steps-1 correspond to global steps t0..t0+steps-1.
class EncodingContext {
 public:
  milp::Model model;
  qts::Grid grid;
  EncodeOptions opts;
  int t0 = 0;
  int steps = 0;

  std::vector<std::array<int, 4>> x;  // state vars per slot
  std::vector<std::array<int, 2>> u;  // input vars per slot (steps-1 entries)
  std::vector<std::array<int, 4>> state_abs;  // |x| slacks, -1 when unused
  std::vector<std::array<int, 2>> input_abs;  // |u| slacks
  std::vector<std::array<int, 2>> goal_gap;   // Manhattan goal slacks
  std::vector<std::vector<int>> occ;          // occupancy binaries, cell-major

  // constants visible to formulas: neighbor positions per slot (joint-signal
  // dims 4+2j, 5+2j) and neighbor occupancy counts per slot
  std::vector<std::vector<Eigen::Vector2d>> neighbor_pos;
  std::vector<qts::Occupancy> neighbor_occ;

  int occ_var(int slot, int m, int n) const {
    return occ[static_cast<std::size_t>(slot)]
              [static_cast<std::size_t>(m * grid.cells_per_side() + n)];
  }

  // Affine view of a joint-signal dimension at a window slot.
  AffineExpr dim_expr(int dim, int slot) const;

  std::pair<double, double> expr_range(const AffineExpr& e) const;

  int new_binary(const char* tag);
  BoolRef negate(BoolRef ref);
  BoolRef make_and(const std::vector<BoolRef>& parts);
  BoolRef make_or(const std::vector<BoolRef>& parts);
  // strict predicate: z=1 forces value >= eps, z=0 forces value <= -eps
  BoolRef encode_pred(const AffineExpr& value);
  // non-strict comparison: z=1 forces value (<=|>=) d, z=0 the strict
  // opposite. When the value is known to live on a lattice of the given
  // granularity (occupancy means do), the complement uses the exact lattice
  // gap, which keeps the rows well scaled.
  BoolRef encode_cmp(const AffineExpr& value, logic::CmpSense sense, double d,
                     double granularity = 0.0);
  void require_true(BoolRef ref);

 private:
  int binary_count_ = 0;
};

// States for slots t0..t0+H-1 with slot 0 fixed to x0, inputs between
// consecutive states, input box via bounds, dynamics as equality rows.
EncodingContext encode_dynamics(const AgentModel& am, const Eigen::Vector4d& x0, int t0,
                                int H, const qts::Grid& grid, const EncodeOptions& opts);

// L-sided regular polygon inscribed over (v1, v2) per step.
void encode_velocity_polygon(EncodingContext& ctx, const AgentModel& am, int sides);

// Linearized energy/goal cost: weight * (q.|x| + r.|u| + lambda*k'^2 * sum
// of per-axis goal gaps). Slack families with zero weight are skipped.
void encode_cost_j1(EncodingContext& ctx, const Eigen::Vector4d& q,
                    const Eigen::Vector2d& r, double lambda, int current_step,
                    const Eigen::Vector2d& goal_center, double weight);

// Per-step occupancy binaries summing to one, linked to the position vars.
void encode_occupancy(EncodingContext& ctx);

// Communication reward: subtracts weight * sum_t sum_cells Q(m,n) * o(m,n,t)
// from the objective, Q = station quality + frozen neighbor patterns.
void encode_cost_j2(EncodingContext& ctx, const qts::CapacityMatrix& station_quality,
                    const std::vector<qts::ValueMatrix>& neighbor_quality,
                    double weight);

// Recursive Boolean encoding; returns the satisfaction ref for f at a slot.
BoolRef encode_stl(EncodingContext& ctx, const logic::StlFormula& f, int slot);

// Spatial patterns over every slot of [first_slot, last_slot]; the top-level
// conjunction binary is constrained to 1.
BoolRef encode_spatel(EncodingContext& ctx, const qts::PatternSet& patterns,
                      int first_slot, int last_slot);

// Everything the per-agent problem needs, with neighbors as constants.
struct AgentProblemSpec {
  AgentModel dynamics;
  Eigen::Vector4d x0 = Eigen::Vector4d::Zero();
  int t0 = 0;
  int horizon = 5;   // H
  int deadline = 50; // T_f
  qts::Grid grid;
  qts::CapacityMatrix capacity;  // station quality doubles as cell capacity
  qts::PatternSet patterns;

  Eigen::Vector4d q_weight = Eigen::Vector4d::Zero();
  Eigen::Vector2d r_weight = Eigen::Vector2d::Ones();
  double lambda = 0.005;
  double alpha = 0.5;

  std::vector<logic::HalfPlane> goal;
  Eigen::Vector2d goal_center = Eigen::Vector2d::Zero();

  double d1 = 1.0, d2 = 1.0;
  logic::SeparationMode separation_mode = logic::SeparationMode::Disjunctive;

  std::vector<std::vector<Eigen::Vector2d>> neighbor_traj;  // [neighbor][slot]
  std::vector<qts::ValueMatrix> neighbor_quality;           // frozen at t0

  EncodeOptions opts;
};

struct AgentProblem {
  EncodingContext ctx;
  BoolRef separation_ok = BoolRef::truth();
  BoolRef patterns_ok = BoolRef::truth();
  BoolRef goal_ok = BoolRef::truth();
  bool goal_hard = false;
};

// Composes all encodings; objective alpha*J1 + (1-alpha)*J2; separation and
// pattern constraints hard; the goal eventuality turns hard once the deadline
// enters the window (soft via the goal-gap cost before that).
AgentProblem assemble_agent_problem(const AgentProblemSpec& spec,
                                    bool include_hard_goal = true);

}  // namespace camp::encoder
