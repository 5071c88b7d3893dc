#include "camp/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace camp::encoder {

using logic::StlFormula;
using logic::TsslFormula;
using milp::Sense;
using milp::Term;
using milp::VarKind;

bool controllable(const AgentModel& am) {
  Eigen::Matrix<double, 4, 8> ctrb;
  Eigen::Matrix<double, 4, 2> col = am.B;
  for (int k = 0; k < 4; ++k) {
    ctrb.block<4, 2>(0, 2 * k) = col;
    col = am.A * col;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 4, 8>> lu(ctrb);
  lu.setThreshold(1e-9);
  return lu.rank() == 4;
}

AffineExpr EncodingContext::dim_expr(int dim, int slot) const {
  AffineExpr e;
  if (dim < 4) {
    e.terms.push_back(
        {x[static_cast<std::size_t>(slot)][static_cast<std::size_t>(dim)], 1.0});
    return e;
  }
  const int j = (dim - 4) / 2;
  const int axis = (dim - 4) % 2;
  const auto& slots = neighbor_pos[static_cast<std::size_t>(slot)];
  if (j >= static_cast<int>(slots.size()))
    throw std::invalid_argument("formula references neighbor " + std::to_string(j) +
                                " but only " + std::to_string(slots.size()) +
                                " are bound");
  e.constant = slots[static_cast<std::size_t>(j)][axis];
  return e;
}

std::pair<double, double> EncodingContext::expr_range(const AffineExpr& e) const {
  double lo = e.constant, hi = e.constant;
  for (const auto& t : e.terms) {
    const double l = model.lower(t.var), u = model.upper(t.var);
    if (t.coef >= 0) {
      lo += t.coef * l;
      hi += t.coef * u;
    } else {
      lo += t.coef * u;
      hi += t.coef * l;
    }
  }
  return {lo, hi};
}

int EncodingContext::new_binary(const char* tag) {
  return model.add_var(VarKind::Binary, 0, 1,
                       std::string(tag) + std::to_string(binary_count_++));
}

BoolRef EncodingContext::negate(BoolRef ref) {
  if (ref.is_const()) return ref.constant ? BoolRef::falsity() : BoolRef::truth();
  const int z = new_binary("znot");
  model.add_constraint({{z, 1.0}, {ref.var, 1.0}}, Sense::Eq, 1.0);
  return BoolRef::of(z);
}

BoolRef EncodingContext::make_and(const std::vector<BoolRef>& parts) {
  std::vector<int> vars;
  for (const auto& p : parts) {
    if (p.is_const()) {
      if (!p.constant) return BoolRef::falsity();
    } else {
      vars.push_back(p.var);
    }
  }
  if (vars.empty()) return BoolRef::truth();
  if (vars.size() == 1) return BoolRef::of(vars.front());
  const int z = new_binary("zand");
  std::vector<Term> sum{{z, -1.0}};
  for (int v : vars) {
    model.add_constraint({{z, 1.0}, {v, -1.0}}, Sense::Le, 0.0);  // z <= z_i
    sum.push_back({v, 1.0});
  }
  // z >= sum z_i - (n-1)
  model.add_constraint(std::move(sum), Sense::Le,
                       static_cast<double>(vars.size()) - 1.0);
  return BoolRef::of(z);
}

BoolRef EncodingContext::make_or(const std::vector<BoolRef>& parts) {
  std::vector<int> vars;
  for (const auto& p : parts) {
    if (p.is_const()) {
      if (p.constant) return BoolRef::truth();
    } else {
      vars.push_back(p.var);
    }
  }
  if (vars.empty()) return BoolRef::falsity();
  if (vars.size() == 1) return BoolRef::of(vars.front());
  const int z = new_binary("zor");
  std::vector<Term> sum{{z, 1.0}};
  for (int v : vars) {
    model.add_constraint({{z, -1.0}, {v, 1.0}}, Sense::Le, 0.0);  // z >= z_i
    sum.push_back({v, -1.0});
  }
  // z <= sum z_i
  model.add_constraint(std::move(sum), Sense::Le, 0.0);
  return BoolRef::of(z);
}

BoolRef EncodingContext::encode_pred(const AffineExpr& value) {
  const double eps = opts.eps;
  if (value.terms.empty())
    return value.constant > 0.0 ? BoolRef::truth() : BoolRef::falsity();
  const auto [lo, hi] = expr_range(value);
  if (opts.fold_constants) {
    if (lo >= eps) return BoolRef::truth();
    if (hi <= -eps) return BoolRef::falsity();
  }
  const int z = new_binary("zp");
  // z=1 -> value >= eps (vacuous at z=0)
  {
    std::vector<Term> row = value.terms;
    const double m1 = eps - lo;
    row.push_back({z, -m1});
    model.add_constraint(std::move(row), Sense::Ge, eps - m1 - value.constant);
  }
  // z=0 -> value <= -eps (vacuous at z=1)
  {
    std::vector<Term> row = value.terms;
    const double m2 = hi + eps;
    row.push_back({z, -m2});
    model.add_constraint(std::move(row), Sense::Le, -eps - value.constant);
  }
  return BoolRef::of(z);
}

BoolRef EncodingContext::encode_cmp(const AffineExpr& value, logic::CmpSense sense,
                                    double d, double granularity) {
  // gap between d and the nearest excluded value on the complement side
  double gap = opts.eps;
  if (granularity > 0.0) {
    if (sense == logic::CmpSense::Leq)
      gap = (std::floor(d / granularity + 1e-9) + 1.0) * granularity - d;
    else
      gap = d - (std::ceil(d / granularity - 1e-9) - 1.0) * granularity;
  }
  const auto [lo, hi] = expr_range(value);
  const bool certain_true = sense == logic::CmpSense::Leq ? hi <= d : lo >= d;
  const bool certain_false =
      sense == logic::CmpSense::Leq ? lo >= d + gap - 1e-12 : hi <= d - gap + 1e-12;
  if (value.terms.empty() || opts.fold_constants) {
    if (certain_true) return BoolRef::truth();
    if (certain_false) return BoolRef::falsity();
    if (value.terms.empty()) return BoolRef::falsity();  // constant in the gap
  }
  const int z = new_binary("zc");
  if (sense == logic::CmpSense::Leq) {
    // z=1 -> value <= d; z=0 -> value >= d + gap
    {
      std::vector<Term> row = value.terms;
      row.push_back({z, hi - d});
      model.add_constraint(std::move(row), Sense::Le, hi - value.constant);
    }
    {
      std::vector<Term> row = value.terms;
      row.push_back({z, d + gap - lo});
      model.add_constraint(std::move(row), Sense::Ge, d + gap - value.constant);
    }
  } else {
    // z=1 -> value >= d; z=0 -> value <= d - gap
    {
      std::vector<Term> row = value.terms;
      row.push_back({z, lo - d});
      model.add_constraint(std::move(row), Sense::Ge, lo - value.constant);
    }
    {
      std::vector<Term> row = value.terms;
      row.push_back({z, d - gap - hi});
      model.add_constraint(std::move(row), Sense::Le, d - gap - value.constant);
    }
  }
  return BoolRef::of(z);
}

void EncodingContext::require_true(BoolRef ref) {
  if (ref.is_const()) {
    if (!ref.constant) model.add_constraint({}, Sense::Ge, 1.0);  // marks infeasible
    return;
  }
  model.set_bounds(ref.var, 1.0, 1.0);
}

// ---------------------------------------------------------------------------

EncodingContext encode_dynamics(const AgentModel& am, const Eigen::Vector4d& x0, int t0,
                                int H, const qts::Grid& grid,
                                const EncodeOptions& opts) {
  if (H < 1) throw std::invalid_argument("planning window needs at least one step");
  EncodingContext ctx;
  ctx.grid = grid;
  ctx.opts = opts;
  ctx.t0 = t0;
  ctx.steps = H;
  ctx.neighbor_pos.resize(static_cast<std::size_t>(H));
  ctx.neighbor_occ.assign(
      static_cast<std::size_t>(H),
      qts::Occupancy::Zero(grid.cells_per_side(), grid.cells_per_side()));

  // the polygon circumradius bounds the reachable speeds
  const double vbound = am.v_max / std::cos(std::numbers::pi / opts.polygon_sides);
  const double x_lo = grid.origin.x(), x_hi = grid.origin.x() + grid.side;
  const double y_lo = grid.origin.y(), y_hi = grid.origin.y() + grid.side;

  for (int t = 0; t < H; ++t) {
    std::array<int, 4> xv{};
    const std::string base = "x" + std::to_string(t0 + t) + "_";
    xv[0] = ctx.model.add_var(VarKind::Continuous, x_lo, x_hi, base + "p1");
    xv[1] = ctx.model.add_var(VarKind::Continuous, y_lo, y_hi, base + "p2");
    xv[2] = ctx.model.add_var(VarKind::Continuous, -vbound, vbound, base + "v1");
    xv[3] = ctx.model.add_var(VarKind::Continuous, -vbound, vbound, base + "v2");
    ctx.x.push_back(xv);
  }
  for (int j = 0; j < 4; ++j)
    ctx.model.set_bounds(ctx.x[0][static_cast<std::size_t>(j)], x0[j], x0[j]);

  for (int t = 0; t + 1 < H; ++t) {
    std::array<int, 2> uv{};
    const std::string base = "u" + std::to_string(t0 + t) + "_";
    uv[0] = ctx.model.add_var(VarKind::Continuous, -am.u_max, am.u_max, base + "1");
    uv[1] = ctx.model.add_var(VarKind::Continuous, -am.u_max, am.u_max, base + "2");
    ctx.u.push_back(uv);
  }

  for (int t = 0; t + 1 < H; ++t) {
    for (int i = 0; i < 4; ++i) {
      std::vector<Term> row{
          {ctx.x[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)], 1.0}};
      for (int j = 0; j < 4; ++j)
        if (am.A(i, j) != 0.0)
          row.push_back(
              {ctx.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)],
               -am.A(i, j)});
      for (int j = 0; j < 2; ++j)
        if (am.B(i, j) != 0.0)
          row.push_back(
              {ctx.u[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)],
               -am.B(i, j)});
      ctx.model.add_constraint(std::move(row), Sense::Eq, 0.0);
    }
  }
  return ctx;
}

void encode_velocity_polygon(EncodingContext& ctx, const AgentModel& am, int sides) {
  if (sides < 3) throw std::invalid_argument("velocity polygon needs at least 3 sides");
  for (int t = 0; t < ctx.steps; ++t) {
    for (int l = 1; l <= sides; ++l) {
      const double ang = 2.0 * std::numbers::pi * l / sides;
      ctx.model.add_constraint({{ctx.x[static_cast<std::size_t>(t)][2], std::sin(ang)},
                                {ctx.x[static_cast<std::size_t>(t)][3], std::cos(ang)}},
                               Sense::Le, am.v_max);
    }
  }
}

void encode_cost_j1(EncodingContext& ctx, const Eigen::Vector4d& q,
                    const Eigen::Vector2d& r, double lambda, int current_step,
                    const Eigen::Vector2d& goal_center, double weight) {
  if ((q.array() < 0).any() || (r.array() < 0).any() || lambda < 0)
    throw std::invalid_argument("cost weights must be nonnegative");
  ctx.state_abs.assign(static_cast<std::size_t>(ctx.steps), {-1, -1, -1, -1});
  ctx.input_abs.assign(ctx.u.size(), {-1, -1});
  ctx.goal_gap.assign(static_cast<std::size_t>(ctx.steps), {-1, -1});

  const double h =
      lambda * static_cast<double>(current_step) * static_cast<double>(current_step);

  if (weight * q.cwiseAbs().maxCoeff() > 0.0) {
    for (int t = 0; t < ctx.steps; ++t) {
      for (int j = 0; j < 4; ++j) {
        if (q[j] == 0.0) continue;
        const int xv = ctx.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        const double bound =
            std::max(std::abs(ctx.model.lower(xv)), std::abs(ctx.model.upper(xv)));
        const int a = ctx.model.add_var(
            VarKind::Continuous, 0, bound,
            "abs_x" + std::to_string(ctx.t0 + t) + "_" + std::to_string(j));
        ctx.state_abs[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = a;
        ctx.model.add_constraint({{xv, 1.0}, {a, -1.0}}, Sense::Le, 0.0);
        ctx.model.add_constraint({{xv, -1.0}, {a, -1.0}}, Sense::Le, 0.0);
        ctx.model.add_objective_term(a, weight * q[j]);
      }
    }
  }
  if (weight * r.cwiseAbs().maxCoeff() > 0.0) {
    for (std::size_t t = 0; t < ctx.u.size(); ++t) {
      for (int j = 0; j < 2; ++j) {
        if (r[j] == 0.0) continue;
        const int uv = ctx.u[t][static_cast<std::size_t>(j)];
        const int a = ctx.model.add_var(
            VarKind::Continuous, 0, ctx.model.upper(uv),
            "abs_u" + std::to_string(ctx.t0 + static_cast<int>(t)) + "_" +
                std::to_string(j));
        ctx.input_abs[t][static_cast<std::size_t>(j)] = a;
        ctx.model.add_constraint({{uv, 1.0}, {a, -1.0}}, Sense::Le, 0.0);
        ctx.model.add_constraint({{uv, -1.0}, {a, -1.0}}, Sense::Le, 0.0);
        ctx.model.add_objective_term(a, weight * r[j]);
      }
    }
  }
  if (weight * h > 0.0) {
    for (int t = 0; t < ctx.steps; ++t) {
      for (int j = 0; j < 2; ++j) {
        const int pv = ctx.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        const int g = ctx.model.add_var(
            VarKind::Continuous, 0, 2.0 * ctx.grid.side,
            "gap" + std::to_string(ctx.t0 + t) + "_" + std::to_string(j));
        ctx.goal_gap[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = g;
        ctx.model.add_constraint({{pv, 1.0}, {g, -1.0}}, Sense::Le, goal_center[j]);
        ctx.model.add_constraint({{pv, -1.0}, {g, -1.0}}, Sense::Le, -goal_center[j]);
        ctx.model.add_objective_term(g, weight * h);
      }
    }
  }
}

void encode_occupancy(EncodingContext& ctx) {
  const int s = ctx.grid.cells_per_side();
  const double eps = ctx.opts.eps;
  ctx.occ.assign(static_cast<std::size_t>(ctx.steps), {});
  for (int t = 0; t < ctx.steps; ++t) {
    auto& slot = ctx.occ[static_cast<std::size_t>(t)];
    slot.reserve(static_cast<std::size_t>(s * s));
    std::vector<Term> sum;
    for (int m = 0; m < s; ++m)
      for (int n = 0; n < s; ++n) {
        const int o =
            ctx.model.add_var(VarKind::Binary, 0, 1,
                              "o" + std::to_string(ctx.t0 + t) + "_" +
                                  std::to_string(m) + "_" + std::to_string(n));
        slot.push_back(o);
        sum.push_back({o, 1.0});
      }
    ctx.model.add_constraint(std::move(sum), Sense::Eq, 1.0);

    const int p1 = ctx.x[static_cast<std::size_t>(t)][0];
    const int p2 = ctx.x[static_cast<std::size_t>(t)][1];
    if (ctx.opts.per_cell_bigm_linking) {
      const double M = ctx.grid.side;
      for (int m = 0; m < s; ++m)
        for (int n = 0; n < s; ++n) {
          const int o = ctx.occ_var(t, m, n);
          // p1 >= west - M(1-o);  p1 <= east - eps + M(1-o);  same for p2
          ctx.model.add_constraint({{p1, -1.0}, {o, M}}, Sense::Le,
                                   M - ctx.grid.west(n));
          ctx.model.add_constraint({{p1, 1.0}, {o, M}}, Sense::Le,
                                   ctx.grid.east(n) - eps + M);
          ctx.model.add_constraint({{p2, -1.0}, {o, M}}, Sense::Le,
                                   M - ctx.grid.south(m) - eps);
          ctx.model.add_constraint({{p2, 1.0}, {o, M}}, Sense::Le,
                                   ctx.grid.north(m) + M);
        }
    } else {
      // aggregated linking: the position lies in the box picked by the single
      // active occupancy binary
      std::vector<Term> west{{p1, 1.0}}, east{{p1, 1.0}};
      std::vector<Term> south{{p2, 1.0}}, north{{p2, 1.0}};
      for (int m = 0; m < s; ++m)
        for (int n = 0; n < s; ++n) {
          const int o = ctx.occ_var(t, m, n);
          west.push_back({o, -ctx.grid.west(n)});
          east.push_back({o, -(ctx.grid.east(n) - eps)});
          south.push_back({o, -(ctx.grid.south(m) + eps)});
          north.push_back({o, -ctx.grid.north(m)});
        }
      ctx.model.add_constraint(std::move(west), Sense::Ge, 0.0);
      ctx.model.add_constraint(std::move(east), Sense::Le, 0.0);
      ctx.model.add_constraint(std::move(south), Sense::Ge, 0.0);
      ctx.model.add_constraint(std::move(north), Sense::Le, 0.0);
    }
  }
}

void encode_cost_j2(EncodingContext& ctx, const qts::CapacityMatrix& station_quality,
                    const std::vector<qts::ValueMatrix>& neighbor_quality,
                    double weight) {
  if (ctx.occ.empty()) throw std::logic_error("occupancy binaries must exist first");
  const int s = ctx.grid.cells_per_side();
  if (station_quality.rows() != s || station_quality.cols() != s)
    throw std::invalid_argument("quality matrix does not match the grid");
  if (weight == 0.0) return;
  qts::ValueMatrix total = station_quality.cast<double>();
  for (const auto& nq : neighbor_quality) {
    if (nq.rows() != s || nq.cols() != s)
      throw std::invalid_argument("neighbor quality matrix does not match the grid");
    total += nq;
  }
  for (int t = 0; t < ctx.steps; ++t)
    for (int m = 0; m < s; ++m)
      for (int n = 0; n < s; ++n)
        if (total(m, n) != 0.0)
          ctx.model.add_objective_term(ctx.occ_var(t, m, n), -weight * total(m, n));
}

// ---------------------------------------------------------------------------
// Formula encodings
// ---------------------------------------------------------------------------

namespace {

AffineExpr pred_expr(const EncodingContext& ctx, const logic::Predicate& p, int slot) {
  AffineExpr e;
  e.constant = p.offset;
  for (std::size_t d = 0; d < p.coeffs.size(); ++d) {
    if (p.coeffs[d] == 0.0) continue;
    AffineExpr dim = ctx.dim_expr(static_cast<int>(d), slot);
    e.constant += p.coeffs[d] * dim.constant;
    for (const auto& t : dim.terms) e.terms.push_back({t.var, p.coeffs[d] * t.coef});
  }
  return e;
}

struct TsslEncoder {
  EncodingContext& ctx;
  int slot;

  // mean of (occupancy + neighbor constant) over the covered cells
  AffineExpr region_mu(int r0, int c0, int span) const {
    AffineExpr e;
    const double w = 1.0 / (static_cast<double>(span) * span);
    const auto& counts = ctx.neighbor_occ[static_cast<std::size_t>(slot)];
    for (int m = r0; m < r0 + span; ++m)
      for (int n = c0; n < c0 + span; ++n) {
        e.terms.push_back({ctx.occ_var(slot, m, n), w});
        e.constant += w * counts(m, n);
      }
    return e;
  }

  BoolRef encode(const TsslFormula& f, int r0, int c0, int span) const {
    using K = TsslFormula::Kind;
    switch (f.kind) {
      case K::True:
        return BoolRef::truth();
      case K::ValCmp:
        return ctx.encode_cmp(region_mu(r0, c0, span), f.sense, f.threshold,
                              1.0 / (static_cast<double>(span) * span));
      case K::Not:
        return ctx.negate(encode(f.children.front(), r0, c0, span));
      case K::And: {
        std::vector<BoolRef> parts;
        parts.reserve(f.children.size());
        for (const auto& c : f.children) parts.push_back(encode(c, r0, c0, span));
        return ctx.make_and(parts);
      }
      case K::Or: {
        std::vector<BoolRef> parts;
        parts.reserve(f.children.size());
        for (const auto& c : f.children) parts.push_back(encode(c, r0, c0, span));
        return ctx.make_or(parts);
      }
      case K::ForAllNext:
      case K::ExistsNext: {
        if (span == 1)  // leaf self-loop
          return encode(f.children.front(), r0, c0, span);
        const int half = span / 2;
        const std::array<std::pair<int, int>, 4> corner = {
            std::pair{r0, c0}, {r0, c0 + half}, {r0 + half, c0},
            {r0 + half, c0 + half}};
        std::vector<BoolRef> parts;
        for (int l = 0; l < 4; ++l) {
          if (!(f.labels & (1u << l))) continue;
          parts.push_back(encode(f.children.front(),
                                 corner[static_cast<std::size_t>(l)].first,
                                 corner[static_cast<std::size_t>(l)].second, half));
        }
        return f.kind == K::ForAllNext ? ctx.make_and(parts) : ctx.make_or(parts);
      }
    }
    return BoolRef::falsity();
  }
};

}  // namespace

BoolRef encode_stl(EncodingContext& ctx, const StlFormula& f, int slot) {
  using K = StlFormula::Kind;
  if (slot < 0 || slot + logic::horizon(f) >= ctx.steps)
    throw std::invalid_argument("formula window exceeds the encoded horizon");
  switch (f.kind) {
    case K::True:
      return BoolRef::truth();
    case K::Pred:
      return ctx.encode_pred(pred_expr(ctx, f.pred, slot));
    case K::Not:
      return ctx.negate(encode_stl(ctx, f.children.front(), slot));
    case K::And: {
      std::vector<BoolRef> parts;
      for (const auto& c : f.children) parts.push_back(encode_stl(ctx, c, slot));
      return ctx.make_and(parts);
    }
    case K::Or: {
      std::vector<BoolRef> parts;
      for (const auto& c : f.children) parts.push_back(encode_stl(ctx, c, slot));
      return ctx.make_or(parts);
    }
    case K::Always: {
      std::vector<BoolRef> parts;
      for (int t = slot + f.a; t <= slot + f.b; ++t)
        parts.push_back(encode_stl(ctx, f.children.front(), t));
      return ctx.make_and(parts);
    }
    case K::Eventually: {
      std::vector<BoolRef> parts;
      for (int t = slot + f.a; t <= slot + f.b; ++t)
        parts.push_back(encode_stl(ctx, f.children.front(), t));
      return ctx.make_or(parts);
    }
    case K::Until: {
      // exists t' in the window: rhs at t' and lhs from slot..t'
      std::vector<BoolRef> lhs_prefix;
      for (int t = slot; t <= slot + f.b; ++t)
        lhs_prefix.push_back(encode_stl(ctx, f.children[0], t));
      std::vector<BoolRef> witnesses;
      for (int t = slot + f.a; t <= slot + f.b; ++t) {
        std::vector<BoolRef> conj(lhs_prefix.begin(),
                                  lhs_prefix.begin() + (t - slot) + 1);
        conj.push_back(encode_stl(ctx, f.children[1], t));
        witnesses.push_back(ctx.make_and(conj));
      }
      return ctx.make_or(witnesses);
    }
    case K::SpatialAtom: {
      if (ctx.occ.empty())
        throw std::logic_error("occupancy binaries must exist before spatial atoms");
      TsslEncoder enc{ctx, slot};
      return enc.encode(f.spatial, 0, 0, ctx.grid.cells_per_side());
    }
  }
  return BoolRef::falsity();
}

BoolRef encode_spatel(EncodingContext& ctx, const qts::PatternSet& patterns,
                      int first_slot, int last_slot) {
  if (ctx.occ.empty())
    throw std::logic_error("occupancy binaries must exist before pattern encoding");
  if (first_slot > last_slot || last_slot >= ctx.steps)
    throw std::invalid_argument("empty or out-of-range pattern window");

  std::vector<BoolRef> obstacle_steps, capacity_steps;
  for (int t = first_slot; t <= last_slot; ++t) {
    TsslEncoder enc{ctx, t};
    const int s = ctx.grid.cells_per_side();
    obstacle_steps.push_back(enc.encode(patterns.obstacle_free, 0, 0, s));
    std::vector<BoolRef> per_quadrant;
    for (const auto& psi : patterns.quadrant)
      per_quadrant.push_back(enc.encode(psi, 0, 0, s));
    capacity_steps.push_back(ctx.make_and(per_quadrant));
  }
  const BoolRef safe = ctx.make_and(obstacle_steps);
  const BoolRef capped = ctx.make_and(capacity_steps);
  const BoolRef top = ctx.make_and({safe, capped});
  ctx.require_true(top);
  return top;
}

// ---------------------------------------------------------------------------

AgentProblem assemble_agent_problem(const AgentProblemSpec& spec,
                                    bool include_hard_goal) {
  const int remaining = spec.deadline - spec.t0 + 1;
  if (remaining < 1) throw std::invalid_argument("window starts past the deadline");
  const int window = std::min(spec.horizon, remaining);

  AgentProblem out;
  out.ctx =
      encode_dynamics(spec.dynamics, spec.x0, spec.t0, window, spec.grid, spec.opts);
  EncodingContext& ctx = out.ctx;

  for (const auto& traj : spec.neighbor_traj)
    if (static_cast<int>(traj.size()) < window)
      throw std::invalid_argument("neighbor trajectory shorter than the window");
  for (int t = 0; t < window; ++t) {
    std::vector<Eigen::Vector2d> positions;
    positions.reserve(spec.neighbor_traj.size());
    for (const auto& traj : spec.neighbor_traj)
      positions.push_back(traj[static_cast<std::size_t>(t)]);
    ctx.neighbor_occ[static_cast<std::size_t>(t)] =
        qts::occupancy_counts(positions, spec.grid);
    ctx.neighbor_pos[static_cast<std::size_t>(t)] = std::move(positions);
  }

  encode_velocity_polygon(ctx, spec.dynamics, spec.opts.polygon_sides);
  encode_cost_j1(ctx, spec.q_weight, spec.r_weight, spec.lambda, spec.t0,
                 spec.goal_center, spec.alpha);
  encode_occupancy(ctx);
  encode_cost_j2(ctx, spec.capacity, spec.neighbor_quality, 1.0 - spec.alpha);

  if (!spec.neighbor_traj.empty()) {
    const StlFormula sep = logic::build_separation_formula(
        spec.d1, spec.d2, spec.separation_mode,
        static_cast<int>(spec.neighbor_traj.size()), window - 1);
    out.separation_ok = encode_stl(ctx, sep, 0);
    ctx.require_true(out.separation_ok);
  }

  out.patterns_ok = encode_spatel(ctx, spec.patterns, 0, window - 1);

  if (include_hard_goal && spec.t0 + window - 1 >= spec.deadline) {
    const StlFormula goal = logic::build_goal_formula(spec.goal, spec.deadline - spec.t0);
    out.goal_ok = encode_stl(ctx, goal, 0);
    ctx.require_true(out.goal_ok);
    out.goal_hard = true;
  }
  return out;
}

}  // namespace camp::encoder
