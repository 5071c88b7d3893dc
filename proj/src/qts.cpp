#include "camp/qts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace camp::qts {

using logic::TsslFormula;

CellIndex cell_of(const Eigen::Vector2d& p, const Grid& g) {
  const int s = g.cells_per_side();
  const double cs = g.cell_side();
  int n = static_cast<int>(std::floor((p.x() - g.origin.x()) / cs));
  int m = static_cast<int>(std::floor((g.origin.y() + g.side - p.y()) / cs));
  n = std::clamp(n, 0, s - 1);
  m = std::clamp(m, 0, s - 1);
  return {m, n};
}

namespace {

int build_rec(const ValueMatrix& values, std::vector<QtsNode>& nodes, int r0, int c0,
              int span) {
  const int idx = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (span == 1) {
    nodes[idx].m = r0;
    nodes[idx].n = c0;
    nodes[idx].mu = values(r0, c0);
    return idx;
  }
  const int half = span / 2;
  // child order NW, NE, SW, SE
  const int nw = build_rec(values, nodes, r0, c0, half);
  const int ne = build_rec(values, nodes, r0, c0 + half, half);
  const int sw = build_rec(values, nodes, r0 + half, c0, half);
  const int se = build_rec(values, nodes, r0 + half, c0 + half, half);
  nodes[idx].child = {nw, ne, sw, se};
  nodes[idx].mu =
      0.25 * (nodes[nw].mu + nodes[ne].mu + nodes[sw].mu + nodes[se].mu);
  return idx;
}

}  // namespace

Qts build_qts(const ValueMatrix& values) {
  const int s = static_cast<int>(values.rows());
  if (s < 1 || values.cols() != s || (s & (s - 1)) != 0)
    throw std::invalid_argument("quadtree input must be square with power-of-two side");
  Qts q;
  q.depth = 0;
  while ((1 << q.depth) < s) ++q.depth;
  q.nodes.reserve(static_cast<std::size_t>(((4 * s * s) - 1) / 3));
  build_rec(values, q.nodes, 0, 0, s);
  return q;
}

Qts build_qts(const Occupancy& counts) { return build_qts(counts.cast<double>().eval()); }

Occupancy occupancy_counts(std::span<const Eigen::Vector2d> positions, const Grid& g) {
  Occupancy counts = Occupancy::Zero(g.cells_per_side(), g.cells_per_side());
  for (const auto& p : positions) {
    const CellIndex c = cell_of(p, g);
    counts(c.m, c.n) += 1;
  }
  return counts;
}

bool eval_tssl(const TsslFormula& f, const Qts& q, int node) {
  using K = TsslFormula::Kind;
  const QtsNode& v = q.nodes[static_cast<std::size_t>(node)];
  switch (f.kind) {
    case K::True:
      return true;
    case K::ValCmp:
      return f.sense == logic::CmpSense::Leq ? v.mu <= f.threshold
                                             : v.mu >= f.threshold;
    case K::Not:
      return !eval_tssl(f.children.front(), q, node);
    case K::And:
      for (const auto& c : f.children)
        if (!eval_tssl(c, q, node)) return false;
      return true;
    case K::Or:
      for (const auto& c : f.children)
        if (eval_tssl(c, q, node)) return true;
      return false;
    case K::ForAllNext: {
      if (v.is_leaf()) return eval_tssl(f.children.front(), q, node);  // leaf self-loop
      for (int l = 0; l < 4; ++l) {
        if (!(f.labels & (1u << l))) continue;
        if (!eval_tssl(f.children.front(), q, v.child[static_cast<std::size_t>(l)]))
          return false;
      }
      return true;
    }
    case K::ExistsNext: {
      if (v.is_leaf()) return eval_tssl(f.children.front(), q, node);
      for (int l = 0; l < 4; ++l) {
        if (!(f.labels & (1u << l))) continue;
        if (eval_tssl(f.children.front(), q, v.child[static_cast<std::size_t>(l)]))
          return true;
      }
      return false;
    }
  }
  return false;
}

namespace {

bool eval_spatel_rec(const logic::StlFormula& f, const QtsTrace& trace, int k) {
  using K = logic::StlFormula::Kind;
  switch (f.kind) {
    case K::True:
      return true;
    case K::SpatialAtom:
      return eval_tssl(f.spatial, trace[static_cast<std::size_t>(k)], 0);
    case K::Pred:
      throw std::invalid_argument("numeric predicates are not defined on quadtree traces");
    case K::Not:
      return !eval_spatel_rec(f.children.front(), trace, k);
    case K::And:
      for (const auto& c : f.children)
        if (!eval_spatel_rec(c, trace, k)) return false;
      return true;
    case K::Or:
      for (const auto& c : f.children)
        if (eval_spatel_rec(c, trace, k)) return true;
      return false;
    case K::Always:
      for (int t = k + f.a; t <= k + f.b; ++t)
        if (!eval_spatel_rec(f.children.front(), trace, t)) return false;
      return true;
    case K::Eventually:
      for (int t = k + f.a; t <= k + f.b; ++t)
        if (eval_spatel_rec(f.children.front(), trace, t)) return true;
      return false;
    case K::Until:
      for (int t = k + f.a; t <= k + f.b; ++t) {
        if (!eval_spatel_rec(f.children[1], trace, t)) continue;
        bool lhs_ok = true;
        for (int t2 = k; t2 <= t; ++t2) {
          if (!eval_spatel_rec(f.children[0], trace, t2)) {
            lhs_ok = false;
            break;
          }
        }
        if (lhs_ok) return true;
      }
      return false;
  }
  return false;
}

}  // namespace

bool eval_spatel(const logic::StlFormula& f, const QtsTrace& trace, int k) {
  if (k < 0) throw std::out_of_range("negative start step");
  const int h = logic::horizon(f);
  if (static_cast<std::size_t>(k + h) >= trace.size())
    throw std::out_of_range("trace too short for the formula horizon (need " +
                            std::to_string(k + h + 1) + " snapshots, have " +
                            std::to_string(trace.size()) + ")");
  return eval_spatel_rec(f, trace, k);
}

// ---------------------------------------------------------------------------
// Pattern generation
// ---------------------------------------------------------------------------

namespace {

// Builds the forall-next chain tree for one leaf predicate family, merging
// sibling branches with structurally equal subformulas into shared label sets.
// `leaf_formula` returns True for leaves the family does not constrain.
template <typename LeafFn>
TsslFormula chain_rec(const CapacityMatrix& cap, int r0, int c0, int span,
                      const LeafFn& leaf_formula) {
  if (span == 1) return leaf_formula(r0, c0);
  const int half = span / 2;
  const std::array<TsslFormula, 4> kids = {
      chain_rec(cap, r0, c0, half, leaf_formula),
      chain_rec(cap, r0, c0 + half, half, leaf_formula),
      chain_rec(cap, r0 + half, c0, half, leaf_formula),
      chain_rec(cap, r0 + half, c0 + half, half, leaf_formula),
  };
  std::vector<TsslFormula> conjuncts;
  std::array<bool, 4> used{false, false, false, false};
  for (int l = 0; l < 4; ++l) {
    if (used[static_cast<std::size_t>(l)]) continue;
    if (kids[static_cast<std::size_t>(l)].kind == TsslFormula::Kind::True) continue;
    logic::LabelSet labels = 1u << l;
    for (int l2 = l + 1; l2 < 4; ++l2) {
      if (kids[static_cast<std::size_t>(l2)] == kids[static_cast<std::size_t>(l)]) {
        labels |= 1u << l2;
        used[static_cast<std::size_t>(l2)] = true;
      }
    }
    conjuncts.push_back(
        TsslFormula::forall_next(labels, kids[static_cast<std::size_t>(l)]));
  }
  if (conjuncts.empty()) return TsslFormula::truth();
  if (conjuncts.size() == 1) return std::move(conjuncts.front());
  return TsslFormula::conj(std::move(conjuncts));
}

}  // namespace

PatternSet generate_patterns(const CapacityMatrix& cap) {
  const int s = static_cast<int>(cap.rows());
  if (s < 2 || cap.cols() != s || (s & (s - 1)) != 0)
    throw std::invalid_argument("capacity matrix must be square with side 2^D, D >= 1");
  if ((cap.array() < 0).any())
    throw std::invalid_argument("capacities must be nonnegative");

  PatternSet out;
  out.obstacle_free = chain_rec(cap, 0, 0, s, [&](int m, int n) {
    // empty-cell requirement realized as (mu <= 0); valuations are nonnegative
    return cap(m, n) == 0 ? TsslFormula::cmp(logic::CmpSense::Leq, 0.0)
                          : TsslFormula::truth();
  });

  const int half = s / 2;
  const std::array<std::pair<int, int>, 4> corner = {
      std::pair{0, 0}, {0, half}, {half, 0}, {half, half}};
  for (int qd = 0; qd < 4; ++qd) {
    auto [r0, c0] = corner[static_cast<std::size_t>(qd)];
    TsslFormula sub = chain_rec(cap, r0, c0, half, [&](int m, int n) {
      return cap(m, n) > 0
                 ? TsslFormula::cmp(logic::CmpSense::Leq, static_cast<double>(cap(m, n)))
                 : TsslFormula::truth();
    });
    out.quadrant[static_cast<std::size_t>(qd)] =
        sub.kind == TsslFormula::Kind::True
            ? TsslFormula::truth()
            : TsslFormula::forall_next(1u << qd, std::move(sub));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Communication-quality matrices
// ---------------------------------------------------------------------------

namespace {

double path_loss_level(double d, double d0, double d_cut, int q_max) {
  const double dd = std::max(d, d0);
  const double level =
      q_max * (1.0 - std::log10(dd / d0) / std::log10(d_cut / d0));
  return std::max(level, 0.0);
}

// True when the open segment (a, b) passes through the interior of the
// axis-aligned box [x0,x1] x [y0,y1] (parametric slab clipping).
bool segment_hits_box(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double x0,
                      double x1, double y0, double y1) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector2d d = b - a;
  for (int axis = 0; axis < 2; ++axis) {
    const double p = a[axis];
    const double dp = d[axis];
    const double lo = axis == 0 ? x0 : y0;
    const double hi = axis == 0 ? x1 : y1;
    if (std::abs(dp) < 1e-12) {
      if (p <= lo || p >= hi) return false;
    } else {
      double ta = (lo - p) / dp;
      double tb = (hi - p) / dp;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 >= t1) return false;
    }
  }
  return t1 > t0;
}

}  // namespace

CapacityMatrix base_station_matrix(std::span<const Eigen::Vector2d> stations,
                                   std::span<const CellIndex> obstacles, const Grid& g,
                                   const RadioParams& params) {
  if (stations.empty()) throw std::invalid_argument("at least one station required");
  RadioParams p = params;
  if (p.d0 <= 0.0) p.d0 = g.cell_side();
  if (p.d_cut <= 0.0) p.d_cut = g.side;
  if (p.d_cut <= p.d0) throw std::invalid_argument("d_cut must exceed d0");

  const int s = g.cells_per_side();
  CapacityMatrix out(s, s);
  auto is_obstacle = [&](int m, int n) {
    return std::find(obstacles.begin(), obstacles.end(), CellIndex{m, n}) !=
           obstacles.end();
  };

  for (int m = 0; m < s; ++m) {
    for (int n = 0; n < s; ++n) {
      if (is_obstacle(m, n)) {
        out(m, n) = 0;
        continue;
      }
      const Eigen::Vector2d c = g.cell_center(m, n);
      double best = std::numeric_limits<double>::max();
      Eigen::Vector2d nearest = stations.front();
      for (const auto& st : stations) {
        const double d = (c - st).norm();
        if (d < best) {
          best = d;
          nearest = st;
        }
      }
      int q = static_cast<int>(std::lround(
          path_loss_level(best, p.d0, p.d_cut, p.q_max)));
      for (const auto& ob : obstacles) {
        if (ob.m == m && ob.n == n) continue;
        if (segment_hits_box(c, nearest, g.west(ob.n), g.east(ob.n), g.south(ob.m),
                             g.north(ob.m))) {
          q -= p.shadow_penalty;
          break;
        }
      }
      out(m, n) = std::clamp(q, 0, p.q_max);
    }
  }
  return out;
}

ValueMatrix agent_comm_matrix(const Eigen::Vector2d& neighbor_pos, const Grid& g,
                              const RadioParams& params) {
  RadioParams p = params;
  if (p.d0 <= 0.0) p.d0 = g.cell_side();
  if (p.d_cut <= 0.0) p.d_cut = g.side;
  if (p.d_cut <= p.d0) throw std::invalid_argument("d_cut must exceed d0");

  const int s = g.cells_per_side();
  ValueMatrix out(s, s);
  for (int m = 0; m < s; ++m)
    for (int n = 0; n < s; ++n)
      out(m, n) = path_loss_level((g.cell_center(m, n) - neighbor_pos).norm(), p.d0,
                                  p.d_cut, p.q_max);
  return out;
}

}  // namespace camp::qts
