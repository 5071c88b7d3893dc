#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <vector>

#include "camp/logic.hpp"

// Quad transition system over a gridded square workspace: tree construction,
// valuations, occupancy counting, communication-quality matrices, spatial and
// spatial-temporal evaluation, and pattern generation from a capacity matrix.
namespace camp::qts {

using CapacityMatrix = Eigen::MatrixXi;  // per-cell agent limits; 0 marks an obstacle
using ValueMatrix = Eigen::MatrixXd;
using Occupancy = Eigen::MatrixXi;

struct CellIndex {
  int m = 0;  // row, 0 = northernmost
  int n = 0;  // column, 0 = westernmost
  bool operator==(const CellIndex&) const = default;
};

// Square workspace split into 2^depth x 2^depth cells. `origin` is the
// south-west corner in world coordinates.
struct Grid {
  Eigen::Vector2d origin{0.0, 0.0};
  double side = 1.0;
  int depth = 1;

  int cells_per_side() const { return 1 << depth; }
  int cell_count() const { return cells_per_side() * cells_per_side(); }
  double cell_side() const { return side / cells_per_side(); }

  double west(int n) const { return origin.x() + n * cell_side(); }
  double east(int n) const { return origin.x() + (n + 1) * cell_side(); }
  double north(int m) const { return origin.y() + side - m * cell_side(); }
  double south(int m) const { return origin.y() + side - (m + 1) * cell_side(); }
  Eigen::Vector2d cell_center(int m, int n) const {
    return {0.5 * (west(n) + east(n)), 0.5 * (south(m) + north(m))};
  }
};

// Maps a position to its cell. Cells are half-open, [west, east) x (south,
// north], so interior boundary points map to exactly one cell; positions
// outside the workspace clamp to the nearest boundary cell.
CellIndex cell_of(const Eigen::Vector2d& p, const Grid& g);

// Complete quadtree; node 0 is the root, children ordered NW, NE, SW, SE.
struct QtsNode {
  double mu = 0.0;
  std::array<int, 4> child{-1, -1, -1, -1};
  int m = -1, n = -1;  // leaf cell, -1 on internal nodes
  bool is_leaf() const { return child[0] < 0; }
};

struct Qts {
  int depth = 0;
  std::vector<QtsNode> nodes;
  const QtsNode& root() const { return nodes.front(); }
};

// Snapshots share the tree shape; only valuations vary over time.
using QtsTrace = std::vector<Qts>;

// Leaves take the matrix entries (quadrant recursion from the north-west);
// each internal valuation is the mean of its four children.
Qts build_qts(const ValueMatrix& values);
Qts build_qts(const Occupancy& counts);

Occupancy occupancy_counts(std::span<const Eigen::Vector2d> positions, const Grid& g);

bool eval_tssl(const logic::TsslFormula& f, const Qts& q, int node = 0);

// Temporal semantics over a trace; spatial atoms evaluate at the root of the
// step's snapshot. Requires k + horizon(f) < trace.size().
bool eval_spatel(const logic::StlFormula& f, const QtsTrace& trace, int k);

// Generated spatial patterns: `obstacle_free` keeps obstacle cells empty;
// `quadrant[q]` caps every non-obstacle cell of quadrant q at its capacity.
struct PatternSet {
  logic::TsslFormula obstacle_free;               // psi_1
  std::array<logic::TsslFormula, 4> quadrant;     // psi_2..psi_5 (NW, NE, SW, SE)

  std::vector<logic::TsslFormula> all() const {
    return {obstacle_free, quadrant[0], quadrant[1], quadrant[2], quadrant[3]};
  }
  logic::TsslFormula conjunction() const { return logic::TsslFormula::conj(all()); }
};

PatternSet generate_patterns(const CapacityMatrix& cap);

// Discretized log-distance path loss with a fixed shadowing penalty.
struct RadioParams {
  int q_max = 6;
  double d0 = 0.0;     // reference distance; defaults to one cell side
  double d_cut = 0.0;  // cutoff distance; defaults to the workspace side
  int shadow_penalty = 2;
};

// Quality level per cell from the nearest station, shadow-penalized when the
// line of sight to it crosses an obstacle cell; obstacle cells get 0.
CapacityMatrix base_station_matrix(std::span<const Eigen::Vector2d> stations,
                                   std::span<const CellIndex> obstacles, const Grid& g,
                                   const RadioParams& params);

// Inter-agent quality pattern around a neighbor position: pure path loss,
// q_max * max(0, 1 - log10(max(d, d0)/d0) / log10(d_cut/d0)).
ValueMatrix agent_comm_matrix(const Eigen::Vector2d& neighbor_pos, const Grid& g,
                              const RadioParams& params);

}  // namespace camp::qts
