#pragma once

#include <string>

#include "camp/planner.hpp"

// Deterministic SVG rendering of runs: trajectories over the shaded grid and
// per-step occupancy heatmaps. Fixed formatting, stable ids, no timestamps.
namespace camp::plot {

std::string trajectory_svg(const planner::RunLog& log);
std::string occupancy_svg(const planner::RunLog& log, int step);

void save_trajectory_svg(const planner::RunLog& log, const std::filesystem::path& path);
void save_occupancy_svg(const planner::RunLog& log, int step,
                        const std::filesystem::path& path);

}  // namespace camp::plot
