#include "camp/plot.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace camp::plot {

namespace {

constexpr double kCanvas = 640.0;
constexpr double kMargin = 40.0;

const char* kPalette[12] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                            "#bcbd22", "#17becf", "#393b79", "#ad494a"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Mapper {
  const qts::Grid& grid;
  double sx(double wx) const {
    return kMargin + (wx - grid.origin.x()) / grid.side * kCanvas;
  }
  double sy(double wy) const {
    return kMargin + (grid.origin.y() + grid.side - wy) / grid.side * kCanvas;
  }
};

void open_svg(std::ostringstream& os) {
  const double total = kCanvas + 2 * kMargin;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(total)
     << "\" height=\"" << fmt(total) << "\" viewBox=\"0 0 " << fmt(total) << " "
     << fmt(total) << "\">\n";
  os << "<rect width=\"" << fmt(total) << "\" height=\"" << fmt(total)
     << "\" fill=\"#ffffff\"/>\n";
}

void draw_grid(std::ostringstream& os, const scenario::Scenario& sc, bool shade,
               const qts::Occupancy* occupancy) {
  const Mapper map{sc.grid};
  const int s = sc.grid.cells_per_side();
  const double cell_px = kCanvas / s;
  int max_q = 1;
  for (int m = 0; m < s; ++m)
    for (int n = 0; n < s; ++n) max_q = std::max(max_q, sc.capacity(m, n));
  int max_occ = 1;
  if (occupancy)
    for (int m = 0; m < s; ++m)
      for (int n = 0; n < s; ++n) max_occ = std::max(max_occ, (*occupancy)(m, n));

  for (int m = 0; m < s; ++m) {
    for (int n = 0; n < s; ++n) {
      std::string fill = "#ffffff";
      if (occupancy) {
        // shade toward blue with the agent count
        const int c = (*occupancy)(m, n);
        const int level = 255 - (200 * c) / max_occ;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%02x%02xff", level, level);
        fill = buf;
        if (c == 0) fill = "#ffffff";
      } else if (shade) {
        if (sc.capacity(m, n) == 0) {
          fill = "#3b3b3b";
        } else {
          const int level = 255 - 96 + (96 * sc.capacity(m, n)) / max_q;
          char buf[16];
          std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", level - 20, level, level - 40);
          fill = buf;
        }
      }
      os << "<rect x=\"" << fmt(map.sx(sc.grid.west(n))) << "\" y=\""
         << fmt(map.sy(sc.grid.north(m))) << "\" width=\"" << fmt(cell_px)
         << "\" height=\"" << fmt(cell_px) << "\" fill=\"" << fill
         << "\" stroke=\"#c8c8c8\" stroke-width=\"0.5\"/>\n";
      if (occupancy && (*occupancy)(m, n) > 0) {
        os << "<text x=\"" << fmt(map.sx(sc.grid.west(n)) + cell_px / 2) << "\" y=\""
           << fmt(map.sy(sc.grid.north(m)) + cell_px / 2 + 4)
           << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#202020\">"
           << (*occupancy)(m, n) << "</text>\n";
      }
    }
  }
  // stations as four-point stars
  for (std::size_t i = 0; i < sc.stations.size(); ++i) {
    const auto& st = sc.stations[i];
    const double cx = map.sx(st.x()), cy = map.sy(st.y());
    os << "<path id=\"station" << i << "\" d=\"M " << fmt(cx) << " " << fmt(cy - 8)
       << " L " << fmt(cx + 2.5) << " " << fmt(cy - 2.5) << " L " << fmt(cx + 8) << " "
       << fmt(cy) << " L " << fmt(cx + 2.5) << " " << fmt(cy + 2.5) << " L " << fmt(cx)
       << " " << fmt(cy + 8) << " L " << fmt(cx - 2.5) << " " << fmt(cy + 2.5) << " L "
       << fmt(cx - 8) << " " << fmt(cy) << " L " << fmt(cx - 2.5) << " "
       << fmt(cy - 2.5) << " Z\" fill=\"#d62728\"/>\n";
  }
}

}  // namespace

std::string trajectory_svg(const planner::RunLog& log) {
  const auto& sc = log.scenario;
  const Mapper map{sc.grid};
  std::ostringstream os;
  open_svg(os);
  draw_grid(os, sc, true, nullptr);

  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    const int id = sc.agents[i].id;
    const char* color = kPalette[i % 12];
    std::ostringstream pts;
    for (const auto& step : log.steps) {
      for (const auto& a : step.agents) {
        if (a.id != id) continue;
        pts << (pts.tellp() > 0 ? " " : "") << fmt(map.sx(a.x[0])) << ","
            << fmt(map.sy(a.x[1]));
      }
    }
    if (pts.tellp() > 0)
      os << "<polyline id=\"traj" << id << "\" points=\"" << pts.str()
         << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";

    if (!log.steps.empty()) {
      for (const auto& a : log.steps.front().agents) {
        if (a.id != id) continue;
        os << "<circle cx=\"" << fmt(map.sx(a.x[0])) << "\" cy=\"" << fmt(map.sy(a.x[1]))
           << "\" r=\"4\" fill=\"" << color << "\"/>\n";
      }
    }
    // goal centers as crosses
    const Eigen::Vector2d g = sc.agents[i].goal_center();
    const double gx = map.sx(g.x()), gy = map.sy(g.y());
    os << "<path d=\"M " << fmt(gx - 5) << " " << fmt(gy - 5) << " L " << fmt(gx + 5)
       << " " << fmt(gy + 5) << " M " << fmt(gx - 5) << " " << fmt(gy + 5) << " L "
       << fmt(gx + 5) << " " << fmt(gy - 5) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string occupancy_svg(const planner::RunLog& log, int step) {
  if (step < 0 || static_cast<std::size_t>(step) >= log.occupancy.size())
    throw std::out_of_range("step " + std::to_string(step) +
                            " outside the logged range 0.." +
                            std::to_string(log.occupancy.size()) + "-1");
  std::ostringstream os;
  open_svg(os);
  const qts::Occupancy& occ = log.occupancy[static_cast<std::size_t>(step)];
  draw_grid(os, log.scenario, false, &occ);
  os << "</svg>\n";
  return os.str();
}

void save_trajectory_svg(const planner::RunLog& log,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG: " + path.string());
  out << trajectory_svg(log);
}

void save_occupancy_svg(const planner::RunLog& log, int step,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG: " + path.string());
  out << occupancy_svg(log, step);
}

}  // namespace camp::plot
