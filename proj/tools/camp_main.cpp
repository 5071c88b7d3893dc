// Command-line front end: run a scenario through the planner, verify run logs
// with the independent monitors, and render SVG artifacts.
#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "camp/planner.hpp"
#include "camp/plot.hpp"
#include "camp/scenario.hpp"
#include "camp/verify.hpp"

namespace fs = std::filesystem;

namespace {

int report_exit_code(const camp::verify::Report& rep) { return rep.all_true() ? 0 : 1; }

void print_report_summary(const camp::verify::Report& rep, std::ostream& os) {
  os << "verdicts:\n";
  for (const auto& a : rep.agents)
    os << "  agent " << a.agent << ": goal=" << (a.goal_reached ? "true" : "false")
       << " separation=" << (a.separation_ok ? "true" : "false") << "\n";
  os << "  spatial patterns: " << (rep.spatial_ok ? "true" : "false") << "\n";
  if (rep.violation)
    os << "    first violation: step " << rep.violation->step << " cell ("
       << rep.violation->m << "," << rep.violation->n << ") " << rep.violation->pattern
       << "\n";
  os << "  run complete: " << (rep.complete ? "true" : "false") << "\n";
  os << "  all true: " << (rep.all_true() ? "true" : "false") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"communication-aware multi-agent motion planning"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "plan a scenario and verify the result");
  std::string run_scenario;
  std::string run_out = ".";
  std::uint64_t run_seed = 0;
  bool run_seed_set = false;
  double run_alpha = 0;
  bool run_alpha_set = false;
  int run_horizon = 0;
  bool run_horizon_set = false;
  int run_threads = 1;
  bool run_verbose = false;
  std::string run_dump;
  run_cmd->add_option("scenario", run_scenario, "scenario file")->required();
  run_cmd->add_option("--seed", run_seed, "override the scenario seed")
      ->each([&](const std::string&) { run_seed_set = true; });
  run_cmd->add_option("--alpha", run_alpha, "override the cost trade-off in [0,1]")
      ->each([&](const std::string&) { run_alpha_set = true; });
  run_cmd->add_option("--horizon", run_horizon, "override the planning horizon H")
      ->each([&](const std::string&) { run_horizon_set = true; });
  run_cmd->add_option("--out", run_out, "output directory (default: current)");
  run_cmd->add_option("--threads", run_threads, "parallel agent solves per period");
  run_cmd->add_option("--dump-models", run_dump, "write per-agent model dumps here");
  run_cmd->add_flag("--verbose", run_verbose, "progress on stderr");

  auto* verify_cmd = app.add_subcommand("verify", "re-verify an existing run log");
  std::string verify_log, verify_scenario, verify_out;
  verify_cmd->add_option("log", verify_log, "run log file")->required();
  verify_cmd->add_option("scenario", verify_scenario, "scenario file")->required();
  verify_cmd->add_option("--out", verify_out, "write the report here");

  auto* plot_cmd = app.add_subcommand("plot", "render SVG artifacts from a run log");
  std::string plot_log, plot_out = ".";
  std::vector<int> plot_steps;
  plot_cmd->add_option("log", plot_log, "run log file")->required();
  plot_cmd->add_option("--steps", plot_steps, "occupancy heatmap steps")
      ->delimiter(',');
  plot_cmd->add_option("--out", plot_out, "output directory (default: current)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      camp::scenario::Scenario sc = camp::scenario::load_scenario(run_scenario);
      if (run_seed_set) sc.params.seed = run_seed;
      if (run_alpha_set) sc.params.alpha = run_alpha;
      if (run_horizon_set) sc.params.horizon = run_horizon;
      const auto problems = camp::scenario::validate(sc);
      if (!problems.empty()) {
        std::cerr << "scenario invalid after overrides:\n";
        for (const auto& p : problems) std::cerr << "  - " << p << "\n";
        return 2;
      }

      camp::planner::RunOptions opts;
      opts.threads = run_threads;
      opts.verbose = run_verbose;
      opts.dump_dir = run_dump;
      if (!run_dump.empty()) fs::create_directories(run_dump);
      fs::create_directories(run_out);

      const auto t0 = std::chrono::steady_clock::now();
      camp::planner::RunLog log = camp::planner::run(sc, opts);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      const fs::path out_dir(run_out);
      camp::planner::save_runlog(log, out_dir / "runlog.json");
      {
        std::ofstream csv(out_dir / "states.csv");
        csv << camp::planner::runlog_to_csv(log);
      }
      camp::verify::Report rep = camp::verify::verify_run(log, sc);
      camp::verify::save_report(rep, out_dir / "report.json");

      std::cout << "run finished in " << seconds << "s, end step " << log.end_step
                << (log.complete ? " (all agents arrived)" : " (agents remaining)")
                << "\n";
      print_report_summary(rep, std::cout);
      std::cout << "wrote " << (out_dir / "runlog.json").string() << ", "
                << (out_dir / "report.json").string() << ", "
                << (out_dir / "states.csv").string() << "\n";
      return report_exit_code(rep);
    }

    if (*verify_cmd) {
      camp::planner::RunLog log = camp::planner::load_runlog(verify_log);
      camp::scenario::Scenario sc = camp::scenario::load_scenario(verify_scenario);
      camp::verify::Report rep = camp::verify::verify_run(log, sc);
      if (!verify_out.empty())
        camp::verify::save_report(rep, verify_out);
      else
        std::cout << camp::verify::report_to_json_text(rep);
      print_report_summary(rep, std::cerr);
      return report_exit_code(rep);
    }

    if (*plot_cmd) {
      camp::planner::RunLog log = camp::planner::load_runlog(plot_log);
      fs::create_directories(plot_out);
      const fs::path out_dir(plot_out);
      camp::plot::save_trajectory_svg(log, out_dir / "trajectories.svg");
      std::cout << "wrote " << (out_dir / "trajectories.svg").string() << "\n";
      for (int step : plot_steps) {
        const fs::path p = out_dir / ("occupancy_step" + std::to_string(step) + ".svg");
        camp::plot::save_occupancy_svg(log, step, p);
        std::cout << "wrote " << p.string() << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
