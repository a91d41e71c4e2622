// Experiment runner for hardware-control co-optimization: train policies and
// hardware parameters, evaluate checkpoints, plot training curves, sweep over
// seeds and methods.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <regex>
#include <thread>

#include "hwopt/config.hpp"
#include "hwopt/plots.hpp"
#include "hwopt/trainer.hpp"

namespace {

using namespace hwopt;

std::uint64_t resolve_seed(std::uint64_t cli_seed) {
  if (const char* env = std::getenv("HWOPT_MASTER_SEED")) return std::strtoull(env, nullptr, 10);
  return cli_seed;
}

void add_config_options(CLI::App* cmd, std::string& config_path,
                        std::vector<std::string>& overrides) {
  cmd->add_option("--config", config_path, "JSON config file");
  cmd->add_option("--set", overrides, "dotted-path override, e.g. ppo.lr=0.001");
}

ExperimentConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  return load_config(config_path, overrides);
}

void print_hardware(const std::vector<std::pair<std::string, double>>& hw) {
  std::printf("final hardware parameters:\n");
  for (const auto& [name, value] : hw) {
    const char* unit = name.find("_mm") != std::string::npos    ? "mm"
                       : name.find("_Nmm") != std::string::npos ? "N*mm/rad"
                       : name.find("_rad") != std::string::npos ? "rad"
                       : name.rfind("k_", 0) == 0               ? "N/m"
                                                                : "m";
    std::printf("  %-28s %.6g %s\n", name.c_str(), value, unit);
  }
}

int cmd_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig run_cfg = cfg;
  run_cfg.validate();
  RunRecord rec = run_train(run_cfg, seed);
  std::printf("run complete: %s (%ld env steps, mean return %.3f)\n", rec.csv_path.c_str(),
              rec.env_steps, rec.final_mean_return);
  print_hardware(rec.final_hardware);
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::vector<std::string>& methods, int jobs) {
  std::vector<std::pair<std::string, std::uint64_t>> combos;
  for (const auto& m : methods)
    for (std::uint64_t s : cfg.seeds) combos.emplace_back(m, s);
  // Equal env-step budgets across methods: every combo shares cfg.budget.
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  std::atomic<int> failures{0};
  const int n_jobs = std::max(1, jobs);
  for (int w = 0; w < n_jobs; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < combos.size(); i = next.fetch_add(1)) {
        ExperimentConfig c = cfg;
        c.method = combos[i].first;
        try {
          c.validate();
          run_train(c, combos[i].second);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "sweep: %s seed %llu failed: %s\n", c.method.c_str(),
                       static_cast<unsigned long long>(combos[i].second), e.what());
          ++failures;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failures > 0) return kExitRuntime;

  // Aggregate plot across the swept methods.
  std::vector<PlotSeries> series;
  for (const auto& m : methods) {
    PlotSeries ps;
    ps.label = m;
    for (std::uint64_t s : cfg.seeds)
      ps.csv_paths.push_back(cfg.out_dir + "/" + cfg.problem + "_" + m + "_seed" +
                             std::to_string(s) + ".csv");
    series.push_back(ps);
  }
  emit_plots(series, cfg.out_dir + "/" + cfg.problem + "_curves.svg",
             cfg.out_dir + "/" + cfg.problem + "_curves_aggregated.csv", cfg.problem);
  std::printf("sweep complete: %zu runs, plot at %s\n", combos.size(),
              (cfg.out_dir + "/" + cfg.problem + "_curves.svg").c_str());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             const ExperimentConfig& cfg) {
  EvalSummary sum = run_eval(checkpoint, episodes, seed, cfg);
  std::printf("episode,return,success,final_metric\n");
  for (size_t e = 0; e < sum.episodes.size(); ++e)
    std::printf("%zu,%.6g,%d,%.6g\n", e, sum.episodes[e].ret, sum.episodes[e].success ? 1 : 0,
                sum.episodes[e].final_metric);
  std::printf("mean return: %.6g\nsuccess rate: %.3f\n", sum.mean_return, sum.success_rate);
  return kExitOk;
}

int cmd_plot(const std::string& dir, const std::string& problem, const std::string& out_dir) {
  // Group <problem>_<method>_seed<k>.csv by method.
  std::map<std::string, std::vector<std::string>> groups;
  const std::regex pat(problem + "_([a-z\\-]+)_seed([0-9]+)\\.csv");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pat)) groups[m[1]].push_back(entry.path().string());
  }
  if (groups.empty()) {
    std::fprintf(stderr, "plot: no CSVs matching %s_*_seed*.csv in %s\n", problem.c_str(),
                 dir.c_str());
    return kExitUsage;
  }
  std::vector<PlotSeries> series;
  for (auto& [method, paths] : groups) {
    std::sort(paths.begin(), paths.end());
    series.push_back({method, paths});
  }
  const std::string out = out_dir.empty() ? dir : out_dir;
  std::filesystem::create_directories(out);
  emit_plots(series, out + "/" + problem + "_curves.svg",
             out + "/" + problem + "_curves_aggregated.csv", problem);
  std::printf("wrote %s\n", (out + "/" + problem + "_curves.svg").c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hardware-control co-optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string problem, method, algo, search_range, out_dir;
  std::uint64_t seed = 0;
  long budget = -2;
  int n_hw = 0;

  auto apply_cli = [&](ExperimentConfig& cfg) {
    if (!problem.empty()) cfg.problem = problem;
    if (!method.empty()) cfg.method = method;
    if (!algo.empty()) cfg.algo = algo;
    if (!search_range.empty()) cfg.search_range = search_range;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (budget >= -1) cfg.budget = budget;
    if (n_hw > 0) cfg.n_hw_params = n_hw;
  };

  auto add_common = [&](CLI::App* cmd) {
    add_config_options(cmd, config_path, overrides);
    cmd->add_option("--problem", problem,
                    "toy-stiffness | toy-barlength | grasp-z | grasp-planar");
    cmd->add_option("--algo", algo, "ppo | trpo");
    cmd->add_option("--search-range", search_range, "large | small");
    cmd->add_option("--budget", budget, "environment-step budget");
    cmd->add_option("--n-hw", n_hw, "number of toy hardware parameters (10 or 50)");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--seed", seed, "master seed (HWOPT_MASTER_SEED overrides)");
  };

  CLI::App* train = app.add_subcommand("train", "train one method on one problem");
  add_common(train);
  train->add_option("--method", method, "hwasp | hwasp-minimal | cmaes-rl | cmaes | ars");

  CLI::App* sweep = app.add_subcommand("sweep", "cartesian product over seeds and methods");
  add_common(sweep);
  std::vector<std::string> sweep_methods = {"hwasp", "hwasp-minimal", "cmaes"};
  std::vector<std::uint64_t> sweep_seeds;
  int jobs = 1;
  sweep->add_option("--methods", sweep_methods, "methods to sweep")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds to sweep")->delimiter(',');
  sweep->add_option("--jobs", jobs, "parallel runs");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint;
  int episodes = 10;
  eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--seed", seed, "evaluation seed");
  add_config_options(eval, config_path, overrides);
  eval->add_option("--problem", problem, "must match the checkpoint when given");

  CLI::App* plot = app.add_subcommand("plot", "plot training curves from run CSVs");
  std::string plot_dir = "runs", plot_problem = "toy-stiffness", plot_out;
  plot->add_option("--dir", plot_dir, "directory with run CSVs");
  plot->add_option("--problem", plot_problem, "problem whose runs to plot");
  plot->add_option("--out-dir", plot_out, "output directory (default: --dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? hwopt::kExitOk : hwopt::kExitUsage;
  }

  try {
    if (train->parsed()) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      apply_cli(cfg);
      return cmd_train(cfg, resolve_seed(seed));
    }
    if (sweep->parsed()) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      apply_cli(cfg);
      if (!sweep_seeds.empty()) cfg.seeds = sweep_seeds;
      return cmd_sweep(cfg, sweep_methods, jobs);
    }
    if (eval->parsed()) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      cfg.problem = problem;  // empty: inferred from the checkpoint
      return cmd_eval(checkpoint, episodes, resolve_seed(seed), cfg);
    }
    if (plot->parsed()) return cmd_plot(plot_dir, plot_problem, plot_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return hwopt::kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return hwopt::kExitRuntime;
  }
  return hwopt::kExitUsage;
}
