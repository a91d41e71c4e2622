#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hwopt/checkpoint.hpp"
#include "hwopt/config.hpp"
#include "hwopt/env.hpp"
#include "hwopt/joint_policy.hpp"

namespace hwopt {

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string csv_path;
  std::string checkpoint_path;
  double duration_s = 0.0;
  long env_steps = 0;
  double final_mean_return = 0.0;
  std::vector<std::pair<std::string, double>> final_hardware;
};

std::unique_ptr<Env> make_env(const ExperimentConfig& cfg, EnvInterface iface);
JointPolicy make_experiment_policy(const ExperimentConfig& cfg, PolicyMode mode, Rng& rng);
PolicyMode mode_for_method(const std::string& method);

// Trains one seed to the configured budget, streaming metrics to
// <out_dir>/<problem>_<method>_seed<seed>.csv and writing a final checkpoint
// plus a run-record JSON next to it.
RunRecord run_train(const ExperimentConfig& cfg, std::uint64_t seed);

void save_run_record(const RunRecord& rec, const std::string& path);
RunRecord load_run_record(const std::string& path);

// Column names of the metrics CSV for a config; a function of (problem,
// method) only.
std::vector<std::string> csv_columns(const ExperimentConfig& cfg);

struct EvalEpisode {
  double ret = 0.0;
  bool success = false;        // grasp: clearance >= 0.10 m at episode end
  double final_metric = 0.0;   // toy: mean |y2-h| over the last 100 steps; grasp: end clearance
};

struct EvalSummary {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<EvalEpisode> episodes;
};

EvalSummary run_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
                     const ExperimentConfig& cfg);
EvalSummary evaluate_policy(const JointPolicy& policy, const ExperimentConfig& cfg, int episodes,
                            Rng& rng);

// Nested co-optimization: evolutionary outer loop over hardware parameters,
// fresh RL inner loop per candidate.
struct NestedOutcome {
  std::vector<double> best_hw;
  double best_fitness = 0.0;
  JointPolicy best_policy;
  long env_steps = 0;
  int divergent_candidates = 0;
};

struct NestedHooks {
  // called once per candidate with (candidate_idx, env_steps_so_far, fitness)
  std::function<void(int, long, double, const std::vector<double>&)> on_candidate;
};

NestedOutcome outer_evolution_inner_rl(const ExperimentConfig& cfg, std::uint64_t seed,
                                       long outer_budget, const NestedHooks& hooks = {});

}  // namespace hwopt
