#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hwopt/algos.hpp"
#include "hwopt/evolution.hpp"
#include "hwopt/grasp_env.hpp"
#include "hwopt/joint_policy.hpp"
#include "hwopt/mass_spring.hpp"

namespace hwopt {

struct CmaesRunConfig {
  int lambda = 0;         // 0: 4 + floor(3 ln d)
  double sigma0 = 0.5;
  int eval_episodes = 2;  // episodes per fitness evaluation (direct methods)
};

struct ArsRunConfig {
  ArsConfig ars;
  int eval_episodes = 1;
};

struct NestedConfig {
  long inner_budget = 100000;   // env steps of RL per candidate
  int inner_batch = 10000;      // PPO batch for the inner loop
  int eval_episodes = 10;       // fitness episodes per candidate
  double sigma0 = 1.0;
  int lambda = 0;
  std::string outer = "cmaes";  // or "ars"
};

// Exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

struct ExperimentConfig {
  std::string problem = "toy-stiffness";  // toy-barlength, grasp-z, grasp-planar
  std::string method = "hwasp";           // hwasp-minimal, cmaes-rl, cmaes, ars
  std::string algo;                       // "", "ppo" or "trpo"
  int n_hw_params = 10;
  std::string search_range = "large";
  std::vector<std::uint64_t> seeds = {0};
  long budget = -1;  // env steps; -1: problem default
  std::string out_dir = "runs";
  int csv_every = 1;  // CSV row every n iterations

  MassSpringConfig toy;
  GraspConfig grasp;
  PolicySetup policy;  // policy.hidden empty: problem default
  PpoConfig ppo;
  TrpoConfig trpo;
  CmaesRunConfig cmaes;
  ArsRunConfig ars;
  NestedConfig nested;

  bool is_toy() const { return problem.rfind("toy", 0) == 0; }
  std::string resolved_algo() const;
  long resolved_budget() const;
  std::vector<int> resolved_hidden() const;
  int resolved_batch_steps() const;
  void validate() const;  // throws std::invalid_argument on bad combinations
};

// JSON round trip with dotted-path overrides ("ppo.lr=0.001").
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path_or_empty,
                             const std::vector<std::string>& overrides);
// FNV-1a hash of the canonical (key-sorted) JSON form.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace hwopt
