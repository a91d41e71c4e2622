#include <cmath>
#include <deque>
#include <stdexcept>

#include "hwopt/trainer.hpp"

namespace hwopt {

namespace {

EvalSummary eval_with_env(const JointPolicy& policy, Env& env, const ExperimentConfig& cfg,
                          int episodes, Rng& rng) {
  const bool grasp = cfg.problem.rfind("grasp", 0) == 0;
  EvalSummary summary;
  std::vector<double> obs(static_cast<size_t>(env.obs_dim()));
  std::vector<double> hw(static_cast<size_t>(env.hw_obs_dim()));
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng, obs, hw);
    EvalEpisode ep;
    std::deque<double> tail_err;
    double last_height = 0.0;
    for (int t = 0; t < env.episode_len(); ++t) {
      auto mean = policy.mean_action(obs, hw);
      StepOut s = env.step(mean.mean, mean.aux, obs, hw);
      ep.ret += s.reward;
      if (grasp) {
        last_height = s.info.object_height;
      } else {
        tail_err.push_back(std::abs(obs[0] - cfg.toy.h));
        if (tail_err.size() > 100) tail_err.pop_front();
      }
      if (s.done) break;
    }
    if (grasp) {
      ep.final_metric = last_height;
      ep.success = last_height >= 0.10;
    } else {
      double m = 0.0;
      for (double x : tail_err) m += x;
      ep.final_metric = tail_err.empty() ? 0.0 : m / static_cast<double>(tail_err.size());
      ep.success = ep.final_metric <= 0.01;
    }
    summary.mean_return += ep.ret;
    summary.success_rate += ep.success ? 1.0 : 0.0;
    summary.episodes.push_back(ep);
  }
  if (episodes > 0) {
    summary.mean_return /= episodes;
    summary.success_rate /= episodes;
  }
  return summary;
}

}  // namespace

EvalSummary evaluate_policy(const JointPolicy& policy, const ExperimentConfig& cfg, int episodes,
                            Rng& rng) {
  const EnvInterface iface = policy.mode == PolicyMode::kHwasp      ? EnvInterface::kHwasp
                             : policy.mode == PolicyMode::kMinimal  ? EnvInterface::kMinimal
                                                                    : EnvInterface::kCompOnly;
  auto env = make_env(cfg, iface);
  if (policy.mode != PolicyMode::kCompOnly && env->action_dim() != policy.action_dim())
    throw std::runtime_error("evaluate_policy: checkpoint/problem mismatch (action dim " +
                             std::to_string(policy.action_dim()) + " vs env " +
                             std::to_string(env->action_dim()) + ")");
  return eval_with_env(policy, *env, cfg, episodes, rng);
}

EvalSummary run_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
                     const ExperimentConfig& cfg_in) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  ExperimentConfig cfg = cfg_in;
  const std::string ck_problem = ck.meta_or("problem", "");
  if (cfg.problem.empty()) cfg.problem = ck_problem;
  if (cfg.problem != ck_problem)
    throw std::runtime_error("checkpoint/problem mismatch: checkpoint is for " + ck_problem +
                             ", requested " + cfg.problem);
  JointPolicy policy = policy_from_checkpoint(ck);
  if (policy.n_hw_params() > 0) cfg.n_hw_params = policy.n_hw_params();

  Rng rng(seed);
  Rng eval_rng = rng.split("eval");
  if (policy.mode == PolicyMode::kCompOnly) {
    auto env = make_env(cfg, EnvInterface::kCompOnly);
    if (const Array* phi = ck.find("frozen_phi")) env->set_frozen_hardware(phi->v);
    return eval_with_env(policy, *env, cfg, episodes, eval_rng);
  }
  return evaluate_policy(policy, cfg, episodes, eval_rng);
}

}  // namespace hwopt
