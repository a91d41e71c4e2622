#include <stdexcept>

#include "hwopt/algos.hpp"

namespace hwopt {

RolloutBatch collect_rollouts(const JointPolicy& policy, Env& env, const ValueFn& value,
                              int n_steps, Rng& rng) {
  RolloutBatch batch;
  batch.obs_dim = env.obs_dim();
  batch.hw_dim = env.hw_obs_dim();
  batch.act_dim = env.action_dim();
  if (policy.action_dim() != batch.act_dim)
    throw std::invalid_argument("collect_rollouts: policy action dim " +
                                std::to_string(policy.action_dim()) + " vs env " +
                                std::to_string(batch.act_dim));
  batch.obs.reserve(static_cast<size_t>(n_steps) * batch.obs_dim);
  batch.actions.reserve(static_cast<size_t>(n_steps) * batch.act_dim);

  std::vector<double> obs(static_cast<size_t>(batch.obs_dim), 0.0);
  std::vector<double> hw(static_cast<size_t>(batch.hw_dim), 0.0);
  env.reset(rng, obs, hw);
  batch.segment_starts.push_back(0);
  double episode_return = 0.0;

  for (int t = 0; t < n_steps; ++t) {
    batch.obs.insert(batch.obs.end(), obs.begin(), obs.end());
    batch.hw_obs.insert(batch.hw_obs.end(), hw.begin(), hw.end());
    batch.values.push_back(value.predict(obs));

    auto sample = policy.sample_and_logprob(obs, hw, rng);
    batch.actions.insert(batch.actions.end(), sample.a_new.begin(), sample.a_new.end());
    batch.logp_old.push_back(sample.logp);

    StepOut step = env.step(sample.a_new, sample.aux, obs, hw);
    batch.rewards.push_back(step.reward);
    episode_return += step.reward;

    if (step.info.error) {
      batch.env_error = true;
      batch.segment_bootstrap.push_back(0.0);
      break;
    }
    if (step.done) {
      batch.segment_bootstrap.push_back(step.terminal ? 0.0 : value.predict(obs));
      batch.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      env.reset(rng, obs, hw);
      if (t + 1 < n_steps) batch.segment_starts.push_back(t + 1);
    } else if (t + 1 == n_steps) {
      // Batch boundary cuts the episode: bootstrap with the value estimate.
      batch.segment_bootstrap.push_back(value.predict(obs));
    }
  }
  return batch;
}

}  // namespace hwopt
