#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hwopt/evolution.hpp"
#include "hwopt/trainer.hpp"

namespace hwopt {

namespace {

double clampd(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

std::vector<ParamRange> ranges_for(const ExperimentConfig& cfg) {
  Rng rng(0);
  JointPolicy probe = make_experiment_policy(cfg, PolicyMode::kMinimal, rng);
  std::vector<ParamRange> ranges;
  if (const auto* s = std::get_if<SpringStackParams>(&probe.hw))
    ranges.assign(static_cast<size_t>(s->n()), s->k_range);
  else if (const auto* b = std::get_if<BarInterfaceParams>(&probe.hw))
    ranges.assign(static_cast<size_t>(b->n()), b->l_range);
  else if (const auto* t = std::get_if<TendonParams>(&probe.hw)) {
    for (int j = 0; j < 4; ++j) ranges.push_back(t->r_range);
    for (int j = 0; j < 4; ++j) ranges.push_back(t->k_range);
    for (int j = 0; j < 4; ++j) ranges.push_back(t->pre_range);
  }
  return ranges;
}

}  // namespace

NestedOutcome outer_evolution_inner_rl(const ExperimentConfig& cfg, std::uint64_t seed,
                                       long outer_budget, const NestedHooks& hooks) {
  Rng master(seed);
  const std::vector<ParamRange> ranges = ranges_for(cfg);
  Rng init_rng = master.split("hw");
  std::vector<double> phi0;
  {
    JointPolicy probe = make_experiment_policy(cfg, PolicyMode::kMinimal, init_rng);
    phi0 = probe.hardware_vector();
  }

  NestedOutcome out;
  out.best_fitness = -1e300;
  long steps_used = 0;
  int candidate_idx = 0;
  double worst_seen = 0.0;
  bool have_worst = false;

  // Inner RL at a frozen hardware candidate; fitness is the mean undiscounted
  // return of the final deterministic policy over eval episodes.
  auto evaluate_candidate = [&](std::span<const double> phi_raw) {
    std::vector<double> phi(phi_raw.begin(), phi_raw.end());
    for (size_t j = 0; j < phi.size(); ++j) phi[j] = clampd(phi[j], ranges[j].lo, ranges[j].hi);

    Rng cand_rng = master.split("candidate", static_cast<std::uint64_t>(candidate_idx));
    Rng policy_rng = cand_rng.split("policy");
    JointPolicy policy = make_experiment_policy(cfg, PolicyMode::kCompOnly, policy_rng);
    auto env = make_env(cfg, EnvInterface::kCompOnly);
    env->set_frozen_hardware(phi);

    Rng value_rng = cand_rng.split("value");
    ValueFn value(env->obs_dim(), cfg.resolved_hidden(), value_rng);
    PpoConfig pcfg = cfg.ppo;
    pcfg.batch_steps = cfg.nested.inner_batch;
    PpoUpdater ppo(policy, pcfg);
    Rng sample_rng = cand_rng.split("sample");
    Rng update_rng = cand_rng.split("update");

    double fitness = 0.0;
    bool diverged = false;
    try {
      long inner_steps = 0;
      while (inner_steps < cfg.nested.inner_budget) {
        const int n = static_cast<int>(
            std::min<long>(pcfg.batch_steps, cfg.nested.inner_budget - inner_steps));
        RolloutBatch batch = collect_rollouts(policy, *env, value, n, sample_rng);
        if (batch.env_error) throw std::runtime_error("env error");
        compute_advantages(batch, pcfg.gamma, pcfg.lambda);
        normalize_advantages(batch);
        ppo.update(batch, value, update_rng);
        inner_steps += batch.n_steps();
      }
      steps_used += inner_steps;

      Rng eval_rng = cand_rng.split("eval");
      std::vector<double> obs(static_cast<size_t>(env->obs_dim()));
      std::vector<double> hw(static_cast<size_t>(env->hw_obs_dim()));
      double total = 0.0;
      for (int e = 0; e < cfg.nested.eval_episodes; ++e) {
        env->reset(eval_rng, obs, hw);
        double ep = 0.0;
        for (int t = 0; t < env->episode_len(); ++t) {
          auto mean = policy.mean_action(obs, hw);
          StepOut s = env->step(mean.mean, mean.aux, obs, hw);
          ep += s.reward;
          ++steps_used;
          if (s.done) break;
        }
        total += ep;
      }
      fitness = total / cfg.nested.eval_episodes;
      if (!std::isfinite(fitness)) diverged = true;
    } catch (const std::exception&) {
      diverged = true;
    }
    if (diverged) {
      fitness = have_worst ? worst_seen : -1e9;
      ++out.divergent_candidates;
    }
    if (!have_worst || fitness < worst_seen) {
      worst_seen = fitness;
      have_worst = true;
    }
    if (fitness > out.best_fitness) {
      out.best_fitness = fitness;
      out.best_hw = phi;
      out.best_policy = policy;
    }
    if (hooks.on_candidate) hooks.on_candidate(candidate_idx, steps_used, fitness, phi);
    ++candidate_idx;
    return fitness;
  };

  const int episode_len = make_env(cfg, EnvInterface::kCompOnly)->episode_len();
  const long steps_per_candidate =
      cfg.nested.inner_budget + static_cast<long>(cfg.nested.eval_episodes) * episode_len;

  // Candidate 0 is the unperturbed initial hardware: with budget for a single
  // candidate the loop reduces to plain RL at x0.
  evaluate_candidate(phi0);

  const int dim = static_cast<int>(phi0.size());
  const int lambda = cfg.nested.lambda > 0
                         ? cfg.nested.lambda
                         : 4 + static_cast<int>(std::floor(3.0 * std::log(std::max(2, dim))));
  if (cfg.nested.outer == "ars") {
    ArsConfig acfg = cfg.ars.ars;
    acfg.n_dirs = std::max(2, std::min(acfg.n_dirs, 8));
    acfg.top_k = std::min(acfg.top_k, acfg.n_dirs);
    acfg.noise = cfg.nested.sigma0;
    ArsState state = ars_init(phi0, acfg);
    Rng ars_rng = master.split("outer-ars");
    auto f = [&](std::span<const double> x) { return evaluate_candidate(x); };
    while (steps_used + 2L * acfg.n_dirs * steps_per_candidate <= outer_budget)
      ars_step(state, f, ars_rng);
  } else {
    CmaEs es(phi0, cfg.nested.sigma0, lambda, master.split("outer-cma"));
    while (steps_used + static_cast<long>(es.lambda()) * steps_per_candidate <= outer_budget) {
      const auto& cands = es.ask();
      std::vector<double> fit(cands.size());
      for (size_t i = 0; i < cands.size(); ++i) fit[i] = -evaluate_candidate(cands[i]);
      es.tell(fit);
    }
  }

  out.env_steps = steps_used;
  return out;
}

}  // namespace hwopt
