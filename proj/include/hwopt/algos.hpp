#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hwopt/env.hpp"
#include "hwopt/joint_policy.hpp"
#include "hwopt/mlp.hpp"
#include "hwopt/rng.hpp"

namespace hwopt {

// ------------------------------------------------------------------- GAE ---

// delta_t = r_t + gamma*V_{t+1} - V_t; A_t = sum_k (gamma*lambda)^k delta_{t+k}
// within the segment; returns = A + V. `bootstrap` is V of the state after the
// last step (zero at true terminals).
void gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
         double gamma, double lambda, std::span<double> advantages, std::span<double> returns);

// ------------------------------------------------------------------ Adam ---

class Adam {
 public:
  Adam(int dim, double lr) : lr_(lr), m_(dim, 0.0), v_(dim, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad);
  double lr() const { return lr_; }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// ---------------------------------------------------------------- rollout ---

struct RolloutBatch {
  int obs_dim = 0, hw_dim = 0, act_dim = 0;
  std::vector<double> obs;       // n x obs_dim
  std::vector<double> hw_obs;    // n x hw_dim
  std::vector<double> actions;   // n x act_dim
  std::vector<double> logp_old;  // n
  std::vector<double> rewards;   // n
  std::vector<double> values;    // n
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<int> segment_starts;        // segment = episode piece inside the batch
  std::vector<double> segment_bootstrap;  // V(next obs) or 0 at terminals
  std::vector<double> episode_returns;    // undiscounted, completed episodes only
  bool env_error = false;

  int n_steps() const { return static_cast<int>(rewards.size()); }
  std::span<const double> obs_row(int t) const { return {obs.data() + static_cast<size_t>(t) * obs_dim, static_cast<size_t>(obs_dim)}; }
  std::span<const double> hw_row(int t) const { return {hw_obs.data() + static_cast<size_t>(t) * hw_dim, static_cast<size_t>(hw_dim)}; }
  std::span<const double> act_row(int t) const { return {actions.data() + static_cast<size_t>(t) * act_dim, static_cast<size_t>(act_dim)}; }
};

class ValueFn;

RolloutBatch collect_rollouts(const JointPolicy& policy, Env& env, const ValueFn& value,
                              int n_steps, Rng& rng);

// Fills advantages/returns over all segments and normalizes advantages to
// zero mean, unit std over the batch.
void compute_advantages(RolloutBatch& batch, double gamma, double lambda);
void normalize_advantages(RolloutBatch& batch);

double mean_episode_return(const RolloutBatch& batch);

// ----------------------------------------------------------- value function --

class ValueFn {
 public:
  ValueFn() = default;
  ValueFn(int obs_dim, std::span<const int> hidden, Rng& rng, double lr = 1e-3);
  double predict(std::span<const double> obs) const;
  void fit(const RolloutBatch& batch, int epochs, int minibatch, Rng& rng);

  MlpPolicy net;

 private:
  std::unique_ptr<Adam> adam_;
  std::vector<double> flat() const;
  void set_flat(std::span<const double> x);
};

// ------------------------------------------------------------------- PPO ---

struct PpoConfig {
  double clip = 0.2;
  int epochs = 10;
  int minibatch = 256;
  double lr = 3e-4;
  double gamma = 0.99;
  double lambda = 0.97;
  int batch_steps = 20000;
  int value_epochs = 3;
};

struct UpdateMetrics {
  double loss = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  bool accepted = true;
  int backtracks = 0;
  std::vector<double> hw_grad;  // |dL/dphi_raw| per hardware scalar
};

class PpoUpdater {
 public:
  PpoUpdater(JointPolicy& policy, const PpoConfig& cfg);
  UpdateMetrics update(const RolloutBatch& batch, ValueFn& value, Rng& rng);

 private:
  JointPolicy& policy_;
  PpoConfig cfg_;
  std::unique_ptr<Adam> adam_;
};

// ------------------------------------------------------------------ TRPO ---

struct TrpoConfig {
  double delta = 0.01;      // KL step bound
  int cg_iters = 10;
  double damping = 0.1;
  int backtracks = 10;
  double backtrack_coef = 0.5;
  double gamma = 0.99;
  double lambda = 0.97;
  int batch_steps = 20000;
  int value_epochs = 3;
  int fvp_subsample = 4096;
};

class TrpoUpdater {
 public:
  TrpoUpdater(JointPolicy& policy, const TrpoConfig& cfg) : policy_(policy), cfg_(cfg) {}
  UpdateMetrics update(const RolloutBatch& batch, ValueFn& value, Rng& rng);

 private:
  JointPolicy& policy_;
  TrpoConfig cfg_;
};

// Shared by PPO/TRPO: surrogate mean(ratio * A) and its gradient over the
// batch, computed in chunks; hardware gradient magnitudes are split out for
// logging. The gradient is of the *maximized* surrogate.
struct SurrogateGrad {
  std::vector<double> grad;
  double value = 0.0;
};
SurrogateGrad surrogate_gradient(JointPolicy& policy, const RolloutBatch& batch, int chunk = 4096);

// Closed-form diagnostics at the current parameters against stored logp_old.
struct PolicyDiag {
  double surrogate = 0.0;
  double kl = 0.0;             // mean approx KL(old || new) from log ratios
  double clip_fraction = 0.0;
};
PolicyDiag policy_diagnostics(const JointPolicy& policy, const RolloutBatch& batch, double clip);

}  // namespace hwopt
