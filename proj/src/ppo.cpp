#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hwopt/algos.hpp"

namespace hwopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Array gather_rows(const std::vector<double>& flatrows, int width, std::span<const int> idx) {
  Array out(Shape::mat(static_cast<int>(idx.size()), width));
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < width; ++c)
      out.at(static_cast<int>(r), c) = flatrows[static_cast<size_t>(idx[r]) * width + c];
  return out;
}

// Number of scalar parameters in front of the hardware block; the hardware
// raws are always the trailing slots.
int hw_offset(JointPolicy& policy) {
  int total = policy.n_params();
  int hw = 0;
  for (ParamSlot& s : policy.param_slots())
    if (s.name.rfind("hw.", 0) == 0) hw += static_cast<int>(s.arr->numel());
  return total - hw;
}

}  // namespace

SurrogateGrad surrogate_gradient(JointPolicy& policy, const RolloutBatch& batch, int chunk) {
  const int n = batch.n_steps();
  SurrogateGrad out;
  out.grad.assign(static_cast<size_t>(policy.n_params()), 0.0);
  double total = 0.0;
  for (int start = 0; start < n; start += chunk) {
    const int b = std::min(chunk, n - start);
    std::vector<int> idx(static_cast<size_t>(b));
    std::iota(idx.begin(), idx.end(), start);
    Array obs_mat = gather_rows(batch.obs, batch.obs_dim, idx);
    Array hw_mat = gather_rows(batch.hw_obs, batch.hw_dim, idx);
    Array act_mat = gather_rows(batch.actions, batch.act_dim, idx);
    Array adv(Shape::mat(b, 1));
    Array logp_old(Shape::mat(b, 1));
    for (int r = 0; r < b; ++r) {
      adv.at(r, 0) = batch.advantages[static_cast<size_t>(start + r)];
      logp_old.at(r, 0) = batch.logp_old[static_cast<size_t>(start + r)];
    }

    Graph g;
    auto refs = policy.build_mean_graph(g, obs_mat, hw_mat);
    NodeRef logp = policy.build_logp_graph(g, refs, act_mat);
    NodeRef ratio = g.exp(g.sub(logp, g.constant(logp_old)));
    // mean(ratio * A), scaled so chunks sum to the batch mean.
    NodeRef obj = g.scale(g.sum(g.mul(ratio, g.constant(adv))), 1.0 / n);
    g.forward();
    g.backward(obj);
    total += g.value(obj).v[0];
    size_t k = 0;
    for (NodeRef p : refs.slots) {
      const Array& ga = g.adjoint(p);
      for (double x : ga.v) out.grad[k++] += x;
    }
  }
  out.value = total;
  return out;
}

PolicyDiag policy_diagnostics(const JointPolicy& policy, const RolloutBatch& batch, double clip) {
  PolicyDiag d;
  const int n = batch.n_steps();
  if (n == 0) return d;
  double surr = 0.0, kl = 0.0, clipped = 0.0;
  for (int t = 0; t < n; ++t) {
    const double logp = policy.logprob(batch.obs_row(t), batch.hw_row(t), batch.act_row(t));
    const double logr = logp - batch.logp_old[static_cast<size_t>(t)];
    const double ratio = std::exp(logr);
    surr += ratio * batch.advantages[static_cast<size_t>(t)];
    kl += (ratio - 1.0) - logr;  // non-negative KL estimator
    if (std::abs(ratio - 1.0) > clip) clipped += 1.0;
  }
  d.surrogate = surr / n;
  d.kl = kl / n;
  d.clip_fraction = clipped / n;
  return d;
}

PpoUpdater::PpoUpdater(JointPolicy& policy, const PpoConfig& cfg) : policy_(policy), cfg_(cfg) {
  adam_ = std::make_unique<Adam>(policy.n_params(), cfg.lr);
}

UpdateMetrics PpoUpdater::update(const RolloutBatch& batch, ValueFn& value, Rng& rng) {
  UpdateMetrics metrics;
  const int n = batch.n_steps();
  const int offset = hw_offset(policy_);
  const int n_hw = policy_.n_params() - offset;

  // Policy-gradient estimate at the behavior parameters (ratio == 1), kept
  // for the per-iteration hardware gradient log.
  SurrogateGrad pg = surrogate_gradient(policy_, batch);
  metrics.hw_grad.assign(static_cast<size_t>(n_hw), 0.0);
  for (int j = 0; j < n_hw; ++j) metrics.hw_grad[static_cast<size_t>(j)] = std::abs(pg.grad[static_cast<size_t>(offset + j)]);

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const int mb = std::min(cfg_.minibatch, n);

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
    for (int start = 0; start + mb <= n; start += mb) {
      std::span<const int> mb_idx(idx.data() + start, static_cast<size_t>(mb));
      Array obs_mat = gather_rows(batch.obs, batch.obs_dim, mb_idx);
      Array hw_mat = gather_rows(batch.hw_obs, batch.hw_dim, mb_idx);
      Array act_mat = gather_rows(batch.actions, batch.act_dim, mb_idx);
      Array adv(Shape::mat(mb, 1));
      Array logp_old(Shape::mat(mb, 1));
      Array lo(Shape::mat(mb, 1)), hi(Shape::mat(mb, 1));
      for (int r = 0; r < mb; ++r) {
        const int t = mb_idx[r];
        const double a = batch.advantages[static_cast<size_t>(t)];
        adv.at(r, 0) = a;
        logp_old.at(r, 0) = batch.logp_old[static_cast<size_t>(t)];
        // min(ratio*A, clip(ratio)*A) == A * clip(ratio, lo, hi) with one-sided
        // bounds chosen by the advantage sign.
        lo.at(r, 0) = a > 0.0 ? -kInf : 1.0 - cfg_.clip;
        hi.at(r, 0) = a > 0.0 ? 1.0 + cfg_.clip : kInf;
        if (a == 0.0) {
          lo.at(r, 0) = -kInf;
          hi.at(r, 0) = kInf;
        }
      }

      Graph g;
      auto refs = policy_.build_mean_graph(g, obs_mat, hw_mat);
      NodeRef logp = policy_.build_logp_graph(g, refs, act_mat);
      NodeRef ratio = g.exp(g.sub(logp, g.constant(logp_old)));
      NodeRef clipped = g.clip(ratio, lo, hi);
      NodeRef surrogate = g.scale(g.sum(g.mul(clipped, g.constant(adv))), 1.0 / mb);
      NodeRef loss = g.negate(surrogate);
      g.forward();
      g.backward(loss);
      if (!std::isfinite(g.value(loss).v[0]))
        throw std::runtime_error("ppo_update: non-finite loss");

      std::vector<double> grad;
      grad.reserve(static_cast<size_t>(policy_.n_params()));
      for (NodeRef p : refs.slots) {
        const Array& ga = g.adjoint(p);
        grad.insert(grad.end(), ga.v.begin(), ga.v.end());
      }
      auto params = policy_.flat_params();
      adam_->step(params, grad);
      policy_.set_flat_params(params);
      policy_.clamp_hardware();
    }
  }

  PolicyDiag diag = policy_diagnostics(policy_, batch, cfg_.clip);
  metrics.loss = -diag.surrogate;
  metrics.kl = diag.kl;
  metrics.clip_fraction = diag.clip_fraction;

  value.fit(batch, cfg_.value_epochs, cfg_.minibatch, rng);
  return metrics;
}

}  // namespace hwopt
