#include <cmath>
#include <stdexcept>

#include "hwopt/algos.hpp"

namespace hwopt {

void gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
         double gamma, double lambda, std::span<double> advantages, std::span<double> returns) {
  const size_t n = rewards.size();
  if (values.size() != n || advantages.size() != n || returns.size() != n)
    throw std::invalid_argument("gae: length mismatch");
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    const double v_next = i + 1 < n ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * v_next - values[i];
    acc = delta + gamma * lambda * acc;
    advantages[i] = acc;
    returns[i] = acc + values[i];
  }
}

void compute_advantages(RolloutBatch& batch, double gamma, double lambda) {
  const int n = batch.n_steps();
  batch.advantages.assign(static_cast<size_t>(n), 0.0);
  batch.returns.assign(static_cast<size_t>(n), 0.0);
  for (size_t s = 0; s < batch.segment_starts.size(); ++s) {
    const int start = batch.segment_starts[s];
    const int end = s + 1 < batch.segment_starts.size() ? batch.segment_starts[s + 1] : n;
    const size_t len = static_cast<size_t>(end - start);
    gae(std::span(batch.rewards).subspan(start, len), std::span(batch.values).subspan(start, len),
        batch.segment_bootstrap[s], gamma, lambda,
        std::span(batch.advantages).subspan(start, len),
        std::span(batch.returns).subspan(start, len));
  }
}

void normalize_advantages(RolloutBatch& batch) {
  const size_t n = batch.advantages.size();
  if (n == 0) return;
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / static_cast<double>(n));
  const double inv = std > 1e-12 ? 1.0 / std : 1.0;
  for (double& a : batch.advantages) a = (a - mean) * inv;
}

double mean_episode_return(const RolloutBatch& batch) {
  if (batch.episode_returns.empty()) {
    double s = 0.0;
    for (double r : batch.rewards) s += r;
    return s;  // no completed episode in the batch
  }
  double s = 0.0;
  for (double r : batch.episode_returns) s += r;
  return s / static_cast<double>(batch.episode_returns.size());
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam::step: dimension mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace hwopt
