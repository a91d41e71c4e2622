#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hwopt/algos.hpp"

namespace hwopt {

namespace {

std::vector<double> compute_means(const JointPolicy& policy, const RolloutBatch& batch,
                                  std::span<const int> idx) {
  const int d = policy.action_dim();
  std::vector<double> means(idx.size() * static_cast<size_t>(d), 0.0);
  for (size_t r = 0; r < idx.size(); ++r) {
    auto m = policy.mean_action(batch.obs_row(idx[r]), batch.hw_row(idx[r]));
    for (int c = 0; c < d; ++c) means[r * d + c] = m.mean[static_cast<size_t>(c)];
  }
  return means;
}

std::vector<double> clipped_log_std(const JointPolicy& policy) {
  std::vector<double> ls(policy.log_std.v.size());
  for (size_t i = 0; i < ls.size(); ++i)
    ls[i] = std::clamp(policy.log_std.v[i], -5.0, 2.0);
  return ls;
}

// Closed-form mean KL(old || new) for diagonal Gaussians over the given rows.
double gaussian_kl(std::span<const double> means_old, std::span<const double> ls_old,
                   std::span<const double> means_new, std::span<const double> ls_new, int d) {
  const size_t n = means_old.size() / static_cast<size_t>(d);
  double kl = 0.0;
  for (size_t r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) {
      const double mo = means_old[r * d + c], mn = means_new[r * d + c];
      const double lo = ls_old[static_cast<size_t>(c)], ln = ls_new[static_cast<size_t>(c)];
      kl += ln - lo + 0.5 * (std::exp(2.0 * (lo - ln)) + (mo - mn) * (mo - mn) * std::exp(-2.0 * ln)) - 0.5;
    }
  }
  return kl / static_cast<double>(n);
}

// Gradient of mean KL(old || new) w.r.t. the policy parameters on a subsample.
std::vector<double> kl_gradient(JointPolicy& policy, const RolloutBatch& batch,
                                std::span<const int> idx, const std::vector<double>& means_old,
                                const std::vector<double>& ls_old) {
  const int b = static_cast<int>(idx.size());
  const int d = policy.action_dim();
  Array obs_mat(Shape::mat(b, batch.obs_dim));
  Array hw_mat(Shape::mat(b, batch.hw_dim));
  Array mold(Shape::mat(b, d));
  for (int r = 0; r < b; ++r) {
    auto orow = batch.obs_row(idx[static_cast<size_t>(r)]);
    auto hrow = batch.hw_row(idx[static_cast<size_t>(r)]);
    for (int c = 0; c < batch.obs_dim; ++c) obs_mat.at(r, c) = orow[static_cast<size_t>(c)];
    for (int c = 0; c < batch.hw_dim; ++c) hw_mat.at(r, c) = hrow[static_cast<size_t>(c)];
    for (int c = 0; c < d; ++c) mold.at(r, c) = means_old[static_cast<size_t>(r) * d + c];
  }
  Array var_old(Shape::vec(d)), ls_old_arr(Shape::vec(d));
  for (int c = 0; c < d; ++c) {
    ls_old_arr.at(c) = ls_old[static_cast<size_t>(c)];
    var_old.at(c) = std::exp(2.0 * ls_old[static_cast<size_t>(c)]);
  }

  Graph g;
  auto refs = policy.build_mean_graph(g, obs_mat, hw_mat);
  NodeRef inv_var_new = g.exp(g.scale(refs.log_std_clipped, -2.0));                 // (d,)
  NodeRef diff2 = g.square(g.sub(g.constant(mold), refs.mean));                     // (b,d)
  NodeRef quad = g.scale(g.mul(g.add(g.constant(var_old), diff2), inv_var_new), 0.5);
  NodeRef ls_diff = g.sub(refs.log_std_clipped, g.constant(ls_old_arr));            // (d,)
  NodeRef inner = g.add(quad, ls_diff);                                             // (b,d)
  NodeRef kl_col = g.sub(g.sum(inner, 1), g.constant(Array::scalar(0.5 * d)));      // (b,1)
  NodeRef kl_mean = g.scale(g.sum(kl_col), 1.0 / b);
  g.forward();
  g.backward(kl_mean);

  std::vector<double> grad;
  grad.reserve(static_cast<size_t>(policy.n_params()));
  for (NodeRef p : refs.slots) {
    const Array& ga = g.adjoint(p);
    grad.insert(grad.end(), ga.v.begin(), ga.v.end());
  }
  return grad;
}

double dot_v(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

UpdateMetrics TrpoUpdater::update(const RolloutBatch& batch, ValueFn& value, Rng& rng) {
  UpdateMetrics metrics;
  metrics.accepted = false;
  const int n = batch.n_steps();
  const int n_params = policy_.n_params();

  // Hardware gradient log + ascent direction.
  SurrogateGrad sg = surrogate_gradient(policy_, batch);
  {
    int total = n_params, hw = 0;
    for (ParamSlot& s : policy_.param_slots())
      if (s.name.rfind("hw.", 0) == 0) hw += static_cast<int>(s.arr->numel());
    const int offset = total - hw;
    metrics.hw_grad.assign(static_cast<size_t>(hw), 0.0);
    for (int j = 0; j < hw; ++j)
      metrics.hw_grad[static_cast<size_t>(j)] = std::abs(sg.grad[static_cast<size_t>(offset + j)]);
  }

  const double gnorm = std::sqrt(dot_v(sg.grad, sg.grad));
  if (gnorm < 1e-12) {
    value.fit(batch, cfg_.value_epochs, 256, rng);
    metrics.accepted = true;  // zero gradient: the null step trivially satisfies the bound
    return metrics;
  }

  // Snapshot of the behavior policy.
  const std::vector<double> params0 = policy_.flat_params();
  std::vector<int> all_idx(static_cast<size_t>(n));
  std::iota(all_idx.begin(), all_idx.end(), 0);
  const std::vector<double> means_old = compute_means(policy_, batch, all_idx);
  const std::vector<double> ls_old = clipped_log_std(policy_);

  // Subsample for Fisher-vector products.
  std::vector<int> sub_idx;
  const int stride = std::max(1, n / std::max(1, cfg_.fvp_subsample));
  for (int t = 0; t < n; t += stride) sub_idx.push_back(t);
  std::vector<double> means_old_sub(sub_idx.size() * static_cast<size_t>(policy_.action_dim()));
  for (size_t r = 0; r < sub_idx.size(); ++r)
    for (int c = 0; c < policy_.action_dim(); ++c)
      means_old_sub[r * policy_.action_dim() + c] =
          means_old[static_cast<size_t>(sub_idx[r]) * policy_.action_dim() + c];

  // KL Hessian-vector product by central differences of the KL gradient; the
  // KL gradient itself vanishes at params0, so this is the Fisher metric.
  auto fvp = [&](std::span<const double> v) {
    const double vnorm = std::sqrt(dot_v(v, v));
    std::vector<double> out(v.size(), 0.0);
    if (vnorm < 1e-300) return out;
    const double eps = 1e-5;
    std::vector<double> shifted(params0);
    for (size_t i = 0; i < v.size(); ++i) shifted[i] = params0[i] + eps * v[i] / vnorm;
    policy_.set_flat_params(shifted);
    std::vector<double> gp = kl_gradient(policy_, batch, sub_idx, means_old_sub, ls_old);
    for (size_t i = 0; i < v.size(); ++i) shifted[i] = params0[i] - eps * v[i] / vnorm;
    policy_.set_flat_params(shifted);
    std::vector<double> gm = kl_gradient(policy_, batch, sub_idx, means_old_sub, ls_old);
    policy_.set_flat_params(params0);
    for (size_t i = 0; i < v.size(); ++i)
      out[i] = (gp[i] - gm[i]) / (2.0 * eps) * vnorm + cfg_.damping * v[i];
    return out;
  };

  // Conjugate gradient for (F + damping I) x = g.
  std::vector<double> x(static_cast<size_t>(n_params), 0.0);
  std::vector<double> r = sg.grad;
  std::vector<double> p = r;
  double rs = dot_v(r, r);
  for (int it = 0; it < cfg_.cg_iters; ++it) {
    std::vector<double> fp = fvp(p);
    const double pfp = dot_v(p, fp);
    if (pfp <= 0.0 || !std::isfinite(pfp)) break;
    const double alpha = rs / pfp;
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * fp[i];
    }
    const double rs_new = dot_v(r, r);
    if (rs_new < 1e-14) break;
    for (size_t i = 0; i < p.size(); ++i) p[i] = r[i] + (rs_new / rs) * p[i];
    rs = rs_new;
  }

  const std::vector<double> fx = fvp(x);
  const double shs = dot_v(x, fx);
  if (shs <= 0.0 || !std::isfinite(shs)) {
    policy_.set_flat_params(params0);
    value.fit(batch, cfg_.value_epochs, 256, rng);
    return metrics;
  }
  const double step_scale = std::sqrt(2.0 * cfg_.delta / shs);

  const double surr0 = sg.value;  // mean(1 * A)
  double coef = 1.0;
  for (int bt = 0; bt < cfg_.backtracks; ++bt, coef *= cfg_.backtrack_coef) {
    std::vector<double> cand(params0);
    for (size_t i = 0; i < cand.size(); ++i) cand[i] += coef * step_scale * x[i];
    policy_.set_flat_params(cand);
    policy_.clamp_hardware();

    PolicyDiag diag = policy_diagnostics(policy_, batch, 0.2);
    const std::vector<double> means_new = compute_means(policy_, batch, all_idx);
    const std::vector<double> ls_new = clipped_log_std(policy_);
    const double kl = gaussian_kl(means_old, ls_old, means_new, ls_new, policy_.action_dim());
    if (std::isfinite(diag.surrogate) && diag.surrogate > surr0 && kl <= cfg_.delta) {
      metrics.accepted = true;
      metrics.kl = kl;
      metrics.loss = -diag.surrogate;
      metrics.backtracks = bt;
      break;
    }
  }
  if (!metrics.accepted) {
    policy_.set_flat_params(params0);  // zero step
    metrics.backtracks = cfg_.backtracks;
  }

  value.fit(batch, cfg_.value_epochs, 256, rng);
  return metrics;
}

}  // namespace hwopt
