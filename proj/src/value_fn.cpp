#include <numeric>

#include "hwopt/algos.hpp"

namespace hwopt {

ValueFn::ValueFn(int obs_dim, std::span<const int> hidden, Rng& rng, double lr) {
  std::vector<int> widths;
  widths.push_back(obs_dim);
  for (int h : hidden) widths.push_back(h);
  widths.push_back(1);
  Rng init = rng.split("value-init");
  net = MlpPolicy::make(widths, init);
  int dim = 0;
  for (size_t i = 0; i < net.w.size(); ++i)
    dim += static_cast<int>(net.w[i].numel() + net.b[i].numel());
  adam_ = std::make_unique<Adam>(dim, lr);
}

double ValueFn::predict(std::span<const double> obs) const {
  double out = 0.0;
  net.forward(obs, {&out, 1});
  return out;
}

std::vector<double> ValueFn::flat() const {
  std::vector<double> x;
  for (size_t i = 0; i < net.w.size(); ++i) {
    x.insert(x.end(), net.w[i].v.begin(), net.w[i].v.end());
    x.insert(x.end(), net.b[i].v.begin(), net.b[i].v.end());
  }
  return x;
}

void ValueFn::set_flat(std::span<const double> x) {
  size_t k = 0;
  for (size_t i = 0; i < net.w.size(); ++i) {
    for (auto& v : net.w[i].v) v = x[k++];
    for (auto& v : net.b[i].v) v = x[k++];
  }
}

void ValueFn::fit(const RolloutBatch& batch, int epochs, int minibatch, Rng& rng) {
  const int n = batch.n_steps();
  if (n == 0) return;
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(static_cast<int>(i))]);
    const int mb = std::min(minibatch, n);
    for (int start = 0; start + mb <= n; start += mb) {
      Array obs_mat(Shape::mat(mb, batch.obs_dim));
      Array target(Shape::mat(mb, 1));
      for (int r = 0; r < mb; ++r) {
        const int t = idx[static_cast<size_t>(start + r)];
        auto row = batch.obs_row(t);
        for (int c = 0; c < batch.obs_dim; ++c) obs_mat.at(r, c) = row[c];
        target.at(r, 0) = batch.returns[static_cast<size_t>(t)];
      }
      Graph g;
      NodeRef x = g.constant(obs_mat);
      MlpGraph mg = build_mlp_graph(g, net, x);
      NodeRef loss = g.scale(g.sum(g.square(g.sub(mg.out, g.constant(target)))), 1.0 / mb);
      g.forward();
      g.backward(loss);
      std::vector<double> grad;
      for (NodeRef p : mg.params) {
        const Array& ga = g.adjoint(p);
        grad.insert(grad.end(), ga.v.begin(), ga.v.end());
      }
      auto params = flat();
      adam_->step(params, grad);
      set_flat(params);
    }
  }
}

}  // namespace hwopt
