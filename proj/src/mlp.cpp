#include "hwopt/mlp.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace hwopt {

MlpPolicy MlpPolicy::make(std::span<const int> widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("MlpPolicy: need at least [in, out] widths");
  MlpPolicy mlp;
  mlp.widths.assign(widths.begin(), widths.end());
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const int fan_in = widths[i], fan_out = widths[i + 1];
    Array wi(Shape::mat(fan_in, fan_out));
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& x : wi.v) x = rng.uniform(-a, a);
    mlp.w.push_back(std::move(wi));
    mlp.b.push_back(Array::zeros(Shape::vec(fan_out)));
  }
  return mlp;
}

void MlpPolicy::forward(std::span<const double> obs, std::span<double> out) const {
  if (static_cast<int>(obs.size()) != in_dim())
    throw std::invalid_argument("mlp_forward: observation width " + std::to_string(obs.size()) +
                                " does not match input width " + std::to_string(in_dim()));
  using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
  using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  RowVec h = Eigen::Map<const RowVec>(obs.data(), static_cast<int>(obs.size()));
  for (int layer = 0; layer < n_layers(); ++layer) {
    MatMap wm(w[layer].v.data(), widths[layer], widths[layer + 1]);
    RowVec z = h * wm;
    for (int j = 0; j < widths[layer + 1]; ++j) z(j) += b[layer].at(j);
    if (layer + 1 < n_layers())
      for (int j = 0; j < widths[layer + 1]; ++j) z(j) = std::tanh(z(j));
    h = std::move(z);
  }
  for (int j = 0; j < out_dim(); ++j) out[j] = h(j);
}

std::vector<double> MlpPolicy::forward(std::span<const double> obs) const {
  std::vector<double> out(static_cast<size_t>(out_dim()), 0.0);
  forward(obs, out);
  return out;
}

MlpGraph build_mlp_graph(Graph& g, const MlpPolicy& mlp, NodeRef x) {
  MlpGraph refs;
  NodeRef h = x;
  for (int layer = 0; layer < mlp.n_layers(); ++layer) {
    NodeRef wn = g.parameter(mlp.w[layer]);
    NodeRef bn = g.parameter(mlp.b[layer]);
    refs.params.push_back(wn);
    refs.params.push_back(bn);
    NodeRef z = g.add(g.matmul(h, wn), bn);
    h = layer + 1 < mlp.n_layers() ? g.tanh(z) : z;
  }
  refs.out = h;
  return refs;
}

}  // namespace hwopt
