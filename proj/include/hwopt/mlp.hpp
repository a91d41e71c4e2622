#pragma once

#include <span>
#include <vector>

#include "hwopt/array.hpp"
#include "hwopt/graph.hpp"
#include "hwopt/rng.hpp"

namespace hwopt {

// Deterministic tanh MLP with a linear output layer. Weights are stored as
// (fan_in, fan_out) so the batched graph path is a plain matmul chain.
struct MlpPolicy {
  std::vector<int> widths;  // [in, hidden..., out]
  std::vector<Array> w;     // w[i]: (widths[i], widths[i+1])
  std::vector<Array> b;     // b[i]: (widths[i+1],)

  static MlpPolicy make(std::span<const int> widths, Rng& rng);

  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  int n_layers() const { return static_cast<int>(w.size()); }

  void forward(std::span<const double> obs, std::span<double> out) const;
  std::vector<double> forward(std::span<const double> obs) const;
};

struct MlpGraph {
  std::vector<NodeRef> params;  // w0, b0, w1, b1, ...
  NodeRef out;                  // (B, out_dim)
};

// Builds the batched forward pass for an observation matrix node of shape
// (B, in_dim).
MlpGraph build_mlp_graph(Graph& g, const MlpPolicy& mlp, NodeRef x);

}  // namespace hwopt
