#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hwopt/array.hpp"

namespace hwopt {

enum class Op {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,      // elementwise, rank<=2 broadcasting
  kMatMul,
  kSum,      // axis=-1: all -> (1,); axis 0/1 on matrices keep dims
  kDot,
  kTanh,
  kExp,
  kLog,
  kNegate,
  kScale,    // multiply by compile-time constant
  kConcat,   // axis 0 on vectors, axis 1 on matrices
  kSlice,
  kClip,     // constant bounds, scalar or per-element; zero gradient outside
  kSquare,
};

const char* op_name(Op op);
Op op_from_name(const std::string& name);

struct NodeRef {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Optional attributes for add_node; only the fields relevant to the op kind
// are read.
struct OpAttrs {
  double scale = 1.0;          // kScale
  int axis = -1;               // kSum, kConcat, kSlice
  int start = 0;               // kSlice
  int len = 0;                 // kSlice
  Array clip_lo, clip_hi;      // kClip (scalar or same shape as input)
};

struct Node {
  Op op;
  std::vector<int> inputs;
  Shape shape;
  OpAttrs attrs;
  bool bound = true;  // false for placeholder leaves awaiting forward() bindings
};

// Reverse-mode tape over dense arrays. Nodes are appended in topological
// order; forward() evaluates every node, backward() accumulates adjoints from
// a scalar output down to the leaves. Define-by-run: graphs are cheap to
// rebuild and hold their own values.
class Graph {
 public:
  NodeRef constant(Array value);
  NodeRef input(Shape shape);  // unbound leaf; must be bound at forward()
  NodeRef parameter(Array value);

  NodeRef add_node(Op op, std::span<const NodeRef> inputs, const OpAttrs& attrs = {});

  // Convenience builders.
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef sum(NodeRef a, int axis = -1);
  NodeRef dot(NodeRef a, NodeRef b);
  NodeRef tanh(NodeRef a);
  NodeRef exp(NodeRef a);
  NodeRef log(NodeRef a);
  NodeRef negate(NodeRef a);
  NodeRef scale(NodeRef a, double c);
  NodeRef concat(std::span<const NodeRef> parts, int axis = 0);
  NodeRef slice(NodeRef a, int axis, int start, int len);
  NodeRef clip(NodeRef a, double lo, double hi);
  NodeRef clip(NodeRef a, Array lo, Array hi);
  NodeRef square(NodeRef a);
  // log(1 + exp(x)) composed from primitive ops.
  NodeRef softplus(NodeRef a);

  void forward();
  void forward(const std::map<int, Array>& bindings);
  // Accumulates d(output)/d(node) into adjoints for a scalar-shaped output.
  void backward(NodeRef output);

  const Array& value(NodeRef r) const;
  const Array& adjoint(NodeRef r) const;
  Shape shape(NodeRef r) const;
  std::span<const int> parameters() const { return params_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool forward_done() const { return forward_done_; }

  // Overwrites the stored value of a leaf (constant or parameter).
  void set_value(NodeRef r, Array value);

 private:
  void check_ref(NodeRef r, const char* ctx) const;
  Shape infer_shape(Op op, std::span<const NodeRef> inputs, const OpAttrs& attrs) const;
  void eval_node(int id);
  void backprop_node(int id);

  std::vector<Node> nodes_;
  std::vector<Array> values_;
  std::vector<Array> adjoints_;
  std::vector<char> has_adjoint_;
  std::vector<int> params_;
  bool forward_done_ = false;
};

}  // namespace hwopt
