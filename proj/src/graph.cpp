#include "hwopt/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace hwopt {

namespace {

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Broadcast-compatible result shape for elementwise binary ops. Rank-1
// operands align as row vectors; each dimension must match or be 1.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* ctx) {
  const int ar = a.rows(), ac = a.cols();
  const int br = b.rows(), bc = b.cols();
  const bool rows_ok = ar == br || ar == 1 || br == 1;
  const bool cols_ok = ac == bc || ac == 1 || bc == 1;
  if (!rows_ok || !cols_ok)
    fail(std::string(ctx) + ": shape mismatch " + a.str() + " vs " + b.str());
  const int rr = ar > br ? ar : br;
  const int rc = ac > bc ? ac : bc;
  if (a.rank == 1 && b.rank == 1) return Shape::vec(rc);
  return Shape::mat(rr, rc);
}

inline double fetch(const Array& x, int i, int j) {
  const int r = x.shape.rows(), c = x.shape.cols();
  const int ii = r == 1 ? 0 : i;
  const int jj = c == 1 ? 0 : j;
  return x.v[static_cast<size_t>(ii) * c + jj];
}

// Accumulates `g` (shaped like the broadcast result) into `acc` (shaped like
// the original operand), summing over broadcast dimensions.
void reduce_into(Array& acc, const Array& g) {
  const int gr = g.shape.rows(), gc = g.shape.cols();
  const int ar = acc.shape.rows(), ac = acc.shape.cols();
  for (int i = 0; i < gr; ++i) {
    for (int j = 0; j < gc; ++j) {
      const int ii = ar == 1 ? 0 : i;
      const int jj = ac == 1 ? 0 : j;
      acc.v[static_cast<size_t>(ii) * ac + jj] += g.v[static_cast<size_t>(i) * gc + j];
    }
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kDot: return "dot";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kNegate: return "negate";
    case Op::kScale: return "scale";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kClip: return "clip";
    case Op::kSquare: return "square";
  }
  return "?";
}

Op op_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(Op::kSquare); ++k) {
    Op op = static_cast<Op>(k);
    if (name == op_name(op)) return op;
  }
  fail("unknown op_kind '" + name + "'");
}

std::string Shape::str() const {
  if (rank == 1) return "(" + std::to_string(d0) + ")";
  return "(" + std::to_string(d0) + "," + std::to_string(d1) + ")";
}

bool all_finite(const Array& a) {
  for (double x : a.v)
    if (!std::isfinite(x)) return false;
  return true;
}

void Graph::check_ref(NodeRef r, const char* ctx) const {
  if (r.id < 0 || r.id >= static_cast<int>(nodes_.size()))
    fail(std::string(ctx) + ": node ref " + std::to_string(r.id) + " does not belong to this graph");
}

NodeRef Graph::constant(Array value) {
  nodes_.push_back(Node{Op::kConstant, {}, value.shape, {}, true});
  values_.push_back(std::move(value));
  adjoints_.emplace_back();
  has_adjoint_.push_back(0);
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

NodeRef Graph::input(Shape shape) {
  nodes_.push_back(Node{Op::kConstant, {}, shape, {}, false});
  values_.emplace_back();
  adjoints_.emplace_back();
  has_adjoint_.push_back(0);
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

NodeRef Graph::parameter(Array value) {
  nodes_.push_back(Node{Op::kParameter, {}, value.shape, {}, true});
  values_.push_back(std::move(value));
  adjoints_.emplace_back();
  has_adjoint_.push_back(0);
  params_.push_back(static_cast<int>(nodes_.size()) - 1);
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

Shape Graph::infer_shape(Op op, std::span<const NodeRef> inputs, const OpAttrs& attrs) const {
  auto arity = [&](size_t n) {
    if (inputs.size() != n)
      fail(std::string(op_name(op)) + ": expected " + std::to_string(n) + " inputs, got " +
           std::to_string(inputs.size()));
  };
  auto in_shape = [&](size_t i) { return nodes_[inputs[i].id].shape; };

  switch (op) {
    case Op::kConstant:
    case Op::kParameter:
      fail("leaf nodes are created via constant()/input()/parameter()");
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      arity(2);
      return broadcast_shape(in_shape(0), in_shape(1), op_name(op));
    }
    case Op::kMatMul: {
      arity(2);
      Shape a = in_shape(0), b = in_shape(1);
      if (a.rank != 2) fail("matmul: left operand must be rank 2, got " + a.str());
      if (b.rank == 2) {
        if (a.d1 != b.d0) fail("matmul: shape mismatch " + a.str() + " x " + b.str());
        return Shape::mat(a.d0, b.d1);
      }
      if (a.d1 != b.d0) fail("matmul: shape mismatch " + a.str() + " x " + b.str());
      return Shape::vec(a.d0);
    }
    case Op::kSum: {
      arity(1);
      Shape a = in_shape(0);
      if (attrs.axis < 0) return Shape::vec(1);
      if (a.rank == 1) return Shape::vec(1);
      if (attrs.axis == 0) return Shape::mat(1, a.d1);
      if (attrs.axis == 1) return Shape::mat(a.d0, 1);
      fail("sum: axis must be -1, 0 or 1");
    }
    case Op::kDot: {
      arity(2);
      Shape a = in_shape(0), b = in_shape(1);
      if (a.rank != 1 || b.rank != 1 || a.d0 != b.d0)
        fail("dot: requires equal-length vectors, got " + a.str() + " and " + b.str());
      return Shape::vec(1);
    }
    case Op::kTanh:
    case Op::kExp:
    case Op::kLog:
    case Op::kNegate:
    case Op::kScale:
    case Op::kSquare:
    case Op::kClip: {
      arity(1);
      if (op == Op::kClip) {
        const Shape s = in_shape(0);
        auto check_bound = [&](const Array& b, const char* which) {
          if (b.numel() != 1 && !(b.shape == s))
            fail(std::string("clip: ") + which + " bound shape " + b.shape.str() +
                 " incompatible with input " + s.str());
        };
        check_bound(attrs.clip_lo, "lower");
        check_bound(attrs.clip_hi, "upper");
      }
      return in_shape(0);
    }
    case Op::kConcat: {
      if (inputs.empty()) fail("concat: needs at least one input");
      if (attrs.axis == 0) {
        int total = 0;
        for (size_t i = 0; i < inputs.size(); ++i) {
          Shape s = in_shape(i);
          if (s.rank != 1) fail("concat axis 0: all inputs must be vectors, got " + s.str());
          total += s.d0;
        }
        return Shape::vec(total);
      }
      if (attrs.axis == 1) {
        Shape first = in_shape(0);
        if (first.rank != 2) fail("concat axis 1: inputs must be matrices, got " + first.str());
        int cols = first.d1;
        for (size_t i = 1; i < inputs.size(); ++i) {
          Shape s = in_shape(i);
          if (s.rank != 2 || s.d0 != first.d0)
            fail("concat axis 1: row mismatch " + first.str() + " vs " + s.str());
          cols += s.d1;
        }
        return Shape::mat(first.d0, cols);
      }
      fail("concat: axis must be 0 or 1");
    }
    case Op::kSlice: {
      arity(1);
      Shape a = in_shape(0);
      const int axis = attrs.axis, start = attrs.start, len = attrs.len;
      if (len <= 0) fail("slice: len must be positive");
      if (a.rank == 1) {
        if (axis != 0 || start < 0 || start + len > a.d0)
          fail("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
               ") out of bounds for " + a.str());
        return Shape::vec(len);
      }
      if (axis == 0) {
        if (start < 0 || start + len > a.d0) fail("slice: row range out of bounds for " + a.str());
        return Shape::mat(len, a.d1);
      }
      if (axis == 1) {
        if (start < 0 || start + len > a.d1) fail("slice: col range out of bounds for " + a.str());
        return Shape::mat(a.d0, len);
      }
      fail("slice: axis must be 0 or 1");
    }
  }
  fail("unknown op_kind");
}

NodeRef Graph::add_node(Op op, std::span<const NodeRef> inputs, const OpAttrs& attrs) {
  for (NodeRef r : inputs) check_ref(r, op_name(op));
  Shape out = infer_shape(op, inputs, attrs);
  Node n{op, {}, out, attrs, true};
  n.inputs.reserve(inputs.size());
  for (NodeRef r : inputs) n.inputs.push_back(r.id);
  nodes_.push_back(std::move(n));
  values_.emplace_back();
  adjoints_.emplace_back();
  has_adjoint_.push_back(0);
  forward_done_ = false;
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

NodeRef Graph::add(NodeRef a, NodeRef b) { NodeRef in[] = {a, b}; return add_node(Op::kAdd, in); }
NodeRef Graph::sub(NodeRef a, NodeRef b) { NodeRef in[] = {a, b}; return add_node(Op::kSub, in); }
NodeRef Graph::mul(NodeRef a, NodeRef b) { NodeRef in[] = {a, b}; return add_node(Op::kMul, in); }
NodeRef Graph::matmul(NodeRef a, NodeRef b) { NodeRef in[] = {a, b}; return add_node(Op::kMatMul, in); }
NodeRef Graph::sum(NodeRef a, int axis) {
  OpAttrs at; at.axis = axis;
  NodeRef in[] = {a};
  return add_node(Op::kSum, in, at);
}
NodeRef Graph::dot(NodeRef a, NodeRef b) { NodeRef in[] = {a, b}; return add_node(Op::kDot, in); }
NodeRef Graph::tanh(NodeRef a) { NodeRef in[] = {a}; return add_node(Op::kTanh, in); }
NodeRef Graph::exp(NodeRef a) { NodeRef in[] = {a}; return add_node(Op::kExp, in); }
NodeRef Graph::log(NodeRef a) { NodeRef in[] = {a}; return add_node(Op::kLog, in); }
NodeRef Graph::negate(NodeRef a) { NodeRef in[] = {a}; return add_node(Op::kNegate, in); }
NodeRef Graph::scale(NodeRef a, double c) {
  OpAttrs at; at.scale = c;
  NodeRef in[] = {a};
  return add_node(Op::kScale, in, at);
}
NodeRef Graph::concat(std::span<const NodeRef> parts, int axis) {
  OpAttrs at; at.axis = axis;
  return add_node(Op::kConcat, parts, at);
}
NodeRef Graph::slice(NodeRef a, int axis, int start, int len) {
  OpAttrs at; at.axis = axis; at.start = start; at.len = len;
  NodeRef in[] = {a};
  return add_node(Op::kSlice, in, at);
}
NodeRef Graph::clip(NodeRef a, double lo, double hi) {
  OpAttrs at; at.clip_lo = Array::scalar(lo); at.clip_hi = Array::scalar(hi);
  NodeRef in[] = {a};
  return add_node(Op::kClip, in, at);
}
NodeRef Graph::clip(NodeRef a, Array lo, Array hi) {
  OpAttrs at; at.clip_lo = std::move(lo); at.clip_hi = std::move(hi);
  NodeRef in[] = {a};
  return add_node(Op::kClip, in, at);
}
NodeRef Graph::square(NodeRef a) { NodeRef in[] = {a}; return add_node(Op::kSquare, in); }

NodeRef Graph::softplus(NodeRef a) {
  NodeRef one = constant(Array::full(nodes_[a.id].shape, 1.0));
  return log(add(one, exp(a)));
}

void Graph::set_value(NodeRef r, Array value) {
  check_ref(r, "set_value");
  Node& n = nodes_[r.id];
  if (n.op != Op::kConstant && n.op != Op::kParameter) fail("set_value: node is not a leaf");
  if (!(value.shape == n.shape))
    fail("set_value: shape " + value.shape.str() + " does not match declared " + n.shape.str());
  values_[r.id] = std::move(value);
  n.bound = true;
  forward_done_ = false;
}

void Graph::eval_node(int id) {
  const Node& n = nodes_[id];
  const auto in = [&](size_t i) -> const Array& { return values_[n.inputs[i]]; };
  Array& out = values_[id];
  out.shape = n.shape;
  out.v.assign(static_cast<size_t>(n.shape.numel()), 0.0);

  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      fail("leaf evaluation should not be dispatched");
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Array& a = in(0);
      const Array& b = in(1);
      const int r = n.shape.rows(), c = n.shape.cols();
      size_t k = 0;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j, ++k) {
          const double x = fetch(a, i, j), y = fetch(b, i, j);
          out.v[k] = n.op == Op::kAdd ? x + y : n.op == Op::kSub ? x - y : x * y;
        }
      break;
    }
    case Op::kMatMul: {
      const Array& a = in(0);
      const Array& b = in(1);
      const int p = b.shape.rank == 2 ? b.shape.d1 : 1;
      MatMap ma(a.v.data(), a.shape.d0, a.shape.d1);
      MatMap mb(b.v.data(), b.shape.d0, p);
      MutMatMap mo(out.v.data(), a.shape.d0, p);
      mo.noalias() = ma * mb;
      break;
    }
    case Op::kSum: {
      const Array& a = in(0);
      if (n.attrs.axis < 0 || a.shape.rank == 1) {
        double s = 0.0;
        for (double x : a.v) s += x;
        out.v[0] = s;
      } else if (n.attrs.axis == 0) {
        for (int i = 0; i < a.shape.d0; ++i)
          for (int j = 0; j < a.shape.d1; ++j) out.v[static_cast<size_t>(j)] += a.at(i, j);
      } else {
        for (int i = 0; i < a.shape.d0; ++i) {
          double s = 0.0;
          for (int j = 0; j < a.shape.d1; ++j) s += a.at(i, j);
          out.v[static_cast<size_t>(i)] = s;
        }
      }
      break;
    }
    case Op::kDot: {
      const Array& a = in(0);
      const Array& b = in(1);
      double s = 0.0;
      for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
      out.v[0] = s;
      break;
    }
    case Op::kTanh: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = std::tanh(a.v[i]);
      break;
    }
    case Op::kExp: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = std::exp(a.v[i]);
      break;
    }
    case Op::kLog: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = std::log(a.v[i]);
      break;
    }
    case Op::kNegate: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = -a.v[i];
      break;
    }
    case Op::kScale: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = n.attrs.scale * a.v[i];
      break;
    }
    case Op::kConcat: {
      size_t k = 0;
      if (n.attrs.axis == 0) {
        for (int src : n.inputs)
          for (double x : values_[src].v) out.v[k++] = x;
      } else {
        const int rows = n.shape.d0;
        for (int i = 0; i < rows; ++i)
          for (int src : n.inputs) {
            const Array& a = values_[src];
            for (int j = 0; j < a.shape.d1; ++j) out.v[k++] = a.at(i, j);
          }
      }
      break;
    }
    case Op::kSlice: {
      const Array& a = in(0);
      if (a.shape.rank == 1) {
        for (int i = 0; i < n.attrs.len; ++i) out.v[static_cast<size_t>(i)] = a.at(n.attrs.start + i);
      } else if (n.attrs.axis == 0) {
        size_t k = 0;
        for (int i = n.attrs.start; i < n.attrs.start + n.attrs.len; ++i)
          for (int j = 0; j < a.shape.d1; ++j) out.v[k++] = a.at(i, j);
      } else {
        size_t k = 0;
        for (int i = 0; i < a.shape.d0; ++i)
          for (int j = n.attrs.start; j < n.attrs.start + n.attrs.len; ++j) out.v[k++] = a.at(i, j);
      }
      break;
    }
    case Op::kClip: {
      const Array& a = in(0);
      const Array& lo = n.attrs.clip_lo;
      const Array& hi = n.attrs.clip_hi;
      const bool lo_scalar = lo.numel() == 1, hi_scalar = hi.numel() == 1;
      for (size_t i = 0; i < a.v.size(); ++i) {
        const double l = lo_scalar ? lo.v[0] : lo.v[i];
        const double h = hi_scalar ? hi.v[0] : hi.v[i];
        out.v[i] = a.v[i] < l ? l : (a.v[i] > h ? h : a.v[i]);
      }
      break;
    }
    case Op::kSquare: {
      const Array& a = in(0);
      for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * a.v[i];
      break;
    }
  }
}

void Graph::forward() { forward({}); }

void Graph::forward(const std::map<int, Array>& bindings) {
  for (const auto& [id, arr] : bindings) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      fail("forward: binding for unknown node " + std::to_string(id));
    set_value(NodeRef{id}, arr);
  }
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    const Node& n = nodes_[id];
    if (n.op == Op::kConstant || n.op == Op::kParameter) {
      if (!n.bound)
        throw std::runtime_error("forward: leaf node " + std::to_string(id) + " of shape " +
                                 n.shape.str() + " is unbound");
      continue;
    }
    eval_node(id);
  }
  forward_done_ = true;
}

void Graph::backprop_node(int id) {
  const Node& n = nodes_[id];
  const Array& g = adjoints_[id];
  auto adj = [&](size_t i) -> Array& {
    const int src = n.inputs[i];
    if (!has_adjoint_[src]) {
      adjoints_[src] = Array::zeros(nodes_[src].shape);
      has_adjoint_[src] = 1;
    }
    return adjoints_[src];
  };
  const auto in = [&](size_t i) -> const Array& { return values_[n.inputs[i]]; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      return;
    case Op::kAdd: {
      reduce_into(adj(0), g);
      reduce_into(adj(1), g);
      break;
    }
    case Op::kSub: {
      reduce_into(adj(0), g);
      Array neg = g;
      for (auto& x : neg.v) x = -x;
      reduce_into(adj(1), neg);
      break;
    }
    case Op::kMul: {
      const Array& a = in(0);
      const Array& b = in(1);
      const int r = n.shape.rows(), c = n.shape.cols();
      Array ga(n.shape.rank == 1 ? Shape::vec(c) : Shape::mat(r, c));
      Array gb = ga;
      size_t k = 0;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j, ++k) {
          ga.v[k] = g.v[k] * fetch(b, i, j);
          gb.v[k] = g.v[k] * fetch(a, i, j);
        }
      reduce_into(adj(0), ga);
      reduce_into(adj(1), gb);
      break;
    }
    case Op::kMatMul: {
      const Array& a = in(0);
      const Array& b = in(1);
      const int m = a.shape.d0, kdim = a.shape.d1;
      const int p = b.shape.rank == 2 ? b.shape.d1 : 1;
      MatMap ma(a.v.data(), m, kdim);
      MatMap mb(b.v.data(), kdim, p);
      MatMap mg(g.v.data(), m, p);
      MutMatMap mga(adj(0).v.data(), m, kdim);
      MutMatMap mgb(adj(1).v.data(), kdim, p);
      mga.noalias() += mg * mb.transpose();
      mgb.noalias() += ma.transpose() * mg;
      break;
    }
    case Op::kSum: {
      Array& ga = adj(0);
      const Shape as = nodes_[n.inputs[0]].shape;
      if (n.attrs.axis < 0 || as.rank == 1) {
        for (auto& x : ga.v) x += g.v[0];
      } else if (n.attrs.axis == 0) {
        for (int i = 0; i < as.d0; ++i)
          for (int j = 0; j < as.d1; ++j) ga.at(i, j) += g.v[static_cast<size_t>(j)];
      } else {
        for (int i = 0; i < as.d0; ++i)
          for (int j = 0; j < as.d1; ++j) ga.at(i, j) += g.v[static_cast<size_t>(i)];
      }
      break;
    }
    case Op::kDot: {
      const Array& a = in(0);
      const Array& b = in(1);
      Array& ga = adj(0);
      Array& gb = adj(1);
      for (size_t i = 0; i < a.v.size(); ++i) {
        ga.v[i] += g.v[0] * b.v[i];
        gb.v[i] += g.v[0] * a.v[i];
      }
      break;
    }
    case Op::kTanh: {
      const Array& y = values_[id];
      Array& ga = adj(0);
      for (size_t i = 0; i < y.v.size(); ++i) ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
      break;
    }
    case Op::kExp: {
      const Array& y = values_[id];
      Array& ga = adj(0);
      for (size_t i = 0; i < y.v.size(); ++i) ga.v[i] += g.v[i] * y.v[i];
      break;
    }
    case Op::kLog: {
      const Array& a = in(0);
      Array& ga = adj(0);
      for (size_t i = 0; i < a.v.size(); ++i) ga.v[i] += g.v[i] / a.v[i];
      break;
    }
    case Op::kNegate: {
      Array& ga = adj(0);
      for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] -= g.v[i];
      break;
    }
    case Op::kScale: {
      Array& ga = adj(0);
      for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += n.attrs.scale * g.v[i];
      break;
    }
    case Op::kConcat: {
      if (n.attrs.axis == 0) {
        size_t k = 0;
        for (size_t s = 0; s < n.inputs.size(); ++s) {
          Array& ga = adj(s);
          for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[k++];
        }
      } else {
        const int rows = n.shape.d0;
        size_t k = 0;
        for (int i = 0; i < rows; ++i)
          for (size_t s = 0; s < n.inputs.size(); ++s) {
            Array& ga = adj(s);
            const int cols = ga.shape.d1;
            for (int j = 0; j < cols; ++j) ga.at(i, j) += g.v[k++];
          }
      }
      break;
    }
    case Op::kSlice: {
      Array& ga = adj(0);
      const Shape as = ga.shape;
      if (as.rank == 1) {
        for (int i = 0; i < n.attrs.len; ++i) ga.at(n.attrs.start + i) += g.v[static_cast<size_t>(i)];
      } else if (n.attrs.axis == 0) {
        size_t k = 0;
        for (int i = 0; i < n.attrs.len; ++i)
          for (int j = 0; j < as.d1; ++j) ga.at(n.attrs.start + i, j) += g.v[k++];
      } else {
        size_t k = 0;
        for (int i = 0; i < as.d0; ++i)
          for (int j = 0; j < n.attrs.len; ++j) ga.at(i, n.attrs.start + j) += g.v[k++];
      }
      break;
    }
    case Op::kClip: {
      const Array& a = in(0);
      const Array& lo = n.attrs.clip_lo;
      const Array& hi = n.attrs.clip_hi;
      const bool lo_scalar = lo.numel() == 1, hi_scalar = hi.numel() == 1;
      Array& ga = adj(0);
      // Identity inside [lo, hi] including endpoints, zero outside.
      for (size_t i = 0; i < a.v.size(); ++i) {
        const double l = lo_scalar ? lo.v[0] : lo.v[i];
        const double h = hi_scalar ? hi.v[0] : hi.v[i];
        if (a.v[i] >= l && a.v[i] <= h) ga.v[i] += g.v[i];
      }
      break;
    }
    case Op::kSquare: {
      const Array& a = in(0);
      Array& ga = adj(0);
      for (size_t i = 0; i < a.v.size(); ++i) ga.v[i] += 2.0 * a.v[i] * g.v[i];
      break;
    }
  }
}

void Graph::backward(NodeRef output) {
  check_ref(output, "backward");
  if (!forward_done_) throw std::runtime_error("backward: forward() has not been run");
  if (nodes_[output.id].shape.numel() != 1)
    throw std::runtime_error("backward: output must be scalar-shaped, got " +
                             nodes_[output.id].shape.str());
  for (size_t i = 0; i < adjoints_.size(); ++i) has_adjoint_[i] = 0;
  adjoints_[output.id] = Array::full(nodes_[output.id].shape, 1.0);
  has_adjoint_[output.id] = 1;
  for (int id = output.id; id >= 0; --id) {
    if (!has_adjoint_[id]) continue;
    backprop_node(id);
  }
  // Parameters untouched by the output keep a zero adjoint.
  for (int p : params_) {
    if (!has_adjoint_[p]) {
      adjoints_[p] = Array::zeros(nodes_[p].shape);
      has_adjoint_[p] = 1;
    }
  }
}

const Array& Graph::value(NodeRef r) const {
  check_ref(r, "value");
  return values_[r.id];
}

const Array& Graph::adjoint(NodeRef r) const {
  check_ref(r, "adjoint");
  if (!has_adjoint_[r.id]) throw std::runtime_error("adjoint: backward() has not touched this node");
  return adjoints_[r.id];
}

Shape Graph::shape(NodeRef r) const {
  check_ref(r, "shape");
  return nodes_[r.id].shape;
}

}  // namespace hwopt
