#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "hwopt/graph.hpp"
#include "hwopt/mlp.hpp"
#include "hwopt/oracle.hpp"
#include "hwopt/rng.hpp"

using namespace hwopt;

namespace {

// Flattens all parameter values of a graph-building closure, evaluates the
// scalar output, and cross-checks backward() against central differences.
void check_gradients(const std::function<double(std::span<const double>, std::vector<double>*)>& f,
                     std::span<const double> x0, double rel_tol = 1e-5, double abs_floor = 1e-8) {
  std::vector<double> analytic;
  f(x0, &analytic);
  oracle::FiniteDiffSpec spec;
  spec.rel_tol = rel_tol;
  spec.abs_floor = abs_floor;
  auto scalar_f = [&](std::span<const double> x) { return f(x, nullptr); };
  const std::vector<double> numeric = oracle::finite_diff_grad(scalar_f, x0, spec);
  REQUIRE(analytic.size() == numeric.size());
  for (size_t i = 0; i < numeric.size(); ++i) {
    INFO("coordinate ", i, ": analytic ", analytic[i], " vs numeric ", numeric[i]);
    CHECK(oracle::grad_close(analytic[i], numeric[i], spec));
  }
}

}  // namespace

TEST_CASE("add of constants evaluates elementwise") {
  Graph g;
  NodeRef a = g.constant(Array::vec({1, 2}));
  NodeRef b = g.constant(Array::vec({3, 4}));
  NodeRef c = g.add(a, b);
  g.forward();
  CHECK(g.value(c).at(0) == 4.0);
  CHECK(g.value(c).at(1) == 6.0);
}

TEST_CASE("matmul shape algebra") {
  Graph g;
  NodeRef a = g.constant(Array::mat(2, 3, {1, 2, 3, 4, 5, 6}));
  NodeRef b = g.constant(Array::mat(3, 1, {1, 0, 1}));
  NodeRef c = g.matmul(a, b);
  CHECK(g.shape(c) == Shape::mat(2, 1));
  g.forward();
  CHECK(g.value(c).at(0, 0) == 4.0);
  CHECK(g.value(c).at(1, 0) == 10.0);
}

TEST_CASE("concat length additivity") {
  Graph g;
  NodeRef a = g.constant(Array::vec({1, 2, 3}));
  NodeRef b = g.constant(Array::vec({4, 5}));
  NodeRef parts[] = {a, b};
  NodeRef c = g.concat(parts);
  CHECK(g.shape(c) == Shape::vec(5));
  g.forward();
  CHECK(g.value(c).at(3) == 4.0);
}

TEST_CASE("shape mismatch raises a construction error naming both shapes") {
  Graph g;
  NodeRef a = g.constant(Array::vec({1, 2, 3}));
  NodeRef b = g.constant(Array::vec({1, 2}));
  CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("(3)"), std::invalid_argument);
  CHECK_THROWS_AS(g.matmul(g.constant(Array::mat(2, 3, std::vector<double>(6, 0.0))),
                           g.constant(Array::mat(2, 2, std::vector<double>(4, 0.0)))),
                  std::invalid_argument);
}

TEST_CASE("unknown op kind is rejected") {
  CHECK_THROWS_AS(op_from_name("frobnicate"), std::invalid_argument);
  CHECK(op_from_name("matmul") == Op::kMatMul);
}

TEST_CASE("foreign node refs are rejected") {
  Graph g1, g2;
  NodeRef a = g1.constant(Array::vec({1}));
  (void)a;
  NodeRef bad{42};
  CHECK_THROWS_AS(g2.negate(bad), std::invalid_argument);
}

TEST_CASE("forward of x^2 and tanh(0)") {
  Graph g;
  NodeRef x = g.constant(Array::scalar(3.0));
  NodeRef y = g.square(x);
  NodeRef t = g.tanh(g.constant(Array::scalar(0.0)));
  g.forward();
  CHECK(g.value(y).at(0) == 9.0);
  CHECK(g.value(t).at(0) == 0.0);
}

TEST_CASE("unbound input leaf fails forward with the leaf named") {
  Graph g;
  NodeRef x = g.input(Shape::vec(2));
  NodeRef y = g.sum(g.square(x));
  (void)y;
  CHECK_THROWS_WITH_AS(g.forward(), doctest::Contains("leaf node 0"), std::runtime_error);
  std::map<int, Array> bind{{x.id, Array::vec({3, 4})}};
  g.forward(bind);
  CHECK(g.value(y).at(0) == 25.0);
}

TEST_CASE("two-layer MLP forward matches a straight-line reimplementation") {
  Rng rng(7);
  const int widths[] = {3, 5, 4, 2};
  MlpPolicy mlp = MlpPolicy::make(widths, rng);
  const std::vector<double> obs = {0.3, -1.2, 0.7};

  // Independent straight-line chain, no graph engine.
  std::vector<double> h(obs.begin(), obs.end());
  for (int layer = 0; layer < mlp.n_layers(); ++layer) {
    std::vector<double> z(static_cast<size_t>(mlp.widths[layer + 1]), 0.0);
    for (int j = 0; j < mlp.widths[layer + 1]; ++j) {
      double acc = mlp.b[layer].at(j);
      for (int i = 0; i < mlp.widths[layer]; ++i) acc += h[static_cast<size_t>(i)] * mlp.w[layer].at(i, j);
      z[static_cast<size_t>(j)] = layer + 1 < mlp.n_layers() ? std::tanh(acc) : acc;
    }
    h = std::move(z);
  }

  const std::vector<double> out = mlp.forward(obs);
  REQUIRE(out.size() == 2);
  for (int j = 0; j < 2; ++j) CHECK(out[static_cast<size_t>(j)] == doctest::Approx(h[static_cast<size_t>(j)]).epsilon(1e-12));

  // Graph path agrees too.
  Graph g;
  Array obs_mat(Shape::mat(1, 3));
  for (int c = 0; c < 3; ++c) obs_mat.at(0, c) = obs[static_cast<size_t>(c)];
  MlpGraph mg = build_mlp_graph(g, mlp, g.constant(obs_mat));
  g.forward();
  for (int j = 0; j < 2; ++j) CHECK(g.value(mg.out).at(0, j) == doctest::Approx(h[static_cast<size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("backward: power rule and product rule") {
  {
    Graph g;
    NodeRef x = g.parameter(Array::scalar(3.0));
    NodeRef y = g.square(x);
    g.forward();
    g.backward(y);
    CHECK(g.adjoint(x).at(0) == 6.0);
  }
  {
    Graph g;
    NodeRef a = g.parameter(Array::scalar(2.0));
    NodeRef b = g.parameter(Array::scalar(5.0));
    NodeRef y = g.mul(a, b);
    g.forward();
    g.backward(y);
    CHECK(g.adjoint(a).at(0) == 5.0);
    CHECK(g.adjoint(b).at(0) == 2.0);
  }
}

TEST_CASE("backward requires forward and a scalar output") {
  Graph g;
  NodeRef x = g.parameter(Array::vec({1, 2}));
  NodeRef y = g.square(x);
  CHECK_THROWS_AS(g.backward(y), std::runtime_error);  // before forward
  g.forward();
  CHECK_THROWS_AS(g.backward(y), std::runtime_error);  // non-scalar
  NodeRef s = g.sum(y);
  g.forward();
  g.backward(s);
  CHECK(g.adjoint(x).at(0) == 2.0);
  CHECK(g.adjoint(x).at(1) == 4.0);
}

TEST_CASE("random tanh MLP gradients match central finite differences") {
  Rng rng(21);
  const int widths[] = {2, 32, 32, 1};
  MlpPolicy mlp = MlpPolicy::make(widths, rng);
  Array obs_mat(Shape::mat(1, 2));
  obs_mat.at(0, 0) = 0.4;
  obs_mat.at(0, 1) = -0.9;

  std::vector<double> x0;
  for (int l = 0; l < mlp.n_layers(); ++l) {
    x0.insert(x0.end(), mlp.w[l].v.begin(), mlp.w[l].v.end());
    x0.insert(x0.end(), mlp.b[l].v.begin(), mlp.b[l].v.end());
  }
  auto f = [&](std::span<const double> x, std::vector<double>* grad_out) {
    MlpPolicy m = mlp;
    size_t k = 0;
    for (int l = 0; l < m.n_layers(); ++l) {
      for (auto& v : m.w[l].v) v = x[k++];
      for (auto& v : m.b[l].v) v = x[k++];
    }
    Graph g;
    MlpGraph mg = build_mlp_graph(g, m, g.constant(obs_mat));
    NodeRef out = g.sum(mg.out);
    g.forward();
    if (grad_out) {
      g.backward(out);
      grad_out->clear();
      for (NodeRef p : mg.params) {
        const Array& ga = g.adjoint(p);
        grad_out->insert(grad_out->end(), ga.v.begin(), ga.v.end());
      }
    }
    return g.value(out).at(0);
  };
  check_gradients(f, x0);
}

TEST_CASE("gradient linearity in the output") {
  // backward of alpha*f + beta*g equals alpha*grad(f) + beta*grad(g).
  Rng rng(5);
  Array p0(Shape::vec(4));
  for (auto& v : p0.v) v = rng.normal();
  const double alpha = 1.7, beta = -0.6;

  auto run = [&](double ca, double cb) {
    Graph g;
    NodeRef p = g.parameter(p0);
    NodeRef f = g.sum(g.square(p));           // f = sum p^2
    NodeRef h = g.sum(g.mul(p, g.tanh(p)));   // g = sum p*tanh(p)
    NodeRef combo = g.add(g.scale(f, ca), g.scale(h, cb));
    g.forward();
    g.backward(combo);
    return g.adjoint(p).v;
  };
  const auto gf = run(1.0, 0.0);
  const auto gh = run(0.0, 1.0);
  const auto gc = run(alpha, beta);
  for (size_t i = 0; i < gc.size(); ++i)
    CHECK(gc[i] == doctest::Approx(alpha * gf[i] + beta * gh[i]).epsilon(1e-12));
}

TEST_CASE("forward determinism is bitwise") {
  Rng rng(11);
  const int widths[] = {3, 16, 16, 2};
  MlpPolicy mlp = MlpPolicy::make(widths, rng);
  Array obs(Shape::mat(4, 3));
  for (auto& v : obs.v) v = rng.normal();
  std::vector<double> first;
  for (int rep = 0; rep < 3; ++rep) {
    Graph g;
    MlpGraph mg = build_mlp_graph(g, mlp, g.constant(obs));
    NodeRef out = g.sum(g.square(mg.out));
    g.forward();
    if (rep == 0) {
      first = g.value(out).v;
    } else {
      CHECK(std::memcmp(first.data(), g.value(out).v.data(), sizeof(double) * first.size()) == 0);
    }
  }
}

TEST_CASE("clip gradient is zero outside and identity inside, boundary from interior") {
  Graph g;
  NodeRef x = g.parameter(Array::vec({-2.0, -1.0, 0.5, 1.0, 3.0}));
  NodeRef y = g.sum(g.clip(x, -1.0, 1.0));
  g.forward();
  g.backward(y);
  const Array& gx = g.adjoint(x);
  CHECK(gx.at(0) == 0.0);  // below range
  CHECK(gx.at(1) == 1.0);  // at the lower boundary
  CHECK(gx.at(2) == 1.0);
  CHECK(gx.at(3) == 1.0);  // at the upper boundary
  CHECK(gx.at(4) == 0.0);  // above range
}

TEST_CASE("broadcast add/mul backward reduces over broadcast axes") {
  auto f = [&](std::span<const double> x, std::vector<double>* grad_out) {
    Array bias(Shape::vec(3), {x[0], x[1], x[2]});
    Graph g;
    NodeRef b = g.parameter(bias);
    Array m(Shape::mat(4, 3));
    for (int i = 0; i < 12; ++i) m.v[static_cast<size_t>(i)] = 0.1 * i - 0.5;
    NodeRef mm = g.constant(m);
    NodeRef out = g.sum(g.square(g.add(g.mul(mm, b), b)));
    g.forward();
    if (grad_out) {
      g.backward(out);
      *grad_out = g.adjoint(b).v;
    }
    return g.value(out).at(0);
  };
  const std::vector<double> x0 = {0.3, -0.8, 1.2};
  check_gradients(f, x0);
}

TEST_CASE("slice, concat, dot, exp, log gradients") {
  auto f = [&](std::span<const double> x, std::vector<double>* grad_out) {
    Graph g;
    NodeRef p = g.parameter(Array::vec({x[0], x[1], x[2], x[3]}));
    NodeRef head = g.slice(p, 0, 0, 2);
    NodeRef tail = g.slice(p, 0, 2, 2);
    NodeRef d = g.dot(head, tail);
    NodeRef e = g.sum(g.exp(g.scale(p, 0.3)));
    NodeRef l = g.log(g.add(g.sum(g.square(p)), g.constant(Array::scalar(1.0))));
    NodeRef parts[] = {d, e, l};
    NodeRef out = g.sum(g.concat(parts));
    g.forward();
    if (grad_out) {
      g.backward(out);
      *grad_out = g.adjoint(p).v;
    }
    return g.value(out).at(0);
  };
  const std::vector<double> x0 = {0.5, -1.1, 0.8, 0.2};
  check_gradients(f, x0);
}

TEST_CASE("gradient exactness on randomized graphs") {
  // 100 random small graphs mixing the supported ops.
  Rng master(12345);
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = master.split("trial", static_cast<std::uint64_t>(trial));
    const int n = 3 + rng.uniform_int(4);
    std::vector<double> x0(static_cast<size_t>(n));
    for (auto& v : x0) v = rng.normal();
    const int variant = rng.uniform_int(3);

    auto f = [&](std::span<const double> x, std::vector<double>* grad_out) {
      Graph g;
      Array px(Shape::vec(n));
      for (int i = 0; i < n; ++i) px.at(i) = x[static_cast<size_t>(i)];
      NodeRef p = g.parameter(px);
      NodeRef out;
      if (variant == 0) {
        out = g.sum(g.mul(g.tanh(p), g.exp(g.scale(p, 0.2))));
      } else if (variant == 1) {
        NodeRef q = g.clip(p, -0.8, 0.9);
        out = g.add(g.dot(q, q), g.sum(g.square(g.negate(p))));
      } else {
        NodeRef sp = g.softplus(p);
        out = g.sum(g.log(g.add(sp, g.constant(Array::full(Shape::vec(n), 0.5)))));
      }
      g.forward();
      if (grad_out) {
        g.backward(out);
        *grad_out = g.adjoint(p).v;
      }
      return g.value(out).at(0);
    };
    check_gradients(f, x0);
  }
}
