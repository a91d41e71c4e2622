#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hwopt::oracle {

// Deliberately simple reference implementations used by tests. Nothing here
// may call into the graph engine, policies or training code.

struct FiniteDiffSpec {
  double step = 1e-5;
  double rel_tol = 1e-5;
  double abs_floor = 1e-8;
};

// Quasi-static total stiffness that lets gravity hold the lower mass at the
// target height: k* = (m1 + m2) * g / (h - l). Requires h > l.
double optimal_stiffness(double m1, double m2, double g, double h, double l);

// Central finite differences of a scalar function, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, const FiniteDiffSpec& spec = {});

// True when |a - b| <= max(abs_floor, rel_tol * max(|a|, |b|)).
bool grad_close(double a, double b, const FiniteDiffSpec& spec = {});

struct ToyState {
  double y = 0.0;
  double v = 0.0;
};

// Classical RK4 on y'' = g + f(t, y, v) / mass, sampled every dt. Returns the
// trajectory including the initial state (steps + 1 entries).
std::vector<ToyState> rk4_reference(ToyState s0,
                                    const std::function<double(double, double, double)>& force_fn,
                                    double mass, double g, double dt, int steps);

}  // namespace hwopt::oracle
