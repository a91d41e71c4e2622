#include "hwopt/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace hwopt::oracle {

double optimal_stiffness(double m1, double m2, double g, double h, double l) {
  if (h <= l) throw std::invalid_argument("optimal_stiffness: requires h > l");
  return (m1 + m2) * g / (h - l);
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, const FiniteDiffSpec& spec) {
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> grad(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + spec.step;
    const double fp = f(xp);
    xp[i] = orig - spec.step;
    const double fm = f(xp);
    xp[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * spec.step);
  }
  return grad;
}

bool grad_close(double a, double b, const FiniteDiffSpec& spec) {
  const double mag = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= std::max(spec.abs_floor, spec.rel_tol * mag);
}

std::vector<ToyState> rk4_reference(ToyState s0,
                                    const std::function<double(double, double, double)>& force_fn,
                                    double mass, double g, double dt, int steps) {
  std::vector<ToyState> traj;
  traj.reserve(static_cast<size_t>(steps) + 1);
  traj.push_back(s0);
  auto accel = [&](double t, double y, double v) { return g + force_fn(t, y, v) / mass; };
  ToyState s = s0;
  double t = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double k1y = s.v;
    const double k1v = accel(t, s.y, s.v);
    const double k2y = s.v + 0.5 * dt * k1v;
    const double k2v = accel(t + 0.5 * dt, s.y + 0.5 * dt * k1y, s.v + 0.5 * dt * k1v);
    const double k3y = s.v + 0.5 * dt * k2v;
    const double k3v = accel(t + 0.5 * dt, s.y + 0.5 * dt * k2y, s.v + 0.5 * dt * k2v);
    const double k4y = s.v + dt * k3v;
    const double k4v = accel(t + dt, s.y + dt * k3y, s.v + dt * k3v);
    s.y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    s.v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    t += dt;
    traj.push_back(s);
  }
  return traj;
}

}  // namespace hwopt::oracle
