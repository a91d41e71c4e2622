#include "hwopt/hardware.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hwopt {

double softplus(double x) { return std::log(1.0 + std::exp(x)); }

double inv_softplus(double y) {
  if (y <= 0.0) throw std::invalid_argument("inv_softplus: requires y > 0");
  if (y > 30.0) return y;  // softplus(y) == y to double precision
  return std::log(std::exp(y) - 1.0);
}

void clamp_raw(Array& raw, const ParamRange& range) {
  const double hi_raw = inv_softplus(range.hi);
  const bool has_lo = range.lo > 0.0;
  const double lo_raw = has_lo ? inv_softplus(range.lo) : -std::numeric_limits<double>::infinity();
  for (auto& x : raw.v) {
    if (x > hi_raw) x = hi_raw;
    if (has_lo && x < lo_raw) x = lo_raw;
  }
}

// ---------------------------------------------------------------- springs --

std::vector<double> SpringStackParams::stiffnesses() const {
  std::vector<double> k(raw_k.v.size());
  for (size_t i = 0; i < k.size(); ++i) k[i] = softplus(raw_k.v[i]);
  return k;
}

double SpringStackParams::total_stiffness() const {
  double s = 0.0;
  for (double x : raw_k.v) s += softplus(x);
  return s;
}

double SpringStackParams::force(double y1, double i) const {
  return k_T * i / r_shaft - total_stiffness() * y1;
}

SpringStackParams::GraphOut SpringStackParams::build(Graph& g, NodeRef i_col, NodeRef y1_col) const {
  GraphOut out;
  out.raw_k = g.parameter(raw_k);
  NodeRef sum_k = g.sum(g.softplus(out.raw_k));           // (1,)
  NodeRef f_str = g.scale(i_col, k_T / r_shaft);          // (B,1)
  NodeRef f_spr = g.mul(y1_col, sum_k);                   // (B,1)
  out.force = g.sub(f_str, f_spr);
  return out;
}

// ------------------------------------------------------------- bar lengths --

std::vector<double> BarInterfaceParams::lengths() const {
  std::vector<double> l(raw_l.v.size());
  for (size_t i = 0; i < l.size(); ++i) l[i] = softplus(raw_l.v[i]);
  return l;
}

double BarInterfaceParams::total_length() const {
  double s = 0.0;
  for (double x : raw_l.v) s += softplus(x);
  return s;
}

std::pair<double, double> BarInterfaceParams::forces(double y1, double y2, double v1,
                                                     double v2) const {
  const double f = 0.5 * k_interf * (y2 - y1 - total_length()) + 0.5 * b_interf * (v2 - v1);
  return {f, -f};
}

BarInterfaceParams::GraphOut BarInterfaceParams::build(Graph& g, NodeRef y1, NodeRef y2,
                                                       NodeRef v1, NodeRef v2) const {
  GraphOut out;
  out.raw_l = g.parameter(raw_l);
  NodeRef sum_l = g.sum(g.softplus(out.raw_l));                      // (1,)
  NodeRef stretch = g.sub(g.sub(y2, y1), sum_l);                     // (B,1)
  NodeRef rel_v = g.sub(v2, v1);                                     // (B,1)
  out.f_interf = g.add(g.scale(stretch, 0.5 * k_interf), g.scale(rel_v, 0.5 * b_interf));
  return out;
}

// ----------------------------------------------------------------- tendons --

std::vector<double> TendonParams::pulley_radii() const {
  std::vector<double> r(raw_r.v.size());
  for (size_t i = 0; i < r.size(); ++i) r[i] = softplus(raw_r.v[i]);
  return r;
}

std::vector<double> TendonParams::spring_stiffness() const {
  std::vector<double> k(raw_k.v.size());
  for (size_t i = 0; i < k.size(); ++i) k[i] = softplus(raw_k.v[i]);
  return k;
}

std::vector<double> TendonParams::preload_angles() const {
  std::vector<double> p(raw_pre.v.size());
  for (size_t i = 0; i < p.size(); ++i) p[i] = softplus(raw_pre.v[i]);
  return p;
}

double TendonParams::tendon_force(double dx_mot, double x_mot,
                                  std::span<const double> theta) const {
  const auto r = pulley_radii();
  // Elongation in bench length units (mm when unit_scale = 1e-3).
  double delta = (x_mot + dx_mot) / unit_scale;
  for (size_t j = 0; j < r.size(); ++j) delta += r[j] * (theta_ref.at(static_cast<int>(j)) - theta[j]);
  const double k_tend = k_tend_si * unit_scale;  // N per bench length unit
  const double slack = delta < 0.0 ? 0.0 : delta;
  return k_tend * slack;
}

std::vector<double> TendonParams::torques_scaled(double dx_mot, double x_mot,
                                                 std::span<const double> theta) const {
  const auto r = pulley_radii();
  const auto k = spring_stiffness();
  const auto pre = preload_angles();
  const double f = tendon_force(dx_mot, x_mot, theta);
  std::vector<double> tau(4, 0.0);
  for (int j = 0; j < 4; ++j) tau[j] = f * r[j] - k[j] * (theta[j] + pre[j]);
  return tau;
}

TendonParams::GraphOut TendonParams::build(Graph& g, NodeRef dx_col, NodeRef x_col,
                                           NodeRef theta) const {
  GraphOut out;
  out.raw_r = g.parameter(raw_r);
  out.raw_k = g.parameter(raw_k);
  out.raw_pre = g.parameter(raw_pre);
  NodeRef r = g.softplus(out.raw_r);      // (4,) bench units
  NodeRef k = g.softplus(out.raw_k);      // (4,)
  NodeRef pre = g.softplus(out.raw_pre);  // (4,)

  NodeRef travel = g.scale(g.add(x_col, dx_col), 1.0 / unit_scale);       // (B,1)
  NodeRef r_ref = g.dot(r, g.constant(theta_ref));                        // (1,)
  NodeRef r_theta = g.sum(g.mul(theta, r), 1);                            // (B,1)
  NodeRef delta = g.sub(g.add(travel, r_ref), r_theta);                   // (B,1)
  const double inf = std::numeric_limits<double>::infinity();
  NodeRef taut = g.clip(delta, 0.0, inf);  // a tendon cannot push
  out.tendon_force = g.scale(taut, k_tend_si * unit_scale);               // (B,1), N
  NodeRef flex = g.mul(out.tendon_force, r);                              // (B,4)
  NodeRef spring = g.mul(k, g.add(theta, pre));                           // (B,4)
  out.torques = g.sub(flex, spring);
  return out;
}

std::vector<double> minimal_append(std::span<const double> a, std::span<const double> phi) {
  std::vector<double> out;
  out.reserve(a.size() + phi.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), phi.begin(), phi.end());
  return out;
}

}  // namespace hwopt
