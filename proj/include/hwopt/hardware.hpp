#pragma once

#include <span>
#include <string>
#include <vector>

#include "hwopt/array.hpp"
#include "hwopt/graph.hpp"

namespace hwopt {

// Physical parameter interval used for post-update clamping. lo may be 0:
// softplus keeps the value strictly positive anyway.
struct ParamRange {
  double lo = 0.0;
  double hi = 1e9;
};

// softplus(x) = log(1 + exp(x)), written exactly as the graph composes it so
// plain and graph evaluations agree.
double softplus(double x);
double inv_softplus(double y);
void clamp_raw(Array& raw, const ParamRange& range);

// Parallel spring stack plus motor string: f_total = k_T*i/r_shaft - sum(k)*y1.
// Spring stiffnesses are trainable through a softplus reparameterization.
struct SpringStackParams {
  Array raw_k;              // (n,), k_j = softplus(raw_k_j) in N/m
  double k_T = 0.001;       // N*m/A, fixed
  double r_shaft = 0.001;   // m, fixed
  ParamRange k_range{0.0, 100.0};

  int n() const { return raw_k.shape.d0; }
  std::vector<double> stiffnesses() const;
  double total_stiffness() const;
  double force(double y1, double i) const;

  struct GraphOut {
    NodeRef raw_k;
    NodeRef force;  // (B,1)
  };
  // i_col: (B,1) motor current; y1_col: (B,1) upper-mass position.
  GraphOut build(Graph& g, NodeRef i_col, NodeRef y1_col) const;
};

// Soft bar interface: the rigid massless bar between the two masses is
// replaced by a spring-damper pair so segment lengths stay differentiable.
// f_interf acts on the upper mass, -f_interf on the lower.
struct BarInterfaceParams {
  Array raw_l;               // (n,), l_j = softplus(raw_l_j) in m
  double k_interf = 1000.0;  // N/m, fixed
  double b_interf = 10.0;    // N*s/m, fixed
  ParamRange l_range{0.0, 0.05};

  int n() const { return raw_l.shape.d0; }
  std::vector<double> lengths() const;
  double total_length() const;
  // Returns (f_interf, f_interf_prime) with f_interf_prime = -f_interf.
  std::pair<double, double> forces(double y1, double y2, double v1, double v2) const;

  struct GraphOut {
    NodeRef raw_l;
    NodeRef f_interf;  // (B,1)
  };
  GraphOut build(Graph& g, NodeRef y1, NodeRef y2, NodeRef v1, NodeRef v2) const;
};

// Tendon transmission over four joints: one motor flexes all joints against
// preloaded restoring springs. Trainable values live in bench units (mm,
// N*mm/rad, rad) so their magnitudes stay O(1..10); unit_scale converts the
// stiffness-like quantities back to SI at the environment boundary.
struct TendonParams {
  Array raw_r;    // (4,) pulley radii, softplus -> mm
  Array raw_k;    // (4,) restoring spring stiffness, softplus -> N*mm/rad
  Array raw_pre;  // (4,) spring preload angles, softplus -> rad
  Array theta_ref = Array::zeros(Shape::vec(4));  // rad, fixed
  double k_tend_si = 1e4;    // N/m, fixed nominal tendon stiffness
  double unit_scale = 1e-3;  // bench unit -> SI factor for stiffness-like params
  ParamRange r_range{1.0, 20.0};     // mm
  ParamRange k_range{1.0, 20.0};     // N*mm/rad
  ParamRange pre_range{0.1, 3.0};    // rad

  std::vector<double> pulley_radii() const;   // mm
  std::vector<double> spring_stiffness() const;  // N*mm/rad
  std::vector<double> preload_angles() const;    // rad

  // Scaled-unit evaluation. dx_mot/x_mot in m, theta in rad. Returns joint
  // torques in bench units (N*mm); multiply by unit_scale for SI.
  std::vector<double> torques_scaled(double dx_mot, double x_mot,
                                     std::span<const double> theta) const;
  double tendon_force(double dx_mot, double x_mot, std::span<const double> theta) const;  // N

  struct GraphOut {
    NodeRef raw_r, raw_k, raw_pre;
    NodeRef torques;       // (B,4), bench units
    NodeRef tendon_force;  // (B,1), N
  };
  // dx_col/x_col: (B,1) in m; theta: (B,4) in rad.
  GraphOut build(Graph& g, NodeRef dx_col, NodeRef x_col, NodeRef theta) const;
};

// HWasP-Minimal append: a_new = [a, phi] with phi the current reparameterized
// hardware parameter vector in canonical order.
std::vector<double> minimal_append(std::span<const double> a, std::span<const double> phi);

}  // namespace hwopt
