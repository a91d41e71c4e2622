#pragma once

#include <span>
#include <vector>

#include "hwopt/env.hpp"
#include "hwopt/hardware.hpp"

namespace hwopt {

// Two point masses hanging from a parallel spring stack; a motor string pulls
// the lower mass. y is measured downward from the springs' natural length.
struct MassSpringConfig {
  double m1 = 0.1, m2 = 0.1;   // kg
  double l = 0.1;              // m, nominal bar length
  double h = 0.2;              // m, target height of the lower mass
  double g = 9.8;              // m/s^2
  double k_T = 0.001;          // N*m/A
  double r_shaft = 0.001;      // m
  double dt = 0.01;            // s
  int episode_len = 1000;
  double i_max = 2.0;          // A
  double alpha = 10.0, beta = 1.0, gamma = 0.1, eps = 0.05;  // reward weights
  // Bar-length variant: soft interface constants and the environment-resident
  // spring stack total.
  double k_interf = 1000.0;    // N/m
  double b_interf = 10.0;      // N*s/m
  double k_env_total = 19.6;   // N/m
};

struct MassSpringState {
  double y2 = 0.0, v2 = 0.0;
  double y1 = 0.0, v1 = 0.0;  // bar variant only; rigid case derives y1 = y2 - l
};

// Two-stage reward: far from the goal the current term is charged at i_max,
// near the goal the actual current is charged.
double toy_reward(double y2, double v2, double i, const MassSpringConfig& cfg);

MassSpringState mass_spring_reset(const MassSpringConfig& cfg, Rng& rng, double total_length);

// One mid-point Euler step of the rigid-bar system under a total external
// force on the pair.
MassSpringState mass_spring_integrate(const MassSpringState& s, double f_total,
                                      const MassSpringConfig& cfg);
// Two-DOF step for the soft-interface bar variant. f_on_m1 is the interface
// force applied to the upper mass; the lower mass receives its negation plus
// the motor string force.
MassSpringState bar_integrate(const MassSpringState& s, double f_on_m1, double f_str,
                              const MassSpringConfig& cfg);

enum class ToyVariant { kStiffness, kBarLength };

class MassSpringEnv final : public Env {
 public:
  MassSpringEnv(MassSpringConfig cfg, ToyVariant variant, EnvInterface iface, int n_hw);
  // comp-only interface: hardware frozen inside the environment.
  void set_frozen_hardware(std::span<const double> phi) override;

  int obs_dim() const override { return 2; }
  int hw_obs_dim() const override { return variant_ == ToyVariant::kStiffness ? 1 : 4; }
  int action_dim() const override;
  int episode_len() const override { return cfg_.episode_len; }
  void reset(Rng& rng, std::span<double> obs, std::span<double> hw_obs) override;
  StepOut step(std::span<const double> action, std::span<const double> aux,
               std::span<double> obs, std::span<double> hw_obs) override;

  const MassSpringState& state() const { return state_; }
  const MassSpringConfig& config() const { return cfg_; }

 private:
  void write_obs(std::span<double> obs, std::span<double> hw_obs) const;

  MassSpringConfig cfg_;
  ToyVariant variant_;
  EnvInterface iface_;
  int n_hw_;
  std::vector<double> frozen_phi_;
  MassSpringState state_;
  int step_idx_ = 0;
};

}  // namespace hwopt
