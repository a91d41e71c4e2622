#pragma once

#include <array>
#include <span>
#include <vector>

#include "hwopt/env.hpp"

namespace hwopt {

// Planar quasi-static grasping surrogate: a palm with two 2-link fingers in
// the x-z plane above a floor, grasping a disk or box. Contacts are penalty
// springs with damped normals and capped tangential friction. Joint order is
// [thumb-prox, thumb-dist, finger-prox, finger-dist]; the thumb is the left
// finger.
struct GraspConfig {
  int palm_dofs = 1;            // 1: z only, 2: x and z
  double dt_sim = 0.001;        // s
  int substeps = 10;            // env step = substeps * dt_sim
  int episode_len = 500;

  // Geometry.
  double palm_half_width = 0.055;  // m
  double link1_len = 0.05, link2_len = 0.045;
  double link_radius = 0.008;
  double joint_lo = 0.0, joint_hi = 2.0;   // rad
  double joint_damping = 0.2;              // N*m*s/rad

  // Contacts.
  double contact_k = 1e4;       // N/m
  double contact_c = 100.0;     // N*s/m
  double tangent_c = 200.0;     // N*s/m before the Coulomb cap
  int box_samples = 5;          // capsule sample points for box contacts

  // Actuation.
  double palm_rate = 0.02;      // m per env step
  double palm_z_lo = 0.08, palm_z_hi = 0.40, palm_x_abs = 0.10;
  double motor_rate = 0.006;    // m per env step
  double motor_max = 0.08;      // m spool travel
  double r_spool = 0.005;       // m, motor torque observation

  // Hardware-policy unit handling: torques arrive in bench units and are
  // multiplied by unit_scale at this boundary.
  double unit_scale = 1e-3;
  double k_tend_si = 1e4;       // N/m, env-side tendon model (minimal mode)

  // Reward.
  double alpha = -5.0;          // < 0: distance penalty
  double beta = 1.0;            // per distal-link contact
  double lift_z1 = 0.02, lift_z2 = 0.05, lift_z3 = 0.10;
  double lift_r1 = 5.0, lift_r2 = 10.0, lift_r3 = 20.0;

  // Domain randomization.
  double size_lo = 0.040, size_hi = 0.100;
  double mass_lo = 0.100, mass_hi = 0.500;
  double fric_lo = 0.5, fric_hi = 1.0;
  double inertia_lo = 1e-4, inertia_hi = 5e-3;
  double palm_z0_lo = 0.18, palm_z0_hi = 0.26;
  double obj_x_jitter = 0.01;
  double sensor_pos_noise = 0.001;   // m
  double sensor_rot_noise = 0.01;    // rad
  double sensor_torque_noise = 0.002;
  double dist_force_std = 0.02;      // N
  double dist_torque_std = 0.002;    // N*m

  double floor_z = 0.0;
  double drop_z = -0.05;
};

enum class ObjectShape { kDisk, kBox };

struct ObjectSpec {
  ObjectShape shape = ObjectShape::kDisk;
  double size = 0.06;      // bounding dimension, m
  double mass = 0.2;       // kg
  double friction = 0.7;
  double inertia = 1e-3;   // kg*m^2
};

struct GraspState {
  double palm_x = 0.0, palm_z = 0.2;
  double palm_set_x = 0.0, palm_set_z = 0.2;
  double x_mot = 0.0, x_set = 0.0;
  std::array<double, 4> theta{0, 0, 0, 0};
  std::array<double, 4> theta_dot{0, 0, 0, 0};
  double obj_x = 0.0, obj_z = 0.0, obj_ang = 0.0;
  double obj_vx = 0.0, obj_vz = 0.0, obj_w = 0.0;
};

// Lift bonus: non-decreasing staircase in object clearance above the floor.
double grasp_lift_bonus(double clearance, const GraspConfig& cfg);
double grasp_reward(double palm_x, double palm_z, double obj_x, double obj_z, int contacts,
                    double clearance, const GraspConfig& cfg);

class GraspEnv final : public Env {
 public:
  GraspEnv(GraspConfig cfg, EnvInterface iface);
  void set_frozen_hardware(std::span<const double> phi) override;  // 12 bench-unit values

  int obs_dim() const override { return cfg_.palm_dofs + 5; }
  int hw_obs_dim() const override { return 5; }
  int action_dim() const override;
  int episode_len() const override { return cfg_.episode_len; }
  void reset(Rng& rng, std::span<double> obs, std::span<double> hw_obs) override;
  StepOut step(std::span<const double> action, std::span<const double> aux,
               std::span<double> obs, std::span<double> hw_obs) override;

  const GraspState& state() const { return state_; }
  const ObjectSpec& object() const { return object_; }
  const GraspConfig& config() const { return cfg_; }
  double clearance() const { return state_.obj_z - 0.5 * object_.size - cfg_.floor_z; }
  // Kinetic + gravitational + contact elastic energy of the hand-object
  // system (the hand is massless, so only the object contributes inertia).
  double mechanical_energy() const;

 private:
  struct Contact {
    double pen = 0.0;
    int link = -1;  // 0..3 finger links, 4 palm, 5 floor
  };
  void substep(std::span<const double> tau_joint, double& max_pen, int& distal_contacts);
  void write_obs(std::span<double> obs, std::span<double> hw_obs, double motor_torque);
  std::vector<double> env_tendon_torques(double& f_tend) const;

  GraspConfig cfg_;
  EnvInterface iface_;
  std::vector<double> phi_;  // bench units: r_pul mm x4, k_spr Nmm x4, pre rad x4
  GraspState state_;
  ObjectSpec object_;
  Rng noise_rng_{0};
  int step_idx_ = 0;
  double dist_fx_ = 0.0, dist_fz_ = 0.0, dist_tau_ = 0.0;
  bool disturbances_enabled_ = true;

 public:
  void set_disturbances_enabled(bool on) { disturbances_enabled_ = on; }
  void set_object(const ObjectSpec& spec) { object_ = spec; }
  void set_state(const GraspState& s) { state_ = s; }
};

}  // namespace hwopt
