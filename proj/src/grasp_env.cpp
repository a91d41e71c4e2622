#include "hwopt/grasp_env.hpp"

#include <cmath>
#include <stdexcept>

namespace hwopt {

namespace {

struct Vec2 {
  double x = 0.0, z = 0.0;
};
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.z}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }
double cross(Vec2 a, Vec2 b) { return a.x * b.z - a.z * b.x; }
double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

double clampd(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

Vec2 closest_on_segment(Vec2 a, Vec2 b, Vec2 p, double& t) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  t = len2 > 0.0 ? clampd(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return a + t * ab;
}

// Finger kinematics. Left finger (thumb) flexes toward +x, right toward -x.
struct LinkFrame {
  Vec2 a, b;          // segment endpoints
  Vec2 dp_dprox_a, dp_dprox_b;  // position Jacobians at the endpoints
  Vec2 dp_ddist_a, dp_ddist_b;
  int prox_idx = -1, dist_idx = -1;  // joint indices this link responds to
};

Vec2 link_dir(double theta, bool left) {
  return left ? Vec2{std::sin(theta), -std::cos(theta)} : Vec2{-std::sin(theta), -std::cos(theta)};
}
Vec2 link_dir_d(double theta, bool left) {
  return left ? Vec2{std::cos(theta), std::sin(theta)} : Vec2{-std::cos(theta), std::sin(theta)};
}

}  // namespace

double grasp_lift_bonus(double clearance, const GraspConfig& cfg) {
  if (clearance >= cfg.lift_z3) return cfg.lift_r3;
  if (clearance >= cfg.lift_z2) return cfg.lift_r2;
  if (clearance >= cfg.lift_z1) return cfg.lift_r1;
  return 0.0;
}

double grasp_reward(double palm_x, double palm_z, double obj_x, double obj_z, int contacts,
                    double clearance, const GraspConfig& cfg) {
  const double dist = std::sqrt((palm_x - obj_x) * (palm_x - obj_x) +
                                (palm_z - obj_z) * (palm_z - obj_z));
  return cfg.alpha * dist + cfg.beta * contacts + grasp_lift_bonus(clearance, cfg);
}

GraspEnv::GraspEnv(GraspConfig cfg, EnvInterface iface) : cfg_(cfg), iface_(iface) {
  phi_.assign(12, 0.0);
  // Range midpoints as the fallback hardware set for comp-only runs.
  for (int j = 0; j < 4; ++j) phi_[j] = 10.5;
  for (int j = 4; j < 8; ++j) phi_[j] = 10.5;
  for (int j = 8; j < 12; ++j) phi_[j] = 1.55;
}

void GraspEnv::set_frozen_hardware(std::span<const double> phi) {
  if (phi.size() != 12) throw std::invalid_argument("set_frozen_hardware: expected 12 values");
  phi_.assign(phi.begin(), phi.end());
}

int GraspEnv::action_dim() const {
  switch (iface_) {
    case EnvInterface::kHwasp: return cfg_.palm_dofs + 4;        // [dp, tau_scaled]
    case EnvInterface::kMinimal: return cfg_.palm_dofs + 1 + 12; // [dp, dx, phi]
    case EnvInterface::kCompOnly: return cfg_.palm_dofs + 1;     // [dp, dx]
  }
  return 0;
}

void GraspEnv::reset(Rng& rng, std::span<double> obs, std::span<double> hw_obs) {
  object_.shape = rng.uniform01() < 0.5 ? ObjectShape::kDisk : ObjectShape::kBox;
  object_.size = rng.uniform(cfg_.size_lo, cfg_.size_hi);
  object_.mass = rng.uniform(cfg_.mass_lo, cfg_.mass_hi);
  object_.friction = rng.uniform(cfg_.fric_lo, cfg_.fric_hi);
  object_.inertia = rng.uniform(cfg_.inertia_lo, cfg_.inertia_hi);

  state_ = GraspState{};
  state_.palm_x = 0.0;
  state_.palm_z = rng.uniform(cfg_.palm_z0_lo, cfg_.palm_z0_hi);
  state_.palm_set_x = state_.palm_x;
  state_.palm_set_z = state_.palm_z;
  state_.obj_x = rng.uniform(-cfg_.obj_x_jitter, cfg_.obj_x_jitter);
  state_.obj_z = cfg_.floor_z + 0.5 * object_.size;
  noise_rng_ = Rng(rng.next_u64());
  step_idx_ = 0;
  dist_fx_ = dist_fz_ = dist_tau_ = 0.0;
  write_obs(obs, hw_obs, 0.0);
}

std::vector<double> GraspEnv::env_tendon_torques(double& f_tend) const {
  // Non-differentiable counterpart of the tendon transmission, bench units.
  const double* r = phi_.data();
  const double* k = phi_.data() + 4;
  const double* pre = phi_.data() + 8;
  double delta = state_.x_mot / cfg_.unit_scale;
  for (int j = 0; j < 4; ++j) delta -= r[j] * state_.theta[j];
  const double k_tend = cfg_.k_tend_si * cfg_.unit_scale;
  f_tend = k_tend * (delta < 0.0 ? 0.0 : delta);
  std::vector<double> tau_si(4, 0.0);
  for (int j = 0; j < 4; ++j)
    tau_si[j] = (f_tend * r[j] - k[j] * (state_.theta[j] + pre[j])) * cfg_.unit_scale;
  return tau_si;
}

void GraspEnv::substep(std::span<const double> tau_joint, double& max_pen, int& distal_contacts) {
  const double dt = cfg_.dt_sim;
  const double w = cfg_.palm_half_width;

  // Palm servo toward its setpoint with a rate limit.
  const double palm_step = cfg_.palm_rate / cfg_.substeps;
  const double old_px = state_.palm_x, old_pz = state_.palm_z;
  state_.palm_x += clampd(state_.palm_set_x - state_.palm_x, -palm_step, palm_step);
  state_.palm_z += clampd(state_.palm_set_z - state_.palm_z, -palm_step, palm_step);
  const Vec2 palm_vel{(state_.palm_x - old_px) / dt, (state_.palm_z - old_pz) / dt};

  // Motor spool servo.
  const double mot_step = cfg_.motor_rate / cfg_.substeps;
  state_.x_mot += clampd(state_.x_set - state_.x_mot, -mot_step, mot_step);

  // Forward kinematics with position Jacobians.
  LinkFrame links[4];
  const Vec2 base_l{state_.palm_x - w, state_.palm_z};
  const Vec2 base_r{state_.palm_x + w, state_.palm_z};
  for (int side = 0; side < 2; ++side) {
    const bool left = side == 0;
    const int jp = left ? 0 : 2, jd = left ? 1 : 3;
    const Vec2 base = left ? base_l : base_r;
    const Vec2 d1 = link_dir(state_.theta[jp], left);
    const Vec2 d1p = link_dir_d(state_.theta[jp], left);
    const Vec2 d2 = link_dir(state_.theta[jp] + state_.theta[jd], left);
    const Vec2 d2p = link_dir_d(state_.theta[jp] + state_.theta[jd], left);
    const Vec2 elbow = base + cfg_.link1_len * d1;
    LinkFrame& prox = links[side * 2];
    prox.a = base;
    prox.b = elbow;
    prox.dp_dprox_a = Vec2{0, 0};
    prox.dp_dprox_b = cfg_.link1_len * d1p;
    prox.dp_ddist_a = prox.dp_ddist_b = Vec2{0, 0};
    prox.prox_idx = jp;
    prox.dist_idx = -1;
    LinkFrame& dist = links[side * 2 + 1];
    dist.a = elbow;
    dist.b = elbow + cfg_.link2_len * d2;
    dist.dp_dprox_a = cfg_.link1_len * d1p;
    dist.dp_dprox_b = cfg_.link1_len * d1p + cfg_.link2_len * d2p;
    dist.dp_ddist_a = Vec2{0, 0};
    dist.dp_ddist_b = cfg_.link2_len * d2p;
    dist.prox_idx = jp;
    dist.dist_idx = jd;
  }

  const double m = object_.mass;
  const double inertia = object_.inertia;
  const double mu = object_.friction;
  Vec2 obj_c{state_.obj_x, state_.obj_z};
  Vec2 obj_v{state_.obj_vx, state_.obj_vz};
  Vec2 force{dist_fx_, dist_fz_ - m * 9.8};
  double torque = dist_tau_;
  double tau_contact[4] = {0, 0, 0, 0};

  // One penalty contact: normal force on the object along n, tangential
  // Coulomb-capped viscous friction, reaction mapped onto the joints through
  // the link Jacobian at the contact point.
  auto apply_contact = [&](Vec2 n, double pen, double pen_rate_extra, Vec2 pc, Vec2 v_link,
                           Vec2 jac_prox, Vec2 jac_dist, int prox_idx, int dist_idx,
                           double k_eff, double c_eff, bool on_object, int link_id) {
    if (pen <= 0.0) return;
    max_pen = std::max(max_pen, pen);
    const Vec2 v_obj_pt = on_object
        ? Vec2{obj_v.x - state_.obj_w * (pc.z - obj_c.z), obj_v.z + state_.obj_w * (pc.x - obj_c.x)}
        : Vec2{0, 0};
    const Vec2 v_rel = v_obj_pt - v_link;
    const double pen_rate = -dot(v_rel, n) + pen_rate_extra;
    double fn = k_eff * pen + c_eff * pen_rate;
    if (fn < 0.0) fn = 0.0;
    const Vec2 t{-n.z, n.x};
    const double vt = dot(v_rel, t);
    const double ft = clampd(-cfg_.tangent_c * vt, -mu * fn, mu * fn);
    const Vec2 f = fn * n + ft * t;
    if (on_object) {
      force = force + f;
      torque += cross(pc - obj_c, f);
    }
    if (prox_idx >= 0) tau_contact[prox_idx] += dot(-1.0 * f, jac_prox);
    if (dist_idx >= 0) tau_contact[dist_idx] += dot(-1.0 * f, jac_dist);
    if (link_id == 1 || link_id == 3) ++distal_contacts;
  };

  auto link_point = [&](const LinkFrame& L, double t, Vec2& v_link, Vec2& jp_, Vec2& jd_) {
    const Vec2 p = L.a + t * (L.b - L.a);
    jp_ = L.dp_dprox_a + t * (L.dp_dprox_b - L.dp_dprox_a);
    jd_ = L.dp_ddist_a + t * (L.dp_ddist_b - L.dp_ddist_a);
    v_link = palm_vel;
    if (L.prox_idx >= 0) v_link = v_link + state_.theta_dot[L.prox_idx] * jp_;
    if (L.dist_idx >= 0) v_link = v_link + state_.theta_dot[L.dist_idx] * jd_;
    return p;
  };

  distal_contacts = 0;

  // Finger links and palm bar against the object.
  for (int li = 0; li < 5; ++li) {
    const bool is_palm = li == 4;
    LinkFrame palm_frame;
    if (is_palm) {
      palm_frame.a = base_l;
      palm_frame.b = base_r;
      palm_frame.prox_idx = palm_frame.dist_idx = -1;
    }
    const LinkFrame& L = is_palm ? palm_frame : links[li];

    if (object_.shape == ObjectShape::kDisk) {
      const double radius = 0.5 * object_.size;
      double t = 0.0;
      const Vec2 q = closest_on_segment(L.a, L.b, obj_c, t);
      const Vec2 d = obj_c - q;
      const double dist = norm(d);
      if (dist < 1e-9) continue;
      const double pen = radius + cfg_.link_radius - dist;
      if (pen <= 0.0) continue;
      const Vec2 n = (1.0 / dist) * d;
      Vec2 v_link, jp_, jd_;
      link_point(L, t, v_link, jp_, jd_);
      const Vec2 pc = q + cfg_.link_radius * n;
      apply_contact(n, pen, 0.0, pc, v_link, jp_, jd_, L.prox_idx, L.dist_idx, cfg_.contact_k,
                    cfg_.contact_c, true, li);
    } else {
      const double half = 0.5 * object_.size;
      const double cang = std::cos(state_.obj_ang), sang = std::sin(state_.obj_ang);
      const int ns = cfg_.box_samples;
      bool hit = false;
      for (int s = 0; s < ns; ++s) {
        const double t = ns == 1 ? 0.5 : static_cast<double>(s) / (ns - 1);
        Vec2 v_link, jp_, jd_;
        const Vec2 p = link_point(L, t, v_link, jp_, jd_);
        const Vec2 rel = p - obj_c;
        const double qx = cang * rel.x + sang * rel.z;
        const double qz = -sang * rel.x + cang * rel.z;
        const double ox = half + cfg_.link_radius - std::abs(qx);
        const double oz = half + cfg_.link_radius - std::abs(qz);
        if (ox <= 0.0 || oz <= 0.0) continue;
        Vec2 nb = ox < oz ? Vec2{qx >= 0 ? 1.0 : -1.0, 0.0} : Vec2{0.0, qz >= 0 ? 1.0 : -1.0};
        // n points from the link into the object (direction of the push).
        const Vec2 n_out{cang * nb.x - sang * nb.z, sang * nb.x + cang * nb.z};
        const Vec2 n = -1.0 * n_out;
        const double pen = ox < oz ? ox : oz;
        const Vec2 pc = p - cfg_.link_radius * n_out;
        apply_contact(n, pen, 0.0, pc, v_link, jp_, jd_, L.prox_idx, L.dist_idx,
                      cfg_.contact_k / ns, cfg_.contact_c / ns, true, hit ? -1 : li);
        hit = true;
      }
    }
  }

  // Floor.
  if (object_.shape == ObjectShape::kDisk) {
    const double radius = 0.5 * object_.size;
    const double pen = radius - (obj_c.z - cfg_.floor_z);
    if (pen > 0.0) {
      const Vec2 pc{obj_c.x, cfg_.floor_z};
      apply_contact({0, 1}, pen, 0.0, pc, {0, 0}, {0, 0}, {0, 0}, -1, -1, cfg_.contact_k,
                    cfg_.contact_c, true, 5);
    }
  } else {
    const double half = 0.5 * object_.size;
    const double cang = std::cos(state_.obj_ang), sang = std::sin(state_.obj_ang);
    for (int cx = -1; cx <= 1; cx += 2)
      for (int cz = -1; cz <= 1; cz += 2) {
        const Vec2 corner{obj_c.x + cang * cx * half - sang * cz * half,
                          obj_c.z + sang * cx * half + cang * cz * half};
        const double pen = cfg_.floor_z - corner.z;
        if (pen > 0.0)
          apply_contact({0, 1}, pen, 0.0, corner, {0, 0}, {0, 0}, {0, 0}, -1, -1,
                        cfg_.contact_k / 2, cfg_.contact_c / 2, true, 5);
      }
  }

  // Quasi-static joints: first-order response to commanded, spring-model and
  // contact torques, with hard limits.
  for (int j = 0; j < 4; ++j) {
    const double theta_old = state_.theta[j];
    double theta_new = theta_old + dt * (tau_joint[j] + tau_contact[j]) / cfg_.joint_damping;
    theta_new = clampd(theta_new, cfg_.joint_lo, cfg_.joint_hi);
    state_.theta_dot[j] = (theta_new - theta_old) / dt;
    state_.theta[j] = theta_new;
  }

  // Object: semi-implicit Euler.
  state_.obj_vx += dt * force.x / m;
  state_.obj_vz += dt * force.z / m;
  state_.obj_w += dt * torque / inertia;
  state_.obj_x += dt * state_.obj_vx;
  state_.obj_z += dt * state_.obj_vz;
  state_.obj_ang += dt * state_.obj_w;
}

void GraspEnv::write_obs(std::span<double> obs, std::span<double> hw_obs, double motor_torque) {
  int k = 0;
  if (cfg_.palm_dofs == 2) obs[k++] = state_.palm_x;
  obs[k++] = state_.palm_z;
  obs[k++] = state_.obj_x + noise_rng_.normal(0.0, cfg_.sensor_pos_noise);
  obs[k++] = state_.obj_z + noise_rng_.normal(0.0, cfg_.sensor_pos_noise);
  obs[k++] = object_.size;
  obs[k++] = state_.x_mot;
  obs[k++] = motor_torque + noise_rng_.normal(0.0, cfg_.sensor_torque_noise);
  hw_obs[0] = state_.x_mot;
  for (int j = 0; j < 4; ++j)
    hw_obs[1 + j] = state_.theta[j] + noise_rng_.normal(0.0, cfg_.sensor_rot_noise);
}

StepOut GraspEnv::step(std::span<const double> action, std::span<const double> aux,
                       std::span<double> obs, std::span<double> hw_obs) {
  if (static_cast<int>(action.size()) != action_dim())
    throw std::invalid_argument("grasp step: action length " + std::to_string(action.size()) +
                                " does not match " + std::to_string(action_dim()));
  const int pd = cfg_.palm_dofs;

  // Palm setpoint from the (sampled) palm command, rate-limited per step.
  double dpx = 0.0, dpz = 0.0;
  if (pd == 2) {
    dpx = clampd(action[0], -cfg_.palm_rate, cfg_.palm_rate);
    dpz = clampd(action[1], -cfg_.palm_rate, cfg_.palm_rate);
  } else {
    dpz = clampd(action[0], -cfg_.palm_rate, cfg_.palm_rate);
  }
  state_.palm_set_x = clampd(state_.palm_set_x + dpx, -cfg_.palm_x_abs, cfg_.palm_x_abs);
  state_.palm_set_z = clampd(state_.palm_set_z + dpz, cfg_.palm_z_lo, cfg_.palm_z_hi);

  // Motor setpoint and joint torques per interface.
  std::vector<double> tau_si(4, 0.0);
  double f_tend = 0.0;
  bool env_tendon = false;
  if (iface_ == EnvInterface::kHwasp) {
    const double dx_cmd = aux.empty() ? 0.0 : aux[0];
    state_.x_set = clampd(state_.x_set + dx_cmd, 0.0, cfg_.motor_max);
    for (int j = 0; j < 4; ++j) tau_si[j] = action[pd + j] * cfg_.unit_scale;
    f_tend = aux.size() > 1 ? aux[1] : 0.0;
  } else {
    const double dx_cmd = action[pd];
    state_.x_set = clampd(state_.x_set + dx_cmd, 0.0, cfg_.motor_max);
    if (iface_ == EnvInterface::kMinimal) {
      for (int j = 0; j < 12; ++j) phi_[j] = action[pd + 1 + j] < 0.0 ? 0.0 : action[pd + 1 + j];
    }
    env_tendon = true;
  }

  // Disturbance wrench held constant across the substeps of one env step.
  if (disturbances_enabled_) {
    dist_fx_ = noise_rng_.normal(0.0, cfg_.dist_force_std);
    dist_fz_ = noise_rng_.normal(0.0, cfg_.dist_force_std);
    dist_tau_ = noise_rng_.normal(0.0, cfg_.dist_torque_std);
  } else {
    dist_fx_ = dist_fz_ = dist_tau_ = 0.0;
  }

  double max_pen = 0.0;
  int distal_contacts = 0;
  for (int s = 0; s < cfg_.substeps; ++s) {
    if (env_tendon) tau_si = env_tendon_torques(f_tend);
    substep(tau_si, max_pen, distal_contacts);
  }

  ++step_idx_;
  StepOut out;
  const bool finite = std::isfinite(state_.obj_x) && std::isfinite(state_.obj_z) &&
                      std::isfinite(state_.obj_vx) && std::isfinite(state_.obj_vz) &&
                      std::isfinite(state_.obj_w);
  if (!finite) {
    out.info.error = true;
    out.done = true;
    out.terminal = true;
    return out;
  }

  const double clear = clearance();
  out.info.contact_count = distal_contacts;
  out.info.object_height = clear;
  out.info.motor_torque = cfg_.r_spool * f_tend;
  out.info.contact_stressed = max_pen > 0.1 * object_.size;
  out.reward = grasp_reward(state_.palm_x, state_.palm_z, state_.obj_x, state_.obj_z,
                            distal_contacts, clear, cfg_);
  const bool dropped = state_.obj_z < cfg_.drop_z;
  out.done = dropped || step_idx_ >= cfg_.episode_len;
  out.terminal = dropped;
  write_obs(obs, hw_obs, out.info.motor_torque);
  return out;
}

double GraspEnv::mechanical_energy() const {
  const double m = object_.mass;
  double e = 0.5 * m * (state_.obj_vx * state_.obj_vx + state_.obj_vz * state_.obj_vz) +
             0.5 * object_.inertia * state_.obj_w * state_.obj_w +
             m * 9.8 * (state_.obj_z - cfg_.floor_z);
  // Elastic energy stored in active contact springs (disk-floor only; the
  // passivity check uses that scenario).
  if (object_.shape == ObjectShape::kDisk) {
    const double pen = 0.5 * object_.size - (state_.obj_z - cfg_.floor_z);
    if (pen > 0.0) e += 0.5 * cfg_.contact_k * pen * pen;
  }
  return e;
}

}  // namespace hwopt
