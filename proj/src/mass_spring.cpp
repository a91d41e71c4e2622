#include "hwopt/mass_spring.hpp"

#include <cmath>
#include <stdexcept>

namespace hwopt {

namespace {
double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }
}  // namespace

double toy_reward(double y2, double v2, double i, const MassSpringConfig& cfg) {
  const double pos = cfg.alpha * std::abs(y2 - cfg.h);
  const double vel = cfg.beta * std::abs(v2);
  if (pos + vel > cfg.eps) return -pos - vel - cfg.gamma * std::abs(cfg.i_max);
  return -pos - vel - cfg.gamma * std::abs(i);
}

MassSpringState mass_spring_reset(const MassSpringConfig& cfg, Rng& rng, double total_length) {
  MassSpringState s;
  s.y2 = rng.uniform(cfg.l, 2.0 * cfg.h);
  s.v2 = rng.uniform(-0.5, 0.5);
  s.y1 = s.y2 - total_length;
  s.v1 = s.v2;
  return s;
}

MassSpringState mass_spring_integrate(const MassSpringState& s, double f_total,
                                      const MassSpringConfig& cfg) {
  const double mass = cfg.m1 + cfg.m2;
  const double a = cfg.g + f_total / mass;  // positive down
  MassSpringState n = s;
  n.y2 = s.y2 + cfg.dt * (s.v2 + 0.5 * cfg.dt * a);
  n.v2 = s.v2 + cfg.dt * a;
  n.y1 = n.y2 - cfg.l;
  n.v1 = n.v2;
  return n;
}

MassSpringState bar_integrate(const MassSpringState& s, double f_on_m1, double f_str,
                              const MassSpringConfig& cfg) {
  const double a1 = cfg.g + (-cfg.k_env_total * s.y1 + f_on_m1) / cfg.m1;
  const double a2 = cfg.g + (f_str - f_on_m1) / cfg.m2;
  MassSpringState n;
  n.y1 = s.y1 + cfg.dt * (s.v1 + 0.5 * cfg.dt * a1);
  n.v1 = s.v1 + cfg.dt * a1;
  n.y2 = s.y2 + cfg.dt * (s.v2 + 0.5 * cfg.dt * a2);
  n.v2 = s.v2 + cfg.dt * a2;
  return n;
}

MassSpringEnv::MassSpringEnv(MassSpringConfig cfg, ToyVariant variant, EnvInterface iface,
                             int n_hw)
    : cfg_(cfg), variant_(variant), iface_(iface), n_hw_(n_hw) {
  frozen_phi_.assign(static_cast<size_t>(n_hw_), 0.0);
  if (variant_ == ToyVariant::kBarLength)
    for (auto& l : frozen_phi_) l = cfg_.l / n_hw_;
}

void MassSpringEnv::set_frozen_hardware(std::span<const double> phi) {
  if (static_cast<int>(phi.size()) != n_hw_)
    throw std::invalid_argument("set_frozen_hardware: expected " + std::to_string(n_hw_) +
                                " values");
  frozen_phi_.assign(phi.begin(), phi.end());
}

int MassSpringEnv::action_dim() const {
  switch (iface_) {
    case EnvInterface::kHwasp:
      return variant_ == ToyVariant::kStiffness ? 1 : 2;  // [f_total] | [i, f_interf]
    case EnvInterface::kMinimal:
      return 1 + n_hw_;  // [i, phi...]
    case EnvInterface::kCompOnly:
      return 1;          // [i]
  }
  return 0;
}

void MassSpringEnv::write_obs(std::span<double> obs, std::span<double> hw_obs) const {
  obs[0] = state_.y2;
  obs[1] = state_.v2;
  if (variant_ == ToyVariant::kStiffness) {
    hw_obs[0] = state_.y1;
  } else {
    hw_obs[0] = state_.y1;
    hw_obs[1] = state_.y2;
    hw_obs[2] = state_.v1;
    hw_obs[3] = state_.v2;
  }
}

void MassSpringEnv::reset(Rng& rng, std::span<double> obs, std::span<double> hw_obs) {
  state_ = mass_spring_reset(cfg_, rng, cfg_.l);
  step_idx_ = 0;
  write_obs(obs, hw_obs);
}

StepOut MassSpringEnv::step(std::span<const double> action, std::span<const double> aux,
                            std::span<double> obs, std::span<double> hw_obs) {
  if (static_cast<int>(action.size()) != action_dim())
    throw std::invalid_argument("mass_spring step: action length " +
                                std::to_string(action.size()) + " does not match " +
                                std::to_string(action_dim()));
  double reward_current = 0.0;

  if (variant_ == ToyVariant::kStiffness) {
    double f_total = 0.0;
    if (iface_ == EnvInterface::kHwasp) {
      f_total = action[0];
      reward_current = aux.empty() ? 0.0 : aux[0];
    } else {
      const double i = clamp(action[0], -cfg_.i_max, cfg_.i_max);
      double sum_k = 0.0;
      if (iface_ == EnvInterface::kMinimal) {
        for (size_t j = 1; j < action.size(); ++j) sum_k += action[j] < 0.0 ? 0.0 : action[j];
      } else {
        for (double k : frozen_phi_) sum_k += k < 0.0 ? 0.0 : k;
      }
      f_total = cfg_.k_T * i / cfg_.r_shaft - sum_k * state_.y1;
      reward_current = i;
    }
    state_ = mass_spring_integrate(state_, f_total, cfg_);
  } else {
    double i = 0.0, f_on_m1 = 0.0;
    if (iface_ == EnvInterface::kHwasp) {
      i = clamp(action[0], -cfg_.i_max, cfg_.i_max);
      f_on_m1 = action[1];
    } else {
      i = clamp(action[0], -cfg_.i_max, cfg_.i_max);
      double total_l = 0.0;
      if (iface_ == EnvInterface::kMinimal) {
        for (size_t j = 1; j < action.size(); ++j) total_l += action[j] < 0.0 ? 0.0 : action[j];
      } else {
        for (double l : frozen_phi_) total_l += l < 0.0 ? 0.0 : l;
      }
      f_on_m1 = 0.5 * cfg_.k_interf * (state_.y2 - state_.y1 - total_l) +
                0.5 * cfg_.b_interf * (state_.v2 - state_.v1);
    }
    reward_current = i;
    const double f_str = cfg_.k_T * i / cfg_.r_shaft;
    state_ = bar_integrate(state_, f_on_m1, f_str, cfg_);
  }

  ++step_idx_;
  StepOut out;
  const bool finite = std::isfinite(state_.y2) && std::isfinite(state_.v2) &&
                      std::isfinite(state_.y1) && std::isfinite(state_.v1);
  if (!finite) {
    out.info.error = true;
    out.done = true;
    out.terminal = true;
    out.reward = 0.0;
    return out;
  }
  out.reward = toy_reward(state_.y2, state_.v2, reward_current, cfg_);
  out.done = step_idx_ >= cfg_.episode_len;
  out.terminal = false;  // time-limit truncation only
  write_obs(obs, hw_obs);
  return out;
}

}  // namespace hwopt
