#pragma once

#include <span>

#include "hwopt/rng.hpp"

namespace hwopt {

// Which action interface an environment exposes: the redefined HWasP action,
// the minimal-append action, or the raw computational action with hardware
// frozen inside the environment.
enum class EnvInterface { kHwasp, kMinimal, kCompOnly };

struct StepInfo {
  bool error = false;           // non-finite state, episode aborted
  bool contact_stressed = false;
  int contact_count = 0;
  double object_height = 0.0;
  double motor_torque = 0.0;
};

struct StepOut {
  double reward = 0.0;
  bool done = false;       // episode over (terminal or truncated)
  bool terminal = false;   // true terminal state: bootstrap with zero value
  StepInfo info;
};

// Environments own their state and are stepped with the redefined action
// a_new plus an optional aux channel carrying the computational policy's
// internal commands (motor current / travel) that the reward and motor servo
// need but that are not part of a_new in HWasP mode.
class Env {
 public:
  virtual ~Env() = default;
  virtual int obs_dim() const = 0;
  virtual int hw_obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual void reset(Rng& rng, std::span<double> obs, std::span<double> hw_obs) = 0;
  virtual StepOut step(std::span<const double> action, std::span<const double> aux,
                       std::span<double> obs, std::span<double> hw_obs) = 0;
  virtual int episode_len() const = 0;
  // Fixed hardware values applied inside the environment (comp-only runs).
  virtual void set_frozen_hardware(std::span<const double> phi) = 0;
};

}  // namespace hwopt
