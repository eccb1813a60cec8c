#include "dspear/envs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dspear/errors.hpp"
#include "dspear/rng.hpp"

namespace dspear {
namespace {

double clamp_action(double a, bool& clamped) {
  if (!std::isfinite(a)) throw NumericError("environment received a non-finite action");
  if (a < -1.0 || a > 1.0) {
    clamped = true;
    return std::clamp(a, -1.0, 1.0);
  }
  return a;
}

void check_action(std::span<const double> action, std::size_t dim) {
  if (action.size() != dim) {
    throw ShapeError("action has " + std::to_string(action.size()) + " components, expected " +
                     std::to_string(dim));
  }
}

}  // namespace

// --- point-lift -------------------------------------------------------------

Vector PointLiftState::observation() const {
  Vector o(kObsDim);
  o << x, v, object_x - x, latched ? 1.0 : 0.0, height / kPointLift.target_height;
  return o;
}

double point_lift_reach_reward(double distance) {
  return kPointLift.w_reach * (1.0 - std::tanh(kPointLift.reach_scale * distance));
}

PointLiftState point_lift_reset(std::uint64_t seed, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  Rng rng(Rng::derive(seed, 7));
  PointLiftState s;
  s.x = rng.uniform(kPointLift.reset_x_low, kPointLift.reset_x_high);
  s.horizon = horizon;
  return s;
}

StepResult<PointLiftState> point_lift_step(const PointLiftState& state, std::span<const double> action) {
  check_action(action, PointLiftState::kActionDim);
  const auto& c = kPointLift;
  StepResult<PointLiftState> out;
  const double force = clamp_action(action[0], out.action_clamped);
  const double grip = clamp_action(action[1], out.action_clamped);

  PointLiftState s = state;
  s.v += c.dt * (c.force_scale * force - c.damping * s.v);
  s.x += c.dt * s.v;
  if (s.x > c.x_limit || s.x < -c.x_limit) {
    s.x = std::clamp(s.x, -c.x_limit, c.x_limit);
    s.v = 0.0;
  }

  const bool closed = grip > c.grip_threshold;
  if (!closed) {
    s.latched = false;
    s.height = 0.0;
  } else if (!s.latched && std::abs(s.x - s.object_x) <= c.capture_radius &&
             std::abs(s.v) <= c.capture_speed) {
    s.latched = true;
  }
  if (s.latched) {
    s.object_x = s.x;
    s.height = std::min(s.height + c.lift_rate, c.target_height);
  }
  ++s.step;

  double r = point_lift_reach_reward(std::abs(s.x - s.object_x));
  if (s.latched) r += c.w_grip;
  r += c.w_height * s.height / c.target_height;
  if (s.height >= c.target_height) {
    s.success = true;
    r += c.w_success_per_step * static_cast<double>(s.horizon - std::min(s.step, s.horizon));
  }

  out.reward = r;
  out.terminal = s.success;
  out.done = s.success || s.step >= s.horizon;
  out.step = s.step;
  out.next = s;
  return out;
}

// --- hinge-door -------------------------------------------------------------

Vector HingeDoorState::observation() const {
  Vector o(kObsDim);
  o << angle, velocity, latched ? 1.0 : 0.0;
  return o;
}

double hinge_door_energy(const HingeDoorState& s) {
  return 0.5 * kHingeDoor.inertia * s.velocity * s.velocity + 0.5 * kHingeDoor.spring * s.angle * s.angle;
}

HingeDoorState hinge_door_reset(std::uint64_t seed, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  Rng rng(Rng::derive(seed, 11));
  HingeDoorState s;
  s.angle = rng.uniform(0.0, kHingeDoor.reset_angle_high);
  s.horizon = horizon;
  return s;
}

StepResult<HingeDoorState> hinge_door_step(const HingeDoorState& state, std::span<const double> action) {
  check_action(action, HingeDoorState::kActionDim);
  const auto& c = kHingeDoor;
  StepResult<HingeDoorState> out;
  const double torque = c.torque_scale * clamp_action(action[0], out.action_clamped);

  HingeDoorState s = state;
  const double stiffness = 1.0 + c.dt * c.damping / c.inertia + c.dt * c.dt * c.spring / c.inertia;
  const double rhs = s.velocity + c.dt * (torque - c.spring * s.angle) / c.inertia;
  const double stick = c.dt * c.friction / c.inertia;
  double w = 0.0;
  if (rhs > stick) {
    w = (rhs - stick) / stiffness;
  } else if (rhs < -stick) {
    w = (rhs + stick) / stiffness;
  }
  double theta = s.angle + c.dt * w;
  if (theta < 0.0 || theta > c.max_angle) {
    theta = std::clamp(theta, 0.0, c.max_angle);
    w = 0.0;
  }
  s.angle = theta;
  s.velocity = w;
  ++s.step;

  double r = c.w_open * s.angle / c.max_angle;
  if (!s.latched && s.angle >= c.latch_angle) {
    s.latched = true;
    r += c.latch_bonus;
  }
  out.reward = r;
  out.done = s.step >= s.horizon;
  out.terminal = false;
  out.step = s.step;
  out.next = s;
  return out;
}

// --- dispatch ---------------------------------------------------------------

EnvKind parse_env_kind(std::string_view name) {
  if (name == "point_lift") return EnvKind::kPointLift;
  if (name == "hinge_door") return EnvKind::kHingeDoor;
  throw ConfigError("unknown environment '" + std::string(name) + "' (expected point_lift or hinge_door)");
}

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::kPointLift ? "point_lift" : "hinge_door";
}

EnvSpec env_spec(EnvKind kind, std::size_t horizon) {
  EnvSpec spec;
  spec.horizon = horizon;
  if (kind == EnvKind::kPointLift) {
    spec.state_dim = PointLiftState::kObsDim;
    spec.action_dim = PointLiftState::kActionDim;
    spec.dt = kPointLift.dt;
  } else {
    spec.state_dim = HingeDoorState::kObsDim;
    spec.action_dim = HingeDoorState::kActionDim;
    spec.dt = kHingeDoor.dt;
  }
  return spec;
}

Environment::Environment(EnvKind kind, std::size_t horizon)
    : kind_(kind), spec_(env_spec(kind, horizon)) {
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  reset(0);
}

Vector Environment::reset(std::uint64_t seed) {
  if (kind_ == EnvKind::kPointLift) {
    auto s = point_lift_reset(seed, spec_.horizon);
    state_ = s;
    return s.observation();
  }
  auto s = hinge_door_reset(seed, spec_.horizon);
  state_ = s;
  return s.observation();
}

EnvStep Environment::step(std::span<const double> action) {
  return std::visit(
      [&](auto& s) -> EnvStep {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PointLiftState>) {
          auto r = point_lift_step(s, action);
          s = r.next;
          return {s.observation(), r.reward, r.done, r.terminal};
        } else {
          auto r = hinge_door_step(s, action);
          s = r.next;
          return {s.observation(), r.reward, r.done, r.terminal};
        }
      },
      state_);
}

}  // namespace dspear
