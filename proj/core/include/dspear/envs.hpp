#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "dspear/neuralnet.hpp"

namespace dspear {

struct EnvSpec {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t horizon = 0;
  double action_low = -1.0;
  double action_high = 1.0;
  double dt = 0.05;
};

/// Result of one environment step.
///
/// `done` ends the episode (horizon or success); `terminal` is the subset of
/// `done` that should stop bootstrapping (success), so horizon cut-offs are
/// stored as non-terminal transitions.
template <typename State>
struct StepResult {
  State next;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;
  std::size_t step = 0;
  bool action_clamped = false;
};

// ---------------------------------------------------------------------------
// Point-lift: a 1-D point mass (position, velocity) above a table, an object
// resting at x = 0, and a grip that latches only when the gripper is inside
// the capture radius and moving slowly. While latched and held closed the
// object rises at a fixed rate; opening the grip drops it back to the table.
//
// Actions: a[0] horizontal force (scaled by force_scale), a[1] grip command
// (closed when a[1] > grip_threshold).
//
// Reward per step, all terms >= 0:
//   reach   = w_reach * (1 - tanh(reach_scale * |x - x_object|))
//   grip    = w_grip   if latched after the step
//   height  = w_height * height / target_height
//   success = w_success_per_step * (horizon - step) on the step the object
//             reaches target_height, which ends the episode.
// Bounds: 0 <= r <= (w_reach + w_grip + w_height) + w_success_per_step * horizon.
// ---------------------------------------------------------------------------
struct PointLiftConstants {
  double dt = 0.05;
  double force_scale = 4.0;
  double damping = 2.0;
  double x_limit = 2.0;
  double reset_x_low = -1.5;
  double reset_x_high = 1.5;
  double capture_radius = 0.1;
  double capture_speed = 0.5;
  double grip_threshold = 0.5;
  double lift_rate = 0.025;
  double target_height = 0.5;
  double w_reach = 0.1;
  double reach_scale = 5.0;
  double w_grip = 0.25;
  double w_height = 1.0;
  double w_success_per_step = 1.35;
  std::size_t default_horizon = 200;

  double shaping_max() const { return w_reach + w_grip + w_height; }
  double reward_max(std::size_t horizon) const {
    return shaping_max() + w_success_per_step * static_cast<double>(horizon);
  }
};

inline constexpr PointLiftConstants kPointLift{};

struct PointLiftState {
  double x = 0.0;
  double v = 0.0;
  double object_x = 0.0;
  double height = 0.0;
  bool latched = false;
  bool success = false;
  std::size_t step = 0;
  std::size_t horizon = kPointLift.default_horizon;

  static constexpr std::size_t kObsDim = 5;
  static constexpr std::size_t kActionDim = 2;

  /// [x, v, object_x - x, latched, height / target_height]
  Vector observation() const;
  bool operator==(const PointLiftState&) const = default;
};

PointLiftState point_lift_reset(std::uint64_t seed, std::size_t horizon = kPointLift.default_horizon);
StepResult<PointLiftState> point_lift_step(const PointLiftState& state, std::span<const double> action);
/// Reach term for a given gripper-object distance.
double point_lift_reach_reward(double distance);

// ---------------------------------------------------------------------------
// Hinge-door: angle/velocity of a door with a closing spring, viscous damping
// and Coulomb friction that doubles as static friction (breakaway torque).
// Integration is backward Euler with friction solved exactly as a
// soft-threshold, then projection onto the hinge stops [0, max_angle], so the
// energy 0.5*I*w^2 + 0.5*k*theta^2 never increases under zero torque.
//
// Reward per step: w_open * theta / max_angle, plus latch_bonus on the first
// step with theta >= latch_angle. Bounds: 0 <= r <= w_open + latch_bonus.
// ---------------------------------------------------------------------------
struct HingeDoorConstants {
  double dt = 0.05;
  double inertia = 1.0;
  double torque_scale = 2.0;
  double spring = 1.0;
  double damping = 0.5;
  double friction = 0.6;
  double max_angle = 1.5;
  double latch_angle = 1.0;
  double reset_angle_high = 0.1;
  double w_open = 1.0;
  double latch_bonus = 5.0;
  std::size_t default_horizon = 200;

  double reward_max() const { return w_open + latch_bonus; }
};

inline constexpr HingeDoorConstants kHingeDoor{};

struct HingeDoorState {
  double angle = 0.0;
  double velocity = 0.0;
  bool latched = false;
  std::size_t step = 0;
  std::size_t horizon = kHingeDoor.default_horizon;

  static constexpr std::size_t kObsDim = 3;
  static constexpr std::size_t kActionDim = 1;

  /// [angle, velocity, latched]
  Vector observation() const;
  bool operator==(const HingeDoorState&) const = default;
};

HingeDoorState hinge_door_reset(std::uint64_t seed, std::size_t horizon = kHingeDoor.default_horizon);
StepResult<HingeDoorState> hinge_door_step(const HingeDoorState& state, std::span<const double> action);
/// 0.5 * I * w^2 + 0.5 * k * theta^2
double hinge_door_energy(const HingeDoorState& state);

// ---------------------------------------------------------------------------

enum class EnvKind { kPointLift, kHingeDoor };

EnvKind parse_env_kind(std::string_view name);
std::string_view to_string(EnvKind kind);
EnvSpec env_spec(EnvKind kind, std::size_t horizon);

struct EnvStep {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;
};

/// Owns the state of one environment instance and exposes an
/// observation-vector interface to the training loop.
class Environment {
 public:
  Environment(EnvKind kind, std::size_t horizon);

  const EnvSpec& spec() const { return spec_; }
  EnvKind kind() const { return kind_; }

  Vector reset(std::uint64_t seed);
  EnvStep step(std::span<const double> action);

 private:
  EnvKind kind_;
  EnvSpec spec_;
  std::variant<PointLiftState, HingeDoorState> state_;
};

}  // namespace dspear
