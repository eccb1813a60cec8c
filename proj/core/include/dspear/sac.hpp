#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dspear/neuralnet.hpp"
#include "dspear/policy.hpp"
#include "dspear/replay.hpp"
#include "dspear/rng.hpp"

namespace dspear {

/// Huber loss: x^2/2 inside [-delta, delta], delta(|x| - delta/2) outside.
double huber(double x, double delta);
/// d huber / dx = clamp(x, -delta, delta).
double huber_grad(double x, double delta);

enum class CriticLoss { kHuber, kMse };

struct SacOptions {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> hidden{256, 256};
  double gamma = 0.99;
  double tau = 0.005;
  double huber_delta = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double init_alpha = 0.2;
  /// Defaults to -action_dim.
  std::optional<double> target_entropy;
  CriticLoss critic_loss = CriticLoss::kHuber;
};

struct CriticReport {
  double loss = 0.0;
  /// Post-update 0.5 * (|Q1 - y| + |Q2 - y|), one per batch column.
  std::vector<double> abs_td;
  double grad_norm = 0.0;
};

struct ActorReport {
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TemperatureReport {
  double loss = 0.0;
  double alpha = 0.0;
};

/// One full learner step, as logged by the harness.
struct UpdateReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double temperature_loss = 0.0;
  double alpha = 0.0;
  std::vector<double> abs_td;
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
};

struct CriticLossGrad {
  double loss = 0.0;
  Vector q1;
  Vector q2;
  std::vector<double> grad_q1;
  std::vector<double> grad_q2;
};

struct ActorLossGrad {
  double loss = 0.0;
  Vector log_prob;
  std::vector<double> grad;
};

struct TemperatureLossGrad {
  double loss = 0.0;
  /// d loss / d log(alpha).
  double grad = 0.0;
};

/// Soft actor-critic with twin critics, Polyak-averaged target critics and
/// automatic entropy-temperature tuning (alpha = exp(log_alpha)).
///
/// Critic inputs are the state stacked over the action.
class SacLearner {
 public:
  SacLearner(const SacOptions& options, std::uint64_t seed);

  const SacOptions& options() const { return options_; }
  double target_entropy() const { return target_entropy_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }

  GaussianPolicy& actor() { return actor_; }
  const GaussianPolicy& actor() const { return actor_; }
  DenseNet& critic(int i) { return i == 0 ? q1_ : q2_; }
  const DenseNet& critic(int i) const { return i == 0 ? q1_ : q2_; }
  DenseNet& target_critic(int i) { return i == 0 ? q1_target_ : q2_target_; }
  const DenseNet& target_critic(int i) const { return i == 0 ? q1_target_ : q2_target_; }
  Rng& rng() { return rng_; }

  /// Action for environment interaction: sampled, or tanh(mean).
  Vector act(const Vector& state, bool deterministic);

  /// Soft Bellman target with a' drawn from the current policy. No gradient
  /// flows through the result. Throws NumericError if any entry is not finite.
  Vector compute_target(const Vector& rewards, const Vector& dones, const Matrix& next_states);
  /// Same, with the policy noise for a' supplied by the caller.
  Vector compute_target(const Vector& rewards, const Vector& dones, const Matrix& next_states,
                        const Matrix& next_noise) const;

  /// Sum over both critics of the batch-mean critic loss against fixed y.
  CriticLossGrad critic_loss_and_grad(const TransitionBatch& batch, const Vector& y) const;
  /// mean_b [alpha log pi(a~|s) - min_j Q_j(s, a~)] for a~ = tanh(mu + sigma noise).
  ActorLossGrad actor_loss_and_grad(const Matrix& states, const Matrix& noise) const;
  /// -alpha * mean(log_prob + target_entropy), log_prob treated as constant.
  TemperatureLossGrad temperature_loss_and_grad(const Vector& log_prob) const;

  /// One Adam step per critic on the shared target; returns post-update |TD|.
  CriticReport critic_update(const TransitionBatch& batch);
  /// One Adam step on the actor; critic parameters are not touched.
  ActorReport actor_update(const TransitionBatch& batch);
  /// One Adam step on log(alpha) using fresh policy samples on the batch.
  TemperatureReport temperature_update(const TransitionBatch& batch);
  /// target <- (1 - tau) target + tau critic, for both twins.
  void polyak_update(double tau);

  /// 0.5 * (|Q1(s,a) - y| + |Q2(s,a) - y|) without mutating any parameter.
  std::vector<double> td_errors(const TransitionBatch& batch);

  std::size_t critic_steps() const { return critic_opt_[0].step_count(); }

 private:
  Matrix critic_input(const Matrix& states, const Matrix& actions) const;

  SacOptions options_;
  double target_entropy_;
  Rng rng_;
  GaussianPolicy actor_;
  DenseNet q1_, q2_, q1_target_, q2_target_;
  double log_alpha_;
  Adam actor_opt_;
  Adam critic_opt_[2];
  Adam alpha_opt_;
};

}  // namespace dspear
