#include "dspear/sac.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dspear/errors.hpp"

namespace dspear {
namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_finite(const Vector& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) {
      throw NumericError(std::string(what) + " is not finite at batch position " + std::to_string(i));
    }
  }
}

}  // namespace

double huber(double x, double delta) {
  const double ax = std::abs(x);
  return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
}

double huber_grad(double x, double delta) { return std::clamp(x, -delta, delta); }

SacLearner::SacLearner(const SacOptions& options, std::uint64_t seed)
    : options_(options),
      target_entropy_(options.target_entropy.value_or(-static_cast<double>(options.action_dim))),
      rng_(seed) {
  if (options.state_dim == 0 || options.action_dim == 0) throw ConfigError("SAC dimensions must be >= 1");
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(options.huber_delta > 0.0)) throw ConfigError("huber delta must be > 0");
  if (!(options.tau > 0.0 && options.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(options.init_alpha > 0.0)) throw ConfigError("initial alpha must be > 0");

  Rng init(Rng::derive(seed, 1));
  actor_ = GaussianPolicy(options.state_dim, options.action_dim, options.hidden, init);
  std::vector<std::size_t> qw{options.state_dim + options.action_dim};
  qw.insert(qw.end(), options.hidden.begin(), options.hidden.end());
  qw.push_back(1);
  q1_ = DenseNet::uniform_init(qw, init);
  q2_ = DenseNet::uniform_init(qw, init);
  q1_target_ = q1_;
  q2_target_ = q2_;
  log_alpha_ = std::log(options.init_alpha);

  actor_opt_ = Adam(actor_.net().num_params(), {.lr = options.actor_lr});
  critic_opt_[0] = Adam(q1_.num_params(), {.lr = options.critic_lr});
  critic_opt_[1] = Adam(q2_.num_params(), {.lr = options.critic_lr});
  alpha_opt_ = Adam(1, {.lr = options.alpha_lr});
}

double SacLearner::alpha() const { return std::exp(log_alpha_); }

Matrix SacLearner::critic_input(const Matrix& states, const Matrix& actions) const {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

Vector SacLearner::act(const Vector& state, bool deterministic) {
  if (deterministic) return actor_.deterministic_action(state);
  return actor_.sample(Matrix(state), rng_).action.col(0);
}

Vector SacLearner::compute_target(const Vector& rewards, const Vector& dones,
                                  const Matrix& next_states) {
  Matrix noise(options_.action_dim, next_states.cols());
  for (Eigen::Index b = 0; b < noise.cols(); ++b) {
    for (Eigen::Index d = 0; d < noise.rows(); ++d) noise(d, b) = rng_.normal();
  }
  return compute_target(rewards, dones, next_states, noise);
}

Vector SacLearner::compute_target(const Vector& rewards, const Vector& dones,
                                  const Matrix& next_states, const Matrix& next_noise) const {
  if (rewards.size() != next_states.cols() || dones.size() != next_states.cols()) {
    throw ShapeError("compute_target: batch sizes differ");
  }
  const PolicySample next = actor_.sample(next_states, next_noise);
  const Matrix x = critic_input(next_states, next.action);
  const Vector t1 = q1_target_.forward(x).row(0).transpose();
  const Vector t2 = q2_target_.forward(x).row(0).transpose();
  const double a = alpha();
  Vector y(rewards.size());
  for (Eigen::Index b = 0; b < y.size(); ++b) {
    const double soft_v = std::min(t1(b), t2(b)) - a * next.log_prob(b);
    y(b) = rewards(b) + options_.gamma * (1.0 - dones(b)) * soft_v;
  }
  require_finite(y, "soft target");
  return y;
}

CriticLossGrad SacLearner::critic_loss_and_grad(const TransitionBatch& batch, const Vector& y) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw InsufficientDataError("critic loss on an empty batch");
  if (y.size() != n) throw ShapeError("critic loss: target size differs from batch size");
  const Matrix x = critic_input(batch.states, batch.actions);
  const double delta = options_.huber_delta;
  const bool use_huber = options_.critic_loss == CriticLoss::kHuber;

  CriticLossGrad out;
  const DenseNet* nets[2] = {&q1_, &q2_};
  for (int i = 0; i < 2; ++i) {
    const Tape tape = nets[i]->forward_tape(x);
    Vector q = tape.output.row(0).transpose();
    Matrix g(1, n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const double r = q(b) - y(b);
      loss += use_huber ? huber(r, delta) : 0.5 * r * r;
      g(0, b) = (use_huber ? huber_grad(r, delta) : r) / static_cast<double>(n);
    }
    out.loss += loss / static_cast<double>(n);
    auto grads = nets[i]->backward(tape, g, true).params;
    if (i == 0) {
      out.q1 = std::move(q);
      out.grad_q1 = std::move(grads);
    } else {
      out.q2 = std::move(q);
      out.grad_q2 = std::move(grads);
    }
  }
  return out;
}

ActorLossGrad SacLearner::actor_loss_and_grad(const Matrix& states, const Matrix& noise) const {
  const Eigen::Index n = states.cols();
  if (n == 0) throw InsufficientDataError("actor loss on an empty batch");
  const auto adim = static_cast<Eigen::Index>(options_.action_dim);
  const double a = alpha();
  const double inv_n = 1.0 / static_cast<double>(n);

  const PolicySample s = actor_.sample(states, noise);
  const Matrix x = critic_input(states, s.action);
  const Tape t1 = q1_.forward_tape(x);
  const Tape t2 = q2_.forward_tape(x);

  ActorLossGrad out;
  Matrix g1 = Matrix::Zero(1, n);
  Matrix g2 = Matrix::Zero(1, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double v1 = t1.output(0, b);
    const double v2 = t2.output(0, b);
    out.loss += (a * s.log_prob(b) - std::min(v1, v2)) * inv_n;
    if (v1 <= v2) {
      g1(0, b) = -inv_n;
    } else {
      g2(0, b) = -inv_n;
    }
  }
  // Only dQ/da is needed; critic parameter gradients are never formed.
  const Matrix dx = q1_.backward(t1, g1, false).input + q2_.backward(t2, g2, false).input;
  const Matrix action_grad = dx.bottomRows(adim);
  const Vector log_prob_grad = Vector::Constant(n, a * inv_n);
  out.grad = actor_.backward(s, action_grad, log_prob_grad);
  out.log_prob = s.log_prob;
  return out;
}

TemperatureLossGrad SacLearner::temperature_loss_and_grad(const Vector& log_prob) const {
  if (log_prob.size() == 0) throw InsufficientDataError("temperature loss on an empty batch");
  const double mean_term = (log_prob.array() + target_entropy_).mean();
  const double a = alpha();
  // d(-exp(l) m)/dl = -exp(l) m, so loss and gradient coincide.
  return {-a * mean_term, -a * mean_term};
}

CriticReport SacLearner::critic_update(const TransitionBatch& batch) {
  const Vector y = compute_target(batch.rewards, batch.dones, batch.next_states);
  CriticLossGrad lg = critic_loss_and_grad(batch, y);
  if (!std::isfinite(lg.loss)) throw NumericError("critic loss is not finite; step aborted");

  critic_opt_[0].step(q1_.params(), lg.grad_q1);
  critic_opt_[1].step(q2_.params(), lg.grad_q2);

  CriticReport report;
  report.loss = lg.loss;
  report.grad_norm = std::sqrt(l2_norm(lg.grad_q1) * l2_norm(lg.grad_q1) +
                               l2_norm(lg.grad_q2) * l2_norm(lg.grad_q2));
  const Matrix x = critic_input(batch.states, batch.actions);
  const Matrix q1 = q1_.forward(x);
  const Matrix q2 = q2_.forward(x);
  report.abs_td.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto j = static_cast<Eigen::Index>(b);
    report.abs_td[b] = 0.5 * (std::abs(q1(0, j) - y(j)) + std::abs(q2(0, j) - y(j)));
    if (!std::isfinite(report.abs_td[b])) {
      throw NumericError("post-update TD error is not finite at batch position " + std::to_string(b));
    }
  }
  return report;
}

ActorReport SacLearner::actor_update(const TransitionBatch& batch) {
  Matrix noise(options_.action_dim, batch.states.cols());
  for (Eigen::Index b = 0; b < noise.cols(); ++b) {
    for (Eigen::Index d = 0; d < noise.rows(); ++d) noise(d, b) = rng_.normal();
  }
  ActorLossGrad lg = actor_loss_and_grad(batch.states, noise);
  if (!std::isfinite(lg.loss)) throw NumericError("actor loss is not finite; step aborted");
  actor_opt_.step(actor_.net().params(), lg.grad);
  return {lg.loss, l2_norm(lg.grad)};
}

TemperatureReport SacLearner::temperature_update(const TransitionBatch& batch) {
  const PolicySample s = actor_.sample(batch.states, rng_);
  const TemperatureLossGrad lg = temperature_loss_and_grad(s.log_prob);
  if (!std::isfinite(lg.loss)) throw NumericError("temperature loss is not finite; step aborted");
  double param[1] = {log_alpha_};
  const double grad[1] = {lg.grad};
  alpha_opt_.step(param, grad);
  log_alpha_ = param[0];
  return {lg.loss, alpha()};
}

void SacLearner::polyak_update(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  polyak_average(q1_target_.params(), q1_.params(), tau);
  polyak_average(q2_target_.params(), q2_.params(), tau);
}

std::vector<double> SacLearner::td_errors(const TransitionBatch& batch) {
  const Vector y = compute_target(batch.rewards, batch.dones, batch.next_states);
  const Matrix x = critic_input(batch.states, batch.actions);
  const Matrix q1 = q1_.forward(x);
  const Matrix q2 = q2_.forward(x);
  std::vector<double> out(batch.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto j = static_cast<Eigen::Index>(b);
    out[b] = 0.5 * (std::abs(q1(0, j) - y(j)) + std::abs(q2(0, j) - y(j)));
  }
  return out;
}

}  // namespace dspear
