#pragma once

#include <cstddef>
#include <vector>

#include "dspear/neuralnet.hpp"

namespace dspear {

/// Everything a reparameterized policy sample produced, kept so the caller
/// can push gradients back through it. Columns are samples.
struct PolicySample {
  Matrix mean;
  Matrix log_std;   // after clamping
  Matrix noise;     // standard-normal draws
  Matrix pre_tanh;  // mean + exp(log_std) * noise
  Matrix action;    // tanh(pre_tanh), strictly inside (-1, 1)
  Vector log_prob;  // includes the tanh change-of-variables term
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_clamped;
  Tape tape;
};

/// Tanh-squashed diagonal Gaussian policy. The body is a DenseNet whose
/// output stacks the mean (first `action_dim` rows) over the raw log-std.
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(std::size_t state_dim, std::size_t action_dim,
                 const std::vector<std::size_t>& hidden, Rng& rng);
  explicit GaussianPolicy(DenseNet body);

  std::size_t state_dim() const { return net_.input_dim(); }
  std::size_t action_dim() const { return net_.output_dim() / 2; }

  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  /// Reparameterized sample with caller-supplied noise (action_dim x batch).
  PolicySample sample(const Matrix& states, const Matrix& noise) const;
  PolicySample sample(const Matrix& states, Rng& rng) const;

  /// tanh(mean), used for evaluation.
  Matrix deterministic_action(const Matrix& states) const;
  Vector deterministic_action(const Vector& state) const;

  /// Parameter gradients given dLoss/dAction and dLoss/dLogProb for each
  /// sample. Noise is held fixed (reparameterization trick).
  std::vector<double> backward(const PolicySample& sample, const Matrix& action_grad,
                               const Vector& log_prob_grad) const;

  /// log density of the squashed action for one dimension, evaluated at the
  /// pre-squash value `u`.
  static double log_prob_1d(double mean, double log_std, double u);

  /// Numerically stable log(1 - tanh(u)^2).
  static double log_one_minus_tanh_sq(double u);

 private:
  DenseNet net_;
};

}  // namespace dspear
