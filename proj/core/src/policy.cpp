#include "dspear/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dspear/errors.hpp"

namespace dspear {
namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

GaussianPolicy::GaussianPolicy(std::size_t state_dim, std::size_t action_dim,
                               const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> widths{state_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * action_dim);
  net_ = DenseNet::uniform_init(widths, rng);
}

GaussianPolicy::GaussianPolicy(DenseNet body) : net_(std::move(body)) {
  if (net_.output_dim() == 0 || net_.output_dim() % 2 != 0) {
    throw ShapeError("policy body must output 2 * action_dim values");
  }
}

double GaussianPolicy::log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

double GaussianPolicy::log_prob_1d(double mean, double log_std, double u) {
  const double z = (u - mean) / std::exp(log_std);
  return -0.5 * z * z - log_std - kHalfLog2Pi - log_one_minus_tanh_sq(u);
}

PolicySample GaussianPolicy::sample(const Matrix& states, const Matrix& noise) const {
  const auto adim = static_cast<Eigen::Index>(action_dim());
  if (noise.rows() != adim || noise.cols() != states.cols()) {
    throw ShapeError("policy sample: noise must be action_dim x batch");
  }
  PolicySample s;
  s.tape = net_.forward_tape(states);
  const Matrix& out = s.tape.output;
  s.mean = out.topRows(adim);
  const Matrix raw = out.bottomRows(adim);
  s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.log_std_clamped = (raw.array() < kLogStdMin) || (raw.array() > kLogStdMax);
  s.noise = noise;
  s.pre_tanh = s.mean.array() + s.log_std.array().exp() * noise.array();
  s.action = s.pre_tanh.array().tanh();
  // Keep actions strictly inside the open box even when |u| saturates tanh.
  constexpr double kEdge = 1.0 - 1e-12;
  s.action = s.action.cwiseMax(-kEdge).cwiseMin(kEdge);

  s.log_prob.resize(states.cols());
  for (Eigen::Index b = 0; b < states.cols(); ++b) {
    double lp = 0.0;
    for (Eigen::Index d = 0; d < adim; ++d) {
      const double xi = noise(d, b);
      lp += -0.5 * xi * xi - s.log_std(d, b) - kHalfLog2Pi - log_one_minus_tanh_sq(s.pre_tanh(d, b));
    }
    s.log_prob(b) = lp;
  }
  return s;
}

PolicySample GaussianPolicy::sample(const Matrix& states, Rng& rng) const {
  Matrix noise(action_dim(), states.cols());
  for (Eigen::Index b = 0; b < noise.cols(); ++b) {
    for (Eigen::Index d = 0; d < noise.rows(); ++d) noise(d, b) = rng.normal();
  }
  return sample(states, noise);
}

Matrix GaussianPolicy::deterministic_action(const Matrix& states) const {
  const auto adim = static_cast<Eigen::Index>(action_dim());
  Matrix out = net_.forward(states);
  return out.topRows(adim).array().tanh();
}

Vector GaussianPolicy::deterministic_action(const Vector& state) const {
  return deterministic_action(Matrix(state)).col(0);
}

std::vector<double> GaussianPolicy::backward(const PolicySample& s, const Matrix& action_grad,
                                             const Vector& log_prob_grad) const {
  const auto adim = static_cast<Eigen::Index>(action_dim());
  const Eigen::Index batch = s.action.cols();
  if (action_grad.rows() != adim || action_grad.cols() != batch || log_prob_grad.size() != batch) {
    throw ShapeError("policy backward: gradient shapes do not match the sample");
  }
  // d log_prob / d u = 2 tanh(u); d log_prob / d log_std = -1 at fixed u.
  Matrix out_grad(2 * adim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double gl = log_prob_grad(b);
    for (Eigen::Index d = 0; d < adim; ++d) {
      const double a = std::tanh(s.pre_tanh(d, b));
      const double sigma_xi = std::exp(s.log_std(d, b)) * s.noise(d, b);
      const double gu = action_grad(d, b) * (1.0 - a * a) + gl * 2.0 * a;
      out_grad(d, b) = gu;
      out_grad(adim + d, b) = s.log_std_clamped(d, b) ? 0.0 : gu * sigma_xi - gl;
    }
  }
  return net_.backward(s.tape, out_grad, true).params;
}

}  // namespace dspear
