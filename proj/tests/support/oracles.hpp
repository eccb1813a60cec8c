#pragma once

// Reference computations written without the library's Eigen code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "dspear/neuralnet.hpp"

namespace dspear::oracle {

/// Plain-loop forward pass over the documented flat parameter layout
/// (per layer: out x in weights column-major, then out biases).
inline std::vector<double> forward(std::span<const double> params, const std::vector<std::size_t>& widths,
                                   std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k];
    const std::size_t out = widths[k + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = params[off + in * out + i];
      for (std::size_t j = 0; j < in; ++j) acc += params[off + j * out + i] * x[j];
      const bool hidden = k + 2 < widths.size();
      z[i] = hidden ? std::max(acc, 0.0) : acc;
    }
    off += in * out + out;
    x = std::move(z);
  }
  return x;
}

inline std::vector<double> forward(const DenseNet& net, const std::vector<double>& x) {
  return forward(net.params(), net.widths(), x);
}

inline double normal_log_pdf(double x, double mean, double log_std) {
  const double s = std::exp(log_std);
  const double z = (x - mean) / s;
  return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// log density of a = tanh(u), u ~ N(mean, exp(log_std)), written with the
/// naive Jacobian (fine for moderate |u|).
inline double squashed_log_prob(double mean, double log_std, double u) {
  const double t = std::tanh(u);
  return normal_log_pdf(u, mean, log_std) - std::log(1.0 - t * t);
}

inline double huber(double x, double delta) {
  if (std::abs(x) <= delta) return 0.5 * x * x;
  return delta * (std::abs(x) - 0.5 * delta);
}

/// Central difference of f with respect to p[i], restoring p[i] afterwards.
inline double central_difference(const std::function<double()>& f, double& p, double h = 1e-5) {
  const double saved = p;
  p = saved + h;
  const double up = f();
  p = saved - h;
  const double down = f();
  p = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| relative to the larger magnitude, with an absolute floor so that
/// gradients that are zero up to round-off compare as equal.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dspear::oracle
