#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dspear/rng.hpp"

namespace dspear {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One affine layer, `out x in` weights followed by `out` biases.
struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;

  std::size_t num_params() const { return in * out + out; }
  bool operator==(const LayerShape&) const = default;
};

enum class Activation { kRelu, kLinear };

/// Activations recorded by a batched forward pass. Columns are samples.
///
/// `layer_inputs[k]` is the input that layer k saw; the last entry of
/// `layer_inputs` is followed by `output`. A default-constructed tape is
/// empty and rejected by `DenseNet::backward`.
struct Tape {
  std::vector<LayerShape> shapes;
  std::vector<Matrix> layer_inputs;
  Matrix output;

  bool empty() const { return layer_inputs.empty(); }
};

struct Gradients {
  /// Same layout as `DenseNet::params()`.
  std::vector<double> params;
  /// dLoss/dInput, one column per sample.
  Matrix input;
};

/// Fully connected network: ReLU on hidden layers, linear output.
///
/// All parameters live in one contiguous buffer (per layer: weights in
/// column-major order, then biases), so optimizers and Polyak averaging can
/// operate on flat spans.
class DenseNet {
 public:
  DenseNet() = default;

  /// `widths` = {input, hidden..., output}; parameters start at zero.
  explicit DenseNet(const std::vector<std::size_t>& widths);

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  static DenseNet uniform_init(const std::vector<std::size_t>& widths, Rng& rng);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<LayerShape>& shapes() const { return layers_; }
  std::vector<std::size_t> widths() const;

  Activation hidden_activation() const { return Activation::kRelu; }
  Activation output_activation() const { return Activation::kLinear; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  /// Single-sample forward pass. Throws ShapeError on a fan-in mismatch.
  Vector forward(const Vector& input) const;

  /// Batched forward pass, one sample per column.
  Matrix forward(const Matrix& inputs) const;

  /// Batched forward pass that records what `backward` needs.
  Tape forward_tape(const Matrix& inputs) const;

  /// Reverse-mode gradients of sum_{ij} output_grad(i,j) * output(i,j).
  /// With `want_params == false` only the input gradient is computed and
  /// `Gradients::params` is left empty.
  Gradients backward(const Tape& tape, const Matrix& output_grad,
                     bool want_params = true) const;

  bool all_finite() const;

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  Matrix aligned_weight(std::size_t layer) const;

  std::vector<double> params_;
};

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t num_params, AdamOptions options);

  /// Throws NumericError naming the first non-finite gradient entry, and
  /// ShapeError when sizes disagree. Parameters are untouched on error.
  void step(std::span<double> params, std::span<const double> grads);

  std::size_t step_count() const { return t_; }
  const AdamOptions& options() const { return options_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

/// Elementwise target <- (1 - tau) * target + tau * source.
void polyak_average(std::span<double> target, std::span<const double> source, double tau);

}  // namespace dspear
