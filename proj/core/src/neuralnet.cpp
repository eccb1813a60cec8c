#include "dspear/neuralnet.hpp"

#include <cmath>
#include <string>

#include "dspear/errors.hpp"

namespace dspear {

DenseNet::DenseNet(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ShapeError("DenseNet needs at least input and output widths");
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    if (widths[k] == 0 || widths[k + 1] == 0) throw ShapeError("DenseNet layer width must be >= 1");
    LayerShape shape{widths[k], widths[k + 1]};
    layers_.push_back(shape);
    offsets_.push_back(total);
    total += shape.num_params();
  }
  params_.assign(total, 0.0);
}

DenseNet DenseNet::uniform_init(const std::vector<std::size_t>& widths, Rng& rng) {
  DenseNet net(widths);
  for (std::size_t k = 0; k < net.layers_.size(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.layers_[k].in));
    const std::size_t begin = net.offsets_[k];
    const std::size_t end = begin + net.layers_[k].num_params();
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = rng.uniform(-bound, bound);
  }
  return net;
}

std::vector<std::size_t> DenseNet::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().in);
  for (const auto& l : layers_) w.push_back(l.out);
  return w;
}

Eigen::Map<Matrix> DenseNet::weight(std::size_t layer) {
  const auto& s = layers_.at(layer);
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(s.out),
          static_cast<Eigen::Index>(s.in)};
}

Eigen::Map<const Matrix> DenseNet::weight(std::size_t layer) const {
  const auto& s = layers_.at(layer);
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(s.out),
          static_cast<Eigen::Index>(s.in)};
}

Eigen::Map<Vector> DenseNet::bias(std::size_t layer) {
  const auto& s = layers_.at(layer);
  return {params_.data() + offsets_[layer] + s.in * s.out, static_cast<Eigen::Index>(s.out)};
}

Eigen::Map<const Vector> DenseNet::bias(std::size_t layer) const {
  const auto& s = layers_.at(layer);
  return {params_.data() + offsets_[layer] + s.in * s.out, static_cast<Eigen::Index>(s.out)};
}

// Vectorized kernels peel differently depending on the address of their
// operands, so products read from and write to owned (aligned) matrices only.
// That keeps results independent of where params_ happens to live.
Matrix DenseNet::aligned_weight(std::size_t layer) const { return Matrix(weight(layer)); }

Vector DenseNet::forward(const Vector& input) const {
  Matrix out = forward(Matrix(input));
  return out.col(0);
}

Matrix DenseNet::forward(const Matrix& inputs) const {
  if (layers_.empty()) throw ShapeError("forward on an empty network");
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(inputs.rows()) +
                     " rows, network expects " + std::to_string(input_dim()));
  }
  Matrix x = inputs;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Matrix z = aligned_weight(k) * x;
    z.colwise() += Vector(bias(k));
    if (k + 1 < layers_.size()) z = z.cwiseMax(0.0);
    x = std::move(z);
  }
  return x;
}

Tape DenseNet::forward_tape(const Matrix& inputs) const {
  if (layers_.empty()) throw ShapeError("forward on an empty network");
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(inputs.rows()) +
                     " rows, network expects " + std::to_string(input_dim()));
  }
  Tape tape;
  tape.shapes = layers_;
  tape.layer_inputs.reserve(layers_.size());
  tape.layer_inputs.push_back(inputs);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Matrix z = aligned_weight(k) * tape.layer_inputs.back();
    z.colwise() += Vector(bias(k));
    if (k + 1 < layers_.size()) {
      tape.layer_inputs.push_back(z.cwiseMax(0.0));
    } else {
      tape.output = std::move(z);
    }
  }
  return tape;
}

Gradients DenseNet::backward(const Tape& tape, const Matrix& output_grad, bool want_params) const {
  if (tape.empty()) throw StateError("backward called without cached forward activations");
  if (tape.shapes != layers_) throw StateError("backward: tape was recorded on a different network shape");
  if (output_grad.rows() != tape.output.rows() || output_grad.cols() != tape.output.cols()) {
    throw ShapeError("backward: output gradient shape does not match forward output");
  }

  Gradients grads;
  if (want_params) grads.params.assign(params_.size(), 0.0);

  Matrix delta = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Matrix& x = tape.layer_inputs[k];
    const auto& s = layers_[k];
    if (want_params) {
      Eigen::Map<Matrix> gw(grads.params.data() + offsets_[k], static_cast<Eigen::Index>(s.out),
                            static_cast<Eigen::Index>(s.in));
      Eigen::Map<Vector> gb(grads.params.data() + offsets_[k] + s.in * s.out,
                            static_cast<Eigen::Index>(s.out));
      const Matrix w_grad = delta * x.transpose();
      const Vector b_grad = delta.rowwise().sum();
      gw = w_grad;
      gb = b_grad;
    }
    Matrix upstream = aligned_weight(k).transpose() * delta;
    if (k > 0) {
      // ReLU: the recorded input of layer k is max(z, 0); zero where z <= 0.
      upstream = upstream.cwiseProduct((x.array() > 0.0).cast<double>().matrix());
    }
    delta = std::move(upstream);
  }
  grads.input = std::move(delta);
  return grads;
}

bool DenseNet::all_finite() const {
  for (double p : params_) {
    if (!std::isfinite(p)) return false;
  }
  return true;
}

Adam::Adam(std::size_t num_params, AdamOptions options)
    : options_(options), m_(num_params, 0.0), v_(num_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam: expected " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()) + " params / " + std::to_string(grads.size()) +
                     " grads");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("Adam: non-finite gradient at parameter index " + std::to_string(i));
    }
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
  }
}

void polyak_average(std::span<double> target, std::span<const double> source, double tau) {
  if (target.size() != source.size()) throw ShapeError("polyak_average: size mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = (1.0 - tau) * target[i] + tau * source[i];
  }
}

}  // namespace dspear
