#include "grczsl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "grczsl/errors.hpp"

namespace grczsl::nn {

DenseLayer make_layer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
  DenseLayer layer = zero_layer(in_dim, out_dim, act);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
  return layer;
}

DenseLayer zero_layer(std::size_t in_dim, std::size_t out_dim, Activation act) {
  return DenseLayer{Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0), act};
}

Matrix affine_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.cols() != layer.in_dim()) {
    throw DimensionError("affine_forward: input " + input.shape_string() + " does not match weights " +
                         layer.weights.shape_string());
  }
  Matrix out = matmul_transposed(input, layer.weights);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      double v = row[j] + layer.bias[j];
      if (layer.activation == Activation::ReLU && v < 0.0) v = 0.0;
      row[j] = v;
    }
  }
  return out;
}

namespace {

AffineGrads backward_with_mask(const DenseLayer& layer, const Matrix& input, const Matrix* output,
                               const Matrix& upstream) {
  if (input.cols() != layer.in_dim() || upstream.cols() != layer.out_dim() || upstream.rows() != input.rows()) {
    throw DimensionError("affine_backward: input " + input.shape_string() + ", upstream " +
                         upstream.shape_string() + ", weights " + layer.weights.shape_string());
  }
  Matrix delta = upstream;
  if (layer.activation == Activation::ReLU) {
    Matrix pre;
    if (output == nullptr) {
      pre = matmul_transposed(input, layer.weights);
      for (std::size_t r = 0; r < pre.rows(); ++r)
        for (std::size_t j = 0; j < pre.cols(); ++j) pre(r, j) += layer.bias[j];
      output = &pre;
    }
    auto d = delta.values();
    auto o = output->values();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!(o[i] > 0.0)) d[i] = 0.0;
  }
  AffineGrads g;
  g.weights = transposed_matmul(delta, input);
  g.bias.assign(layer.out_dim(), 0.0);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    auto row = delta.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) g.bias[j] += row[j];
  }
  g.input = matmul(delta, layer.weights);
  return g;
}

}  // namespace

AffineGrads affine_backward(const DenseLayer& layer, const Matrix& input, const Matrix& upstream) {
  return backward_with_mask(layer, input, nullptr, upstream);
}

AffineGrads affine_backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                            const Matrix& upstream) {
  if (output.rows() != upstream.rows() || output.cols() != upstream.cols()) {
    throw DimensionError("affine_backward: output " + output.shape_string() + " vs upstream " +
                         upstream.shape_string());
  }
  return backward_with_mask(layer, input, &output, upstream);
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("hadamard: " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

Matrix dropout_apply(const Matrix& input, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;
  Rng rng(seed);
  return hadamard(input, dropout_mask(input.rows(), input.cols(), rate, rng));
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state, std::string_view block) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("adam_update: shape mismatch in block '" + std::string(block) + "'");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient in parameter block '" + std::string(block) + "' at entry " +
                         std::to_string(i));
    }
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

LayerGrad LayerGrad::zeros_like(const DenseLayer& layer) {
  return {Matrix(layer.weights.rows(), layer.weights.cols()), std::vector<double>(layer.bias.size(), 0.0)};
}

void LayerGrad::add_scaled(const LayerGrad& other, double scale) {
  if (weights.rows() != other.weights.rows() || weights.cols() != other.weights.cols() ||
      bias.size() != other.bias.size()) {
    throw DimensionError("LayerGrad::add_scaled: " + weights.shape_string() + " vs " +
                         other.weights.shape_string());
  }
  auto w = weights.values();
  auto ow = other.weights.values();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += scale * other.bias[i];
}

bool LayerGrad::all_finite() const noexcept {
  return weights.all_finite() && std::all_of(bias.begin(), bias.end(), [](double v) { return std::isfinite(v); });
}

LayerAdam::LayerAdam(AdamConfig config, std::span<const DenseLayer* const> layers) {
  states_.reserve(layers.size() * 2);
  for (const DenseLayer* layer : layers) {
    states_.emplace_back(layer->weights.size(), config);
    states_.emplace_back(layer->bias.size(), config);
  }
}

void LayerAdam::step(std::span<DenseLayer* const> layers, std::span<const LayerGrad> grads,
                     std::span<const std::string_view> names) {
  if (layers.size() * 2 != states_.size() || grads.size() != layers.size() || names.size() != layers.size()) {
    throw DimensionError("LayerAdam::step: layer/grad/state count mismatch");
  }
  // Validate everything first so a bad block leaves all parameters untouched.
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient in parameter block '" + std::string(names[i]) + "'");
    }
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_update(layers[i]->weights.values(), grads[i].weights.values(), states_[2 * i], names[i]);
    adam_update(layers[i]->bias, grads[i].bias, states_[2 * i + 1], names[i]);
  }
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return p;
}

SoftmaxLoss softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         logits.shape_string());
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= logits.cols()) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(labels[r]) + " at row " +
                       std::to_string(r) + " out of range for " + std::to_string(logits.cols()) + " classes");
    }
  }
  SoftmaxLoss out;
  out.grad_logits = Matrix(logits.rows(), logits.cols());
  if (logits.rows() == 0) return out;
  const double inv_batch = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[labels[r]];
    auto g = out.grad_logits.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) g[j] = std::exp(row[j] - log_z) * inv_batch;
    g[labels[r]] -= inv_batch;
  }
  out.loss = total * inv_batch;
  return out;
}

}  // namespace grczsl::nn
