#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grczsl/matrix.hpp"
#include "grczsl/rng.hpp"

namespace grczsl::nn {

enum class Activation : std::uint8_t { Linear = 0, ReLU = 1 };

struct DenseLayer {
  Matrix weights;  // out × in
  std::vector<double> bias;
  Activation activation = Activation::Linear;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Layer with weights uniform in ±sqrt(6 / (fan_in + fan_out)) and zero bias.
DenseLayer make_layer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng);
DenseLayer zero_layer(std::size_t in_dim, std::size_t out_dim, Activation act);

// activation(input · Wᵀ + b), one output row per input row.
Matrix affine_forward(const DenseLayer& layer, const Matrix& input);

struct AffineGrads {
  Matrix weights;
  std::vector<double> bias;
  Matrix input;
};

// Gradients of a scalar loss given dL/d(output). The ReLU mask is taken from
// the recomputed pre-activation (zero gradient where it is not positive).
AffineGrads affine_backward(const DenseLayer& layer, const Matrix& input, const Matrix& upstream);
// Same, reusing the forward output instead of recomputing it. For ReLU a
// positive output is equivalent to a positive pre-activation.
AffineGrads affine_backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                            const Matrix& upstream);

// Inverted-dropout keep mask: each entry is 0 with probability `rate`, else 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);
Matrix dropout_apply(const Matrix& input, double rate, std::uint64_t seed, bool training);
// Elementwise product; used to apply a mask forwards and to route gradients backwards.
Matrix hadamard(const Matrix& a, const Matrix& b);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments for one parameter block.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : first_moment(n, 0.0), second_moment(n, 0.0), config(cfg) {}
};

// One bias-corrected Adam step in place. Throws NumericError naming `block`
// if any gradient entry is non-finite; params are untouched in that case.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 std::string_view block = "params");

// Gradient of a scalar loss w.r.t. one layer's parameters.
struct LayerGrad {
  Matrix weights;
  std::vector<double> bias;

  static LayerGrad zeros_like(const DenseLayer& layer);
  static LayerGrad from(AffineGrads&& g) { return {std::move(g.weights), std::move(g.bias)}; }
  // this += scale * other
  void add_scaled(const LayerGrad& other, double scale);
  bool all_finite() const noexcept;
};

// Adam over a fixed list of layers, one AdamState per weight and bias block.
class LayerAdam {
 public:
  LayerAdam(AdamConfig config, std::span<const DenseLayer* const> layers);

  // Applies one step; names are used for error reporting only.
  void step(std::span<DenseLayer* const> layers, std::span<const LayerGrad> grads,
            std::span<const std::string_view> names);
  std::uint64_t step_count() const noexcept { return states_.empty() ? 0 : states_.front().step_count; }

 private:
  std::vector<AdamState> states_;
};

struct SoftmaxLoss {
  double loss = 0.0;
  Matrix grad_logits;
};

// Mean negative log-likelihood of the true class and (softmax - onehot) / batch.
SoftmaxLoss softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

// Row-wise softmax with max-subtraction.
Matrix softmax(const Matrix& logits);

}  // namespace grczsl::nn
