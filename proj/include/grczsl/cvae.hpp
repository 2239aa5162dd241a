#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "grczsl/matrix.hpp"
#include "grczsl/nn.hpp"
#include "grczsl/residency.hpp"

namespace grczsl {

// Network widths. The defaults are the published architecture; the toy
// suites shrink the hidden and latent widths to keep runs short.
struct CvaeArch {
  std::size_t feature_dim = 2048;
  std::size_t attribute_dim = 312;
  std::size_t encoder_hidden = 512;
  std::size_t decoder_hidden = 1024;
  std::size_t latent_dim = 50;
  double dropout_rate = 0.3;

  friend bool operator==(const CvaeArch&, const CvaeArch&) = default;
};

// q(z | x, a): [x, a] → L1 (ReLU) → dropout → L2 (ReLU) → {μ, log σ²} (linear heads).
struct Encoder {
  nn::DenseLayer l1;
  nn::DenseLayer l2;
  nn::DenseLayer mu_head;
  nn::DenseLayer logvar_head;

  friend bool operator==(const Encoder&, const Encoder&) = default;
};

// p(x | z, a): [z, a] → L3 (ReLU) → linear output head.
struct Decoder {
  nn::DenseLayer l3;
  nn::DenseLayer out;
  std::size_t latent_dim = 0;

  std::size_t attribute_dim() const noexcept { return l3.in_dim() - latent_dim; }
  std::size_t feature_dim() const noexcept { return out.out_dim(); }

  friend bool operator==(const Decoder&, const Decoder&) = default;
};

// A decoder held on its own, detached from any encoder. Only the replay
// engine creates these; residency accounting counts them separately.
struct FrozenDecoder {
  Decoder decoder;
  residency::Token<residency::Kind::FrozenDecoder> token;
};

struct CvaeParams {
  CvaeArch arch;
  Encoder encoder;
  Decoder decoder;
  residency::Token<residency::Kind::FullCvae> token;

  friend bool operator==(const CvaeParams&, const CvaeParams&) = default;
};

inline constexpr std::size_t kCvaeLayerCount = 6;
inline constexpr std::array<std::string_view, kCvaeLayerCount> kCvaeLayerNames = {
    "encoder.l1", "encoder.l2", "encoder.mu", "encoder.logvar", "decoder.l3", "decoder.out"};

// Layers in kCvaeLayerNames order.
std::array<nn::DenseLayer*, kCvaeLayerCount> cvae_layers(CvaeParams& params);
std::array<const nn::DenseLayer*, kCvaeLayerCount> cvae_layers(const CvaeParams& params);

using CvaeGrads = std::array<nn::LayerGrad, kCvaeLayerCount>;
CvaeGrads zero_grads(const CvaeParams& params);
void add_scaled(CvaeGrads& into, const CvaeGrads& other, double scale);

CvaeParams init_cvae(const CvaeArch& arch, std::uint64_t seed);
CvaeParams zero_cvae(const CvaeArch& arch);

// Features, attributes and class labels of a set of samples from one task.
struct LabeledBatch {
  Matrix features;
  Matrix attributes;
  std::vector<std::size_t> labels;
  std::size_t task_id = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

// Per-row Gaussian posterior; logvar is the log of the diagonal variance.
struct LatentDistribution {
  Matrix mu;
  Matrix logvar;
};

// Dropout (training only) draws its mask from `seed`.
LatentDistribution encode(const CvaeParams& params, const Matrix& x, const Matrix& a, std::uint64_t seed,
                          bool training);

// z = μ + exp(logvar / 2) ⊙ ε
Matrix reparameterize(const LatentDistribution& dist, const Matrix& noise);
Matrix reparameterize(const LatentDistribution& dist, std::uint64_t seed);
Matrix standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed);

Matrix decode(const Decoder& decoder, const Matrix& z, const Matrix& a);

// Batch mean of ½ Σⱼ (μⱼ² + exp(lvⱼ) − lvⱼ − 1).
double kl_divergence(const LatentDistribution& dist);
// Batch mean of ‖x − x̂‖².
double reconstruction_loss(const Matrix& x, const Matrix& reconstruction);

struct CvaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  CvaeGrads grads;
};

// reconstruction + kl_weight · KL with one reparameterized sample per row.
// Dropout mask and noise are fixed by `seed`, so the loss is a deterministic
// function of the parameters for a given seed.
CvaeLoss cvae_loss(const CvaeParams& params, const Matrix& x, const Matrix& a, double kl_weight,
                   std::uint64_t seed);
CvaeLoss cvae_loss(const CvaeParams& params, const LabeledBatch& batch, double kl_weight, std::uint64_t seed);

// n samples decode(zᵢ, a) with zᵢ ~ N(0, I).
Matrix generate(const Decoder& decoder, std::span<const double> attribute, std::size_t n, std::uint64_t seed);

}  // namespace grczsl
