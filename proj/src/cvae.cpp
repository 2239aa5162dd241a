#include "grczsl/cvae.hpp"

#include <cmath>

#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"

namespace grczsl {

using nn::Activation;

std::array<nn::DenseLayer*, kCvaeLayerCount> cvae_layers(CvaeParams& p) {
  return {&p.encoder.l1, &p.encoder.l2, &p.encoder.mu_head, &p.encoder.logvar_head, &p.decoder.l3, &p.decoder.out};
}

std::array<const nn::DenseLayer*, kCvaeLayerCount> cvae_layers(const CvaeParams& p) {
  return {&p.encoder.l1, &p.encoder.l2, &p.encoder.mu_head, &p.encoder.logvar_head, &p.decoder.l3, &p.decoder.out};
}

CvaeGrads zero_grads(const CvaeParams& params) {
  auto layers = cvae_layers(params);
  CvaeGrads g;
  for (std::size_t i = 0; i < kCvaeLayerCount; ++i) g[i] = nn::LayerGrad::zeros_like(*layers[i]);
  return g;
}

void add_scaled(CvaeGrads& into, const CvaeGrads& other, double scale) {
  for (std::size_t i = 0; i < kCvaeLayerCount; ++i) into[i].add_scaled(other[i], scale);
}

namespace {

void check_arch(const CvaeArch& arch) {
  if (arch.feature_dim == 0 || arch.attribute_dim == 0 || arch.encoder_hidden == 0 || arch.decoder_hidden == 0 ||
      arch.latent_dim == 0) {
    throw ConfigError("CVAE architecture dimensions must all be positive");
  }
  if (!(arch.dropout_rate >= 0.0 && arch.dropout_rate < 1.0)) {
    throw ConfigError("CVAE dropout rate must lie in [0, 1)");
  }
}

}  // namespace

CvaeParams init_cvae(const CvaeArch& arch, std::uint64_t seed) {
  check_arch(arch);
  Rng rng(derive_seed(seed, {tag(SeedPurpose::Init)}));
  CvaeParams p;
  p.arch = arch;
  p.encoder.l1 = nn::make_layer(arch.feature_dim + arch.attribute_dim, arch.encoder_hidden, Activation::ReLU, rng);
  p.encoder.l2 = nn::make_layer(arch.encoder_hidden, arch.encoder_hidden, Activation::ReLU, rng);
  p.encoder.mu_head = nn::make_layer(arch.encoder_hidden, arch.latent_dim, Activation::Linear, rng);
  p.encoder.logvar_head = nn::make_layer(arch.encoder_hidden, arch.latent_dim, Activation::Linear, rng);
  p.decoder.l3 = nn::make_layer(arch.latent_dim + arch.attribute_dim, arch.decoder_hidden, Activation::ReLU, rng);
  p.decoder.out = nn::make_layer(arch.decoder_hidden, arch.feature_dim, Activation::Linear, rng);
  p.decoder.latent_dim = arch.latent_dim;
  return p;
}

CvaeParams zero_cvae(const CvaeArch& arch) {
  check_arch(arch);
  CvaeParams p;
  p.arch = arch;
  p.encoder.l1 = nn::zero_layer(arch.feature_dim + arch.attribute_dim, arch.encoder_hidden, Activation::ReLU);
  p.encoder.l2 = nn::zero_layer(arch.encoder_hidden, arch.encoder_hidden, Activation::ReLU);
  p.encoder.mu_head = nn::zero_layer(arch.encoder_hidden, arch.latent_dim, Activation::Linear);
  p.encoder.logvar_head = nn::zero_layer(arch.encoder_hidden, arch.latent_dim, Activation::Linear);
  p.decoder.l3 = nn::zero_layer(arch.latent_dim + arch.attribute_dim, arch.decoder_hidden, Activation::ReLU);
  p.decoder.out = nn::zero_layer(arch.decoder_hidden, arch.feature_dim, Activation::Linear);
  p.decoder.latent_dim = arch.latent_dim;
  return p;
}

namespace {

void check_inputs(const CvaeParams& params, const Matrix& x, const Matrix& a) {
  if (x.cols() != params.arch.feature_dim) {
    throw DimensionError("feature dim " + std::to_string(x.cols()) + " does not match CVAE feature dim " +
                         std::to_string(params.arch.feature_dim));
  }
  if (a.cols() != params.arch.attribute_dim) {
    throw DimensionError("attribute dim " + std::to_string(a.cols()) + " does not match CVAE attribute dim " +
                         std::to_string(params.arch.attribute_dim));
  }
  if (x.rows() != a.rows()) {
    throw DimensionError("feature rows " + std::to_string(x.rows()) + " vs attribute rows " +
                         std::to_string(a.rows()));
  }
}

struct EncoderTrace {
  Matrix input;   // [x, a]
  Matrix h1;      // ReLU(L1)
  Matrix mask;    // dropout keep mask (empty when not training)
  Matrix d1;      // h1 after dropout
  Matrix h2;      // ReLU(L2)
  LatentDistribution dist;
};

EncoderTrace encode_traced(const CvaeParams& params, const Matrix& x, const Matrix& a, std::uint64_t seed,
                           bool training) {
  check_inputs(params, x, a);
  EncoderTrace tr;
  tr.input = hconcat(x, a);
  tr.h1 = nn::affine_forward(params.encoder.l1, tr.input);
  if (training && params.arch.dropout_rate > 0.0) {
    Rng rng(derive_seed(seed, {tag(SeedPurpose::Dropout)}));
    tr.mask = nn::dropout_mask(tr.h1.rows(), tr.h1.cols(), params.arch.dropout_rate, rng);
    tr.d1 = nn::hadamard(tr.h1, tr.mask);
  } else {
    tr.d1 = tr.h1;
  }
  tr.h2 = nn::affine_forward(params.encoder.l2, tr.d1);
  tr.dist.mu = nn::affine_forward(params.encoder.mu_head, tr.h2);
  tr.dist.logvar = nn::affine_forward(params.encoder.logvar_head, tr.h2);
  return tr;
}

}  // namespace

LatentDistribution encode(const CvaeParams& params, const Matrix& x, const Matrix& a, std::uint64_t seed,
                          bool training) {
  return encode_traced(params, x, a, seed, training).dist;
}

Matrix standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Matrix reparameterize(const LatentDistribution& dist, const Matrix& noise) {
  if (dist.mu.rows() != dist.logvar.rows() || dist.mu.cols() != dist.logvar.cols() ||
      noise.rows() != dist.mu.rows() || noise.cols() != dist.mu.cols()) {
    throw DimensionError("reparameterize: mu " + dist.mu.shape_string() + ", logvar " +
                         dist.logvar.shape_string() + ", noise " + noise.shape_string());
  }
  Matrix z(dist.mu.rows(), dist.mu.cols());
  auto zv = z.values();
  auto mu = dist.mu.values();
  auto lv = dist.logvar.values();
  auto eps = noise.values();
  for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = mu[i] + std::exp(0.5 * lv[i]) * eps[i];
  return z;
}

Matrix reparameterize(const LatentDistribution& dist, std::uint64_t seed) {
  return reparameterize(dist, standard_normal(dist.mu.rows(), dist.mu.cols(), seed));
}

Matrix decode(const Decoder& decoder, const Matrix& z, const Matrix& a) {
  if (z.cols() != decoder.latent_dim) {
    throw DimensionError("latent dim " + std::to_string(z.cols()) + " does not match decoder latent dim " +
                         std::to_string(decoder.latent_dim));
  }
  if (a.cols() != decoder.attribute_dim()) {
    throw DimensionError("attribute dim " + std::to_string(a.cols()) + " does not match decoder attribute dim " +
                         std::to_string(decoder.attribute_dim()));
  }
  Matrix h3 = nn::affine_forward(decoder.l3, hconcat(z, a));
  return nn::affine_forward(decoder.out, h3);
}

double kl_divergence(const LatentDistribution& dist) {
  if (dist.mu.rows() != dist.logvar.rows() || dist.mu.cols() != dist.logvar.cols()) {
    throw DimensionError("kl_divergence: mu " + dist.mu.shape_string() + " vs logvar " + dist.logvar.shape_string());
  }
  if (dist.mu.rows() == 0) return 0.0;
  double total = 0.0;
  auto mu = dist.mu.values();
  auto lv = dist.logvar.values();
  for (std::size_t i = 0; i < mu.size(); ++i) total += mu[i] * mu[i] + std::exp(lv[i]) - lv[i] - 1.0;
  return 0.5 * total / static_cast<double>(dist.mu.rows());
}

double reconstruction_loss(const Matrix& x, const Matrix& reconstruction) {
  if (x.rows() != reconstruction.rows() || x.cols() != reconstruction.cols()) {
    throw DimensionError("reconstruction_loss: " + x.shape_string() + " vs " + reconstruction.shape_string());
  }
  if (x.rows() == 0) return 0.0;
  double total = 0.0;
  auto xv = x.values();
  auto rv = reconstruction.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv[i] - rv[i];
    total += d * d;
  }
  return total / static_cast<double>(x.rows());
}

CvaeLoss cvae_loss(const CvaeParams& params, const Matrix& x, const Matrix& a, double kl_weight, std::uint64_t seed) {
  if (x.rows() == 0) throw DataError("cvae_loss: empty batch");
  EncoderTrace enc = encode_traced(params, x, a, seed, /*training=*/true);
  const std::size_t batch = x.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  Matrix noise = standard_normal(batch, params.arch.latent_dim, derive_seed(seed, {tag(SeedPurpose::Noise)}));
  Matrix z = reparameterize(enc.dist, noise);
  Matrix dec_in = hconcat(z, a);
  Matrix h3 = nn::affine_forward(params.decoder.l3, dec_in);
  Matrix recon = nn::affine_forward(params.decoder.out, h3);

  CvaeLoss out;
  out.reconstruction = reconstruction_loss(x, recon);
  out.kl = kl_divergence(enc.dist);
  out.total = out.reconstruction + kl_weight * out.kl;

  // d(recon)/d(x̂) = 2 (x̂ − x) / B
  Matrix d_recon(batch, x.cols());
  {
    auto d = d_recon.values();
    auto rv = recon.values();
    auto xv = x.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * (rv[i] - xv[i]) * inv_batch;
  }
  auto g_out = nn::affine_backward(params.decoder.out, h3, recon, d_recon);
  auto g_l3 = nn::affine_backward(params.decoder.l3, dec_in, h3, g_out.input);

  const std::size_t latent = params.arch.latent_dim;
  Matrix d_mu(batch, latent);
  Matrix d_logvar(batch, latent);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < latent; ++j) {
      const double dz = g_l3.input(r, j);
      const double mu = enc.dist.mu(r, j);
      const double lv = enc.dist.logvar(r, j);
      const double sd = std::exp(0.5 * lv);
      d_mu(r, j) = dz + kl_weight * mu * inv_batch;
      d_logvar(r, j) = dz * noise(r, j) * 0.5 * sd + kl_weight * 0.5 * (std::exp(lv) - 1.0) * inv_batch;
    }
  }
  auto g_mu = nn::affine_backward(params.encoder.mu_head, enc.h2, enc.dist.mu, d_mu);
  auto g_lv = nn::affine_backward(params.encoder.logvar_head, enc.h2, enc.dist.logvar, d_logvar);
  Matrix d_h2 = g_mu.input;
  {
    auto d = d_h2.values();
    auto other = g_lv.input.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += other[i];
  }
  auto g_l2 = nn::affine_backward(params.encoder.l2, enc.d1, enc.h2, d_h2);
  Matrix d_h1 = enc.mask.empty() ? std::move(g_l2.input) : nn::hadamard(g_l2.input, enc.mask);
  auto g_l1 = nn::affine_backward(params.encoder.l1, enc.input, enc.h1, d_h1);

  out.grads = {nn::LayerGrad::from(std::move(g_l1)), nn::LayerGrad::from(std::move(g_l2)),
               nn::LayerGrad::from(std::move(g_mu)), nn::LayerGrad::from(std::move(g_lv)),
               nn::LayerGrad::from(std::move(g_l3)), nn::LayerGrad::from(std::move(g_out))};
  return out;
}

CvaeLoss cvae_loss(const CvaeParams& params, const LabeledBatch& batch, double kl_weight, std::uint64_t seed) {
  return cvae_loss(params, batch.features, batch.attributes, kl_weight, seed);
}

Matrix generate(const Decoder& decoder, std::span<const double> attribute, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DataError("generate: requested zero samples");
  if (attribute.size() != decoder.attribute_dim()) {
    throw DimensionError("generate: attribute dim " + std::to_string(attribute.size()) +
                         " does not match decoder attribute dim " + std::to_string(decoder.attribute_dim()));
  }
  Matrix z = standard_normal(n, decoder.latent_dim, seed);
  Matrix a(n, attribute.size());
  for (std::size_t r = 0; r < n; ++r) std::copy(attribute.begin(), attribute.end(), a.row(r).begin());
  return decode(decoder, z, a);
}

}  // namespace grczsl
