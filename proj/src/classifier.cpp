#include "grczsl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "grczsl/checkpoint.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"

namespace grczsl {

void ClassifierConfig::validate() const {
  if (hidden == 0 || batch_size == 0 || epochs == 0 || samples_per_class == 0) {
    throw ConfigError("classifier hidden width, batch size, epochs and samples per class must be at least 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("classifier learning rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("classifier weight decay must be non-negative");
}

LabeledBatch build_training_set(const Decoder& decoder, std::span<const std::size_t> classes,
                                const Matrix& class_attributes, std::size_t samples_per_class, std::uint64_t seed) {
  if (classes.empty()) throw ConfigError("classifier scope is empty");
  if (samples_per_class == 0) throw ConfigError("classifier samples per class must be at least 1");
  LabeledBatch set;
  const std::size_t total = classes.size() * samples_per_class;
  set.features = Matrix(total, decoder.feature_dim());
  set.attributes = Matrix(total, class_attributes.cols());
  set.labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t cls : classes) {
    if (cls >= class_attributes.rows()) throw DataError("class " + std::to_string(cls) + " has no attribute vector");
    auto attr = class_attributes.row(cls);
    Matrix x = generate(decoder, attr, samples_per_class, derive_seed(seed, {tag(SeedPurpose::ClassifierSet), cls}));
    for (std::size_t r = 0; r < samples_per_class; ++r, ++row) {
      std::copy(x.row(r).begin(), x.row(r).end(), set.features.row(row).begin());
      std::copy(attr.begin(), attr.end(), set.attributes.row(row).begin());
      set.labels.push_back(cls);
    }
  }
  return set;
}

Matrix classifier_logits(const ClassifierParams& params, const Matrix& features) {
  if (features.cols() != params.feature_dim()) {
    throw DimensionError("classifier expects feature dim " + std::to_string(params.feature_dim()) + ", got " +
                         std::to_string(features.cols()));
  }
  return nn::affine_forward(params.output, nn::affine_forward(params.hidden, features));
}

std::vector<std::size_t> argmax_rows(const Matrix& scores) {
  std::vector<std::size_t> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<std::size_t> predict(const ClassifierParams& params, const Matrix& features) {
  auto idx = argmax_rows(classifier_logits(params, features));
  for (std::size_t& i : idx) i = params.class_ids[i];
  return idx;
}

ClassifierLoss classifier_loss(const ClassifierParams& params, const Matrix& features,
                               std::span<const std::size_t> output_labels, double weight_decay) {
  Matrix h = nn::affine_forward(params.hidden, features);
  Matrix logits = nn::affine_forward(params.output, h);
  nn::SoftmaxLoss ce = nn::softmax_cross_entropy(logits, output_labels);
  auto g_out = nn::affine_backward(params.output, h, logits, ce.grad_logits);
  auto g_hidden = nn::affine_backward(params.hidden, features, h, g_out.input);

  ClassifierLoss out;
  out.loss = ce.loss;
  out.hidden = nn::LayerGrad::from(std::move(g_hidden));
  out.output = nn::LayerGrad::from(std::move(g_out));
  if (weight_decay > 0.0) {
    double sq = 0.0;
    for (const nn::DenseLayer* layer : {&params.hidden, &params.output})
      for (double w : layer->weights.values()) sq += w * w;
    out.loss += 0.5 * weight_decay * sq;
    nn::LayerGrad decay_h{params.hidden.weights, std::vector<double>(params.hidden.bias.size(), 0.0)};
    nn::LayerGrad decay_o{params.output.weights, std::vector<double>(params.output.bias.size(), 0.0)};
    out.hidden.add_scaled(decay_h, weight_decay);
    out.output.add_scaled(decay_o, weight_decay);
  }
  return out;
}

ClassifierParams train_classifier(const LabeledBatch& training_set, const ClassifierConfig& config) {
  config.validate();
  std::vector<std::size_t> class_ids(training_set.labels.begin(), training_set.labels.end());
  std::sort(class_ids.begin(), class_ids.end());
  class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());
  if (class_ids.size() < 2) {
    throw ConfigError("classifier needs at least 2 classes, training set has " + std::to_string(class_ids.size()));
  }
  if (training_set.features.rows() != training_set.labels.size()) {
    throw DimensionError("classifier training set has " + std::to_string(training_set.features.rows()) +
                         " rows but " + std::to_string(training_set.labels.size()) + " labels");
  }
  std::unordered_map<std::size_t, std::size_t> position;
  for (std::size_t k = 0; k < class_ids.size(); ++k) position[class_ids[k]] = k;
  std::vector<std::size_t> targets(training_set.labels.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = position.at(training_set.labels[i]);

  Rng init_rng(derive_seed(config.seed, {tag(SeedPurpose::ClassifierInit)}));
  ClassifierParams params;
  params.class_ids = class_ids;
  params.hidden = nn::make_layer(training_set.features.cols(), config.hidden, nn::Activation::ReLU, init_rng);
  params.output = nn::make_layer(config.hidden, class_ids.size(), nn::Activation::Linear, init_rng);

  const nn::DenseLayer* shapes[] = {&params.hidden, &params.output};
  nn::LayerAdam adam(nn::AdamConfig{config.learning_rate}, shapes);
  nn::DenseLayer* layers[] = {&params.hidden, &params.output};
  constexpr std::string_view names[] = {"classifier.hidden", "classifier.output"};

  const std::size_t n = targets.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {tag(SeedPurpose::ClassifierShuffle), epoch}));
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      Matrix x = gather_rows(training_set.features, idx);
      std::vector<std::size_t> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = targets[idx[i]];
      ClassifierLoss loss = classifier_loss(params, x, y, config.weight_decay);
      const nn::LayerGrad grads[] = {std::move(loss.hidden), std::move(loss.output)};
      adam.step(layers, grads, names);
    }
  }
  return params;
}

void save_classifier(const std::filesystem::path& path, const ClassifierParams& params, std::size_t task_id,
                     const std::string& dataset, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.metadata = {{"kind", "classifier"},
                   {"task_id", task_id},
                   {"dataset", dataset},
                   {"seed", seed},
                   {"class_ids", params.class_ids}};
  ckpt.layers.emplace_back("classifier.hidden", params.hidden);
  ckpt.layers.emplace_back("classifier.output", params.output);
  write_checkpoint(path, ckpt);
}

ClassifierParams load_classifier(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.metadata.value("kind", "") != "classifier") throw DataError(path.string() + ": not a classifier checkpoint");
  ClassifierParams p;
  p.hidden = ckpt.layer("classifier.hidden");
  p.output = ckpt.layer("classifier.output");
  p.class_ids = ckpt.metadata.at("class_ids").get<std::vector<std::size_t>>();
  if (p.output.out_dim() != p.class_ids.size() || p.output.in_dim() != p.hidden.out_dim()) {
    throw DataError(path.string() + ": classifier layer shapes are inconsistent");
  }
  return p;
}

}  // namespace grczsl
