#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "grczsl/cvae.hpp"
#include "grczsl/matrix.hpp"
#include "grczsl/nn.hpp"

namespace grczsl {

struct ClassifierConfig {
  std::size_t hidden = 1024;
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  // Synthetic samples generated per in-scope class (seen and unseen alike).
  std::size_t samples_per_class = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// Single hidden ReLU layer followed by a linear layer over the classes in
// scope; output unit k stands for global class class_ids[k].
struct ClassifierParams {
  nn::DenseLayer hidden;
  nn::DenseLayer output;
  std::vector<std::size_t> class_ids;

  std::size_t num_classes() const noexcept { return class_ids.size(); }
  std::size_t feature_dim() const noexcept { return hidden.in_dim(); }
};

// samples_per_class decoder samples for every class in `classes`, labeled
// with the global class id, in class order.
LabeledBatch build_training_set(const Decoder& decoder, std::span<const std::size_t> classes,
                                const Matrix& class_attributes, std::size_t samples_per_class, std::uint64_t seed);

// Softmax cross-entropy with an L2 penalty ½·weight_decay·‖W‖² on both weight
// matrices (biases are not decayed), Adam, from a fresh initialization.
ClassifierParams train_classifier(const LabeledBatch& training_set, const ClassifierConfig& config);

Matrix classifier_logits(const ClassifierParams& params, const Matrix& features);
// Global class ids; ties resolve to the lowest output index.
std::vector<std::size_t> predict(const ClassifierParams& params, const Matrix& features);
// Argmax over each row with lowest-index tie-break.
std::vector<std::size_t> argmax_rows(const Matrix& scores);

// Regularized mean loss and gradients; exposed for gradient checking.
struct ClassifierLoss {
  double loss = 0.0;
  nn::LayerGrad hidden;
  nn::LayerGrad output;
};
ClassifierLoss classifier_loss(const ClassifierParams& params, const Matrix& features,
                               std::span<const std::size_t> output_labels, double weight_decay);

void save_classifier(const std::filesystem::path& path, const ClassifierParams& params, std::size_t task_id,
                     const std::string& dataset, std::uint64_t seed);
ClassifierParams load_classifier(const std::filesystem::path& path);

}  // namespace grczsl
