#include "grczsl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grczsl/checkpoint.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"

namespace grczsl {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  if (epochs == 0 || batch_size == 0 || replay_batch_size == 0 || samples_per_seen_class == 0) {
    throw ConfigError("epochs, batch sizes and samples per seen class must all be at least 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) throw ConfigError("kl weight must be non-negative");
}

double combined_task_loss(double real_loss, double replay_loss, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  return alpha * real_loss + (1.0 - alpha) * replay_loss;
}

ReplaySet synthesize_replay(const Decoder& previous, const ReplayPlan& plan, const Matrix& class_attributes,
                            std::size_t samples_per_class, std::uint64_t seed) {
  if (plan.classes.empty()) {
    throw SequencingError("replay requested with no previously seen classes (only valid from task 2 onward)");
  }
  if (plan.source_tasks.size() != plan.classes.size()) {
    throw DimensionError("replay plan: " + std::to_string(plan.classes.size()) + " classes but " +
                         std::to_string(plan.source_tasks.size()) + " source tasks");
  }
  if (samples_per_class == 0) throw ConfigError("replay samples per class must be at least 1");
  ReplaySet set;
  const std::size_t total = plan.classes.size() * samples_per_class;
  set.features = Matrix(total, previous.feature_dim());
  set.attributes = Matrix(total, class_attributes.cols());
  set.labels.reserve(total);
  set.source_tasks.reserve(total);
  std::size_t row = 0;
  for (std::size_t i = 0; i < plan.classes.size(); ++i) {
    const std::size_t cls = plan.classes[i];
    if (cls >= class_attributes.rows()) {
      throw DataError("replay: class " + std::to_string(cls) + " has no attribute vector");
    }
    auto attr = class_attributes.row(cls);
    Matrix x = generate(previous, attr, samples_per_class, derive_seed(seed, {tag(SeedPurpose::Replay), cls}));
    for (std::size_t r = 0; r < samples_per_class; ++r, ++row) {
      std::copy(x.row(r).begin(), x.row(r).end(), set.features.row(row).begin());
      std::copy(attr.begin(), attr.end(), set.attributes.row(row).begin());
      set.labels.push_back(cls);
      set.source_tasks.push_back(plan.source_tasks[i]);
    }
  }
  return set;
}

ReplaySet synthesize_replay(const std::filesystem::path& previous_checkpoint, const ReplayPlan& plan,
                            const Matrix& class_attributes, std::size_t samples_per_class, std::uint64_t seed) {
  FrozenDecoder frozen = [&] {
    try {
      return load_decoder(previous_checkpoint);
    } catch (const DataError& e) {
      throw DataError(std::string("replay: ") + e.what());
    }
  }();
  return synthesize_replay(frozen.decoder, plan, class_attributes, samples_per_class, seed);
}

namespace {

std::vector<std::size_t> shuffled_range(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

}  // namespace

TaskTrainResult train_task(std::size_t t, const LabeledBatch& data, std::optional<CvaeParams> previous,
                           const ReplaySet* replay, const CvaeArch& arch, const TrainConfig& config) {
  config.validate();
  if (t == 0) throw SequencingError("task indices start at 1");
  if (t == 1 && previous) throw SequencingError("task 1 must start from fresh weights, but a previous model was given");
  if (t >= 2 && !previous) {
    throw SequencingError("task " + std::to_string(t) + " needs the task " + std::to_string(t - 1) + " model");
  }
  const bool use_replay = t >= 2 && !config.exclude_replay;
  if (use_replay && (replay == nullptr || replay->size() == 0)) {
    throw DataError("replay: task " + std::to_string(t) + " has no replay set");
  }
  if (data.size() == 0) throw DataError("task " + std::to_string(t) + " has no training samples");

  TaskTrainResult result{previous ? std::move(*previous) : init_cvae(arch, derive_seed(config.seed, {tag(SeedPurpose::Init)})),
                         {},
                         0};
  CvaeParams& params = result.params;
  if (data.features.cols() != params.arch.feature_dim || data.attributes.cols() != params.arch.attribute_dim) {
    throw DimensionError("task " + std::to_string(t) + " data " + data.features.shape_string() + "/" +
                         data.attributes.shape_string() + " does not match the CVAE dimensions");
  }

  auto const_layers = cvae_layers(std::as_const(params));
  nn::LayerAdam adam(nn::AdamConfig{config.learning_rate}, const_layers);
  auto layers = cvae_layers(params);

  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_range(n, derive_seed(config.seed, {tag(SeedPurpose::Shuffle), t, epoch}));
    std::vector<std::size_t> replay_order;
    if (use_replay) {
      replay_order = shuffled_range(replay->size(), derive_seed(config.seed, {tag(SeedPurpose::ReplayShuffle), t, epoch}));
    }
    double real_sum = 0.0, replay_sum = 0.0;
    std::size_t replay_cursor = 0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Matrix x = gather_rows(data.features, idx);
      const Matrix a = gather_rows(data.attributes, idx);
      CvaeLoss real = cvae_loss(params, x, a, config.kl_weight, derive_seed(config.seed, {t, epoch, step, 0}));
      real_sum += real.total;

      CvaeGrads grads;
      if (!use_replay) {
        grads = std::move(real.grads);
      } else {
        std::vector<std::size_t> ridx(config.replay_batch_size);
        for (std::size_t& r : ridx) {
          r = replay_order[replay_cursor];
          replay_cursor = (replay_cursor + 1) % replay_order.size();
        }
        const Matrix rx = gather_rows(replay->features, ridx);
        const Matrix ra = gather_rows(replay->attributes, ridx);
        CvaeLoss rep = cvae_loss(params, rx, ra, config.kl_weight, derive_seed(config.seed, {t, epoch, step, 1}));
        replay_sum += rep.total;
        grads = zero_grads(params);
        add_scaled(grads, real.grads, config.alpha);
        add_scaled(grads, rep.grads, 1.0 - config.alpha);
      }
      adam.step(layers, grads, kCvaeLayerNames);
      ++result.steps;
    }
    LossRecord rec;
    rec.task = t;
    rec.epoch = epoch;
    rec.real_loss = real_sum / static_cast<double>(steps_per_epoch);
    rec.replay_loss = use_replay ? replay_sum / static_cast<double>(steps_per_epoch) : 0.0;
    rec.combined = use_replay ? combined_task_loss(rec.real_loss, rec.replay_loss, config.alpha) : rec.real_loss;
    if (!std::isfinite(rec.combined)) {
      throw NumericError("task " + std::to_string(t) + " epoch " + std::to_string(epoch) + ": loss is not finite");
    }
    result.losses.push_back(rec);
  }
  return result;
}

TaskTrainResult train_task(std::size_t t, const LabeledBatch& data,
                           const std::optional<std::filesystem::path>& previous_checkpoint, const ReplayPlan& plan,
                           const Matrix& class_attributes, const CvaeArch& arch, const TrainConfig& config) {
  config.validate();
  if (t >= 2 && !previous_checkpoint) {
    throw SequencingError("task " + std::to_string(t) + " needs the task " + std::to_string(t - 1) + " checkpoint");
  }
  if (t == 1) {
    if (previous_checkpoint) throw SequencingError("task 1 must not be given a previous checkpoint");
    return train_task(1, data, std::nullopt, nullptr, arch, config);
  }
  if (!std::filesystem::exists(*previous_checkpoint)) {
    throw DataError("replay: previous checkpoint not found: " + previous_checkpoint->string());
  }
  std::optional<ReplaySet> replay;
  if (!config.exclude_replay) {
    replay = synthesize_replay(*previous_checkpoint, plan, class_attributes, config.samples_per_seen_class,
                               derive_seed(config.seed, {tag(SeedPurpose::Replay), t}));
  }
  return train_task(t, data, load_cvae(*previous_checkpoint), replay ? &*replay : nullptr, arch, config);
}

}  // namespace grczsl
