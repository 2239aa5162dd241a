#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "grczsl/nn.hpp"
#include "grczsl/rng.hpp"
#include "grczsl/taskstream.hpp"

namespace testsupport {

// Relative error with an absolute floor, so entries whose true gradient is
// ~0 are judged on absolute error instead of blowing up the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Central differences over every weight and bias of `layers`, compared
// against `grads` (same order). `loss` re-evaluates the scalar objective.
inline GradReport check_gradients(std::span<grczsl::nn::DenseLayer* const> layers,
                                  std::span<const grczsl::nn::LayerGrad> grads, const std::function<double()>& loss,
                                  double h = 1e-4) {
  GradReport report;
  auto probe = [&](double& param, double analytic, const std::string& where) {
    const double saved = param;
    param = saved + h;
    const double up = loss();
    param = saved - h;
    const double down = loss();
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = relative_error(analytic, numeric);
    ++report.checked;
    if (rel > report.max_rel) {
      report.max_rel = rel;
      report.worst = where + " analytic=" + std::to_string(analytic) + " numeric=" + std::to_string(numeric);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l]->weights.values();
    auto gw = grads[l].weights.values();
    for (std::size_t i = 0; i < w.size(); ++i) probe(w[i], gw[i], "layer " + std::to_string(l) + " w" + std::to_string(i));
    for (std::size_t i = 0; i < layers[l]->bias.size(); ++i) {
      probe(layers[l]->bias[i], grads[l].bias[i], "layer " + std::to_string(l) + " b" + std::to_string(i));
    }
  }
  return report;
}

inline grczsl::Matrix random_matrix(std::size_t rows, std::size_t cols, grczsl::Rng& rng, double scale = 1.0) {
  grczsl::Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Class inventory with `per_class` rows per class, rows laid out class by class.
inline grczsl::DatasetMeta make_meta(const std::string& name, std::size_t seen, std::size_t unseen,
                                     std::size_t per_class, std::size_t attribute_dim = 3) {
  grczsl::DatasetMeta meta;
  meta.name = name;
  meta.attribute_dim = attribute_dim;
  meta.feature_dim = 4;
  meta.total_classes = seen + unseen;
  for (std::size_t c = 0; c < seen; ++c) meta.seen_classes.push_back(c);
  for (std::size_t c = seen; c < seen + unseen; ++c) meta.unseen_classes.push_back(c);
  meta.class_samples.resize(meta.total_classes);
  std::size_t row = 0;
  for (auto& samples : meta.class_samples)
    for (std::size_t i = 0; i < per_class; ++i) samples.push_back(row++);
  return meta;
}

class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
