#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grczsl/cvae.hpp"
#include "grczsl/matrix.hpp"
#include "grczsl/taskstream.hpp"

namespace grczsl {

// A dataset directory holds two files:
//
//   features.bin   "GRZFEAT1" | u64 rows | u64 cols | rows*cols f64 (row-major)
//                  | rows u32 class labels          (all little-endian)
//   classes.json   {"name": ..., "feature_dim": D, "attribute_dim": A,
//                   "classes": [{"name": ..., "split": "seen"|"unseen",
//                                "attributes": [A reals]}, ...]}
//
// Class ids are positions in the "classes" array.
struct DatasetBundle {
  Matrix features;                  // N × feature_dim
  std::vector<std::size_t> labels;  // N
  Matrix class_attributes;          // num_classes × attribute_dim
  std::vector<std::string> class_names;
  DatasetMeta meta;

  // Rows `indices` as a batch whose attribute rows come from each label.
  LabeledBatch batch(std::span<const std::size_t> indices, std::size_t task_id = 0) const;
};

struct LoadOptions {
  bool normalize_attributes = false;  // L2-normalize each class attribute row
  bool normalize_features = false;    // L2-normalize each feature row
};

inline constexpr const char* kFeaturesFile = "features.bin";
inline constexpr const char* kClassesFile = "classes.json";

// Validates dims, finiteness and label range; throws DataError with file
// and offset context and never returns a partially filled bundle.
DatasetBundle load_dataset(const std::filesystem::path& directory, const LoadOptions& options = {});
void write_dataset(const std::filesystem::path& directory, const DatasetBundle& bundle);

// Gaussian-cluster benchmark stand-in. Each class has a random attribute
// vector and a feature centroid mixing a shared linear map of the attribute
// (the zero-shot signal) with a class-private offset (what must be
// remembered); samples scatter isotropically around the centroid.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t seen_classes = 8;
  std::size_t unseen_classes = 0;
  std::size_t feature_dim = 8;
  std::size_t attribute_dim = 3;
  std::size_t samples_per_class = 40;
  double attribute_weight = 1.0;  // scale of the attribute-driven centroid part
  double private_weight = 1.0;    // scale of the class-private centroid part
  double noise = 0.3;             // per-coordinate sample standard deviation
  std::uint64_t seed = 1;
};

// Seen classes take ids [0, seen) and unseen ids [seen, seen + unseen).
DatasetBundle make_synthetic(const SyntheticSpec& spec);

}  // namespace grczsl
