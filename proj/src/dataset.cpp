#include "grczsl/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "grczsl/errors.hpp"
#include "grczsl/rng.hpp"
#include "json.hpp"

namespace grczsl {

namespace {

constexpr char kFeatureMagic[8] = {'G', 'R', 'Z', 'F', 'E', 'A', 'T', '1'};

void l2_normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : row) v /= norm;
  }
}

}  // namespace

LabeledBatch DatasetBundle::batch(std::span<const std::size_t> indices, std::size_t task_id) const {
  LabeledBatch b;
  b.task_id = task_id;
  b.features = gather_rows(features, indices);
  b.attributes = Matrix(indices.size(), class_attributes.cols());
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t cls = labels[indices[i]];
    std::copy(class_attributes.row(cls).begin(), class_attributes.row(cls).end(), b.attributes.row(i).begin());
    b.labels.push_back(cls);
  }
  return b;
}

DatasetBundle load_dataset(const std::filesystem::path& directory, const LoadOptions& options) {
  const auto classes_path = directory / kClassesFile;
  const auto features_path = directory / kFeaturesFile;

  DatasetBundle bundle;
  nlohmann::json sidecar;
  {
    std::ifstream is(classes_path);
    if (!is) throw DataError("cannot open " + classes_path.string());
    try {
      is >> sidecar;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(classes_path.string() + ": " + e.what());
    }
  }
  std::size_t feature_dim = 0, attribute_dim = 0;
  try {
    bundle.meta.name = sidecar.at("name").get<std::string>();
    feature_dim = sidecar.at("feature_dim").get<std::size_t>();
    attribute_dim = sidecar.at("attribute_dim").get<std::size_t>();
    const auto& classes = sidecar.at("classes");
    if (!classes.is_array() || classes.empty()) throw DataError(classes_path.string() + ": no classes listed");
    bundle.class_attributes = Matrix(classes.size(), attribute_dim);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto& jc = classes[c];
      bundle.class_names.push_back(jc.value("name", "class_" + std::to_string(c)));
      const std::string split = jc.at("split").get<std::string>();
      if (split == "seen") {
        bundle.meta.seen_classes.push_back(c);
      } else if (split == "unseen") {
        bundle.meta.unseen_classes.push_back(c);
      } else {
        throw DataError(classes_path.string() + ": class " + std::to_string(c) + " has split '" + split +
                        "' (expected seen or unseen)");
      }
      const auto attrs = jc.at("attributes").get<std::vector<double>>();
      if (attrs.size() != attribute_dim) {
        throw DataError(classes_path.string() + ": class " + std::to_string(c) + " has " +
                        std::to_string(attrs.size()) + " attributes, header says " + std::to_string(attribute_dim));
      }
      for (std::size_t k = 0; k < attribute_dim; ++k) {
        if (!std::isfinite(attrs[k])) {
          throw DataError(classes_path.string() + ": non-finite attribute in class " + std::to_string(c));
        }
        bundle.class_attributes(c, k) = attrs[k];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(classes_path.string() + ": " + e.what());
  }
  const std::size_t num_classes = bundle.class_attributes.rows();

  std::ifstream fs(features_path, std::ios::binary);
  if (!fs) throw DataError("cannot open " + features_path.string());
  detail::Reader in(fs, features_path.string());
  char magic[8];
  in.read_raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kFeatureMagic, sizeof magic) != 0) {
    throw DataError(features_path.string() + ": not a feature container");
  }
  const std::uint64_t rows = in.u64("row count");
  const std::uint64_t cols = in.u64("column count");
  if (cols != feature_dim) {
    throw DataError(features_path.string() + ": feature dim " + std::to_string(cols) + " does not match " +
                    classes_path.filename().string() + " (" + std::to_string(feature_dim) + ")");
  }
  if (rows == 0 || rows > (std::uint64_t{1} << 32) || cols > (std::uint64_t{1} << 20)) {
    throw DataError(features_path.string() + ": implausible shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  bundle.features = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = in.f64("features");
      if (!std::isfinite(v)) {
        throw DataError(features_path.string() + ": non-finite feature at row " + std::to_string(r) + ", column " +
                        std::to_string(c));
      }
      bundle.features(r, c) = v;
    }
  }
  bundle.labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint32_t label = in.u32("labels");
    if (label >= num_classes) {
      throw DataError(features_path.string() + ": label " + std::to_string(label) + " at row " + std::to_string(r) +
                      " exceeds class count " + std::to_string(num_classes));
    }
    bundle.labels[r] = label;
  }
  char extra;
  if (fs.read(&extra, 1); fs.gcount() != 0) {
    throw DataError(features_path.string() + ": trailing bytes after labels at offset " +
                    std::to_string(in.offset() - 1));
  }

  bundle.meta.feature_dim = feature_dim;
  bundle.meta.attribute_dim = attribute_dim;
  bundle.meta.total_classes = num_classes;
  bundle.meta.class_samples.assign(num_classes, {});
  for (std::size_t r = 0; r < rows; ++r) bundle.meta.class_samples[bundle.labels[r]].push_back(r);
  validate_meta(bundle.meta);

  if (options.normalize_attributes) l2_normalize_rows(bundle.class_attributes);
  if (options.normalize_features) l2_normalize_rows(bundle.features);
  return bundle;
}

void write_dataset(const std::filesystem::path& directory, const DatasetBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create dataset directory " + directory.string() + ": " + ec.message());

  nlohmann::json classes = nlohmann::json::array();
  std::vector<std::string> split(bundle.class_attributes.rows(), "seen");
  for (std::size_t c : bundle.meta.unseen_classes) split.at(c) = "unseen";
  for (std::size_t c = 0; c < bundle.class_attributes.rows(); ++c) {
    auto row = bundle.class_attributes.row(c);
    classes.push_back({{"name", c < bundle.class_names.size() ? bundle.class_names[c] : "class_" + std::to_string(c)},
                       {"split", split[c]},
                       {"attributes", std::vector<double>(row.begin(), row.end())}});
  }
  nlohmann::json sidecar = {{"name", bundle.meta.name},
                            {"feature_dim", bundle.features.cols()},
                            {"attribute_dim", bundle.class_attributes.cols()},
                            {"classes", classes}};
  {
    std::ofstream os(directory / kClassesFile, std::ios::trunc);
    if (!os) throw IoError("cannot write " + (directory / kClassesFile).string());
    os << sidecar.dump(1) << '\n';
  }
  std::ofstream os(directory / kFeaturesFile, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + (directory / kFeaturesFile).string());
  os.write(kFeatureMagic, sizeof kFeatureMagic);
  detail::write_u64(os, bundle.features.rows());
  detail::write_u64(os, bundle.features.cols());
  for (double v : bundle.features.values()) detail::write_f64(os, v);
  for (std::size_t label : bundle.labels) detail::write_u32(os, static_cast<std::uint32_t>(label));
  if (!os) throw IoError("failed writing " + (directory / kFeaturesFile).string());
}

DatasetBundle make_synthetic(const SyntheticSpec& spec) {
  const std::size_t num_classes = spec.seen_classes + spec.unseen_classes;
  if (num_classes < 2 || spec.feature_dim == 0 || spec.attribute_dim == 0 || spec.samples_per_class < 2) {
    throw ConfigError("synthetic dataset needs ≥ 2 classes, ≥ 2 samples per class and positive dims");
  }
  Rng rng(derive_seed(spec.seed, {0x5e7}));
  Matrix projection(spec.feature_dim, spec.attribute_dim);
  for (double& v : projection.values()) v = rng.normal() / std::sqrt(static_cast<double>(spec.attribute_dim));

  DatasetBundle b;
  b.meta.name = spec.name;
  b.class_attributes = Matrix(num_classes, spec.attribute_dim);
  for (double& v : b.class_attributes.values()) v = rng.normal();
  Matrix centroids = matmul_transposed(b.class_attributes, projection);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (double& v : centroids.row(c)) v *= spec.attribute_weight;
    for (double& v : centroids.row(c)) v += spec.private_weight * rng.normal();
    b.class_names.push_back("class_" + std::to_string(c));
  }

  b.features = Matrix(num_classes * spec.samples_per_class, spec.feature_dim);
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (std::size_t k = 0; k < spec.feature_dim; ++k) b.features(row, k) = centroids(c, k) + spec.noise * rng.normal();
      b.labels.push_back(c);
    }
  }
  b.meta.feature_dim = spec.feature_dim;
  b.meta.attribute_dim = spec.attribute_dim;
  b.meta.total_classes = num_classes;
  for (std::size_t c = 0; c < spec.seen_classes; ++c) b.meta.seen_classes.push_back(c);
  for (std::size_t c = spec.seen_classes; c < num_classes; ++c) b.meta.unseen_classes.push_back(c);
  b.meta.class_samples.assign(num_classes, {});
  for (std::size_t r = 0; r < b.labels.size(); ++r) b.meta.class_samples[b.labels[r]].push_back(r);
  return b;
}

}  // namespace grczsl
