#include "grczsl/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "grczsl/errors.hpp"

namespace grczsl {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'Z', 'C', 'K', 'P', 'T', '1'};

nlohmann::json arch_to_json(const CvaeArch& a) {
  return {{"feature_dim", a.feature_dim},       {"attribute_dim", a.attribute_dim},
          {"encoder_hidden", a.encoder_hidden}, {"decoder_hidden", a.decoder_hidden},
          {"latent_dim", a.latent_dim},         {"dropout_rate", a.dropout_rate}};
}

CvaeArch arch_from_json(const nlohmann::json& j) {
  CvaeArch a;
  a.feature_dim = j.at("feature_dim").get<std::size_t>();
  a.attribute_dim = j.at("attribute_dim").get<std::size_t>();
  a.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  a.latent_dim = j.at("latent_dim").get<std::size_t>();
  a.dropout_rate = j.at("dropout_rate").get<double>();
  return a;
}

void expect_shape(const nn::DenseLayer& layer, const std::string& name, std::size_t in, std::size_t out,
                  const std::filesystem::path& path) {
  if (layer.in_dim() != in || layer.out_dim() != out) {
    throw DataError(path.string() + ": layer '" + name + "' has shape " + layer.weights.shape_string() +
                    ", expected (" + std::to_string(out) + "x" + std::to_string(in) + ")");
  }
}

}  // namespace

const nn::DenseLayer& Checkpoint::layer(const std::string& name) const {
  for (const auto& [n, l] : layers)
    if (n == name) return l;
  throw DataError("checkpoint has no layer '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_bytes(os, ckpt.metadata.dump());
  detail::write_u32(os, static_cast<std::uint32_t>(ckpt.layers.size()));
  for (const auto& [name, layer] : ckpt.layers) {
    detail::write_bytes(os, name);
    os.put(static_cast<char>(layer.activation));
    detail::write_u64(os, layer.weights.rows());
    detail::write_u64(os, layer.weights.cols());
    for (double w : layer.weights.values()) detail::write_f64(os, w);
    for (double b : layer.bias) detail::write_f64(os, b);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& prefix) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  detail::Reader in(is, path.string());
  char magic[8];
  in.read_raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError(path.string() + ": not a checkpoint file");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(in.bytes("metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint metadata: " + e.what());
  }
  const std::uint32_t count = in.u32("layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.bytes("layer name", 4096);
    const std::uint8_t act = in.u8("activation");
    if (act > 1) throw DataError(path.string() + ": unknown activation tag in layer '" + name + "'");
    const std::uint64_t rows = in.u64("rows");
    const std::uint64_t cols = in.u64("cols");
    if (rows > (1u << 24) || cols > (1u << 24)) {
      throw DataError(path.string() + ": implausible shape for layer '" + name + "'");
    }
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) {
      in.skip((rows * cols + rows) * 8, "layer payload");
      continue;
    }
    nn::DenseLayer layer;
    layer.activation = static_cast<nn::Activation>(act);
    layer.weights = Matrix(rows, cols);
    for (double& w : layer.weights.values()) w = in.f64("weights");
    layer.bias.resize(rows);
    for (double& b : layer.bias) b = in.f64("bias");
    if (!layer.weights.all_finite()) throw DataError(path.string() + ": non-finite weights in layer '" + name + "'");
    ckpt.layers.emplace_back(std::move(name), std::move(layer));
  }
  return ckpt;
}

void save_cvae(const std::filesystem::path& path, const CvaeParams& params, const CheckpointMeta& meta) {
  Checkpoint ckpt;
  ckpt.metadata = {{"kind", "cvae"},
                   {"task_id", meta.task_id},
                   {"dataset", meta.dataset},
                   {"seed", meta.seed},
                   {"arch", arch_to_json(params.arch)}};
  auto layers = cvae_layers(params);
  for (std::size_t i = 0; i < kCvaeLayerCount; ++i) ckpt.layers.emplace_back(std::string(kCvaeLayerNames[i]), *layers[i]);
  write_checkpoint(path, ckpt);
}

namespace {

CvaeArch checked_arch(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.metadata.value("kind", "") != "cvae") throw DataError(path.string() + ": not a CVAE checkpoint");
  try {
    return arch_from_json(ckpt.metadata.at("arch"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed architecture metadata: " + e.what());
  }
}

Decoder decoder_from(const Checkpoint& ckpt, const CvaeArch& arch, const std::filesystem::path& path) {
  Decoder d;
  d.l3 = ckpt.layer("decoder.l3");
  d.out = ckpt.layer("decoder.out");
  d.latent_dim = arch.latent_dim;
  expect_shape(d.l3, "decoder.l3", arch.latent_dim + arch.attribute_dim, arch.decoder_hidden, path);
  expect_shape(d.out, "decoder.out", arch.decoder_hidden, arch.feature_dim, path);
  return d;
}

}  // namespace

CvaeParams load_cvae(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  CvaeParams p;
  p.arch = checked_arch(ckpt, path);
  const CvaeArch& a = p.arch;
  p.encoder.l1 = ckpt.layer("encoder.l1");
  p.encoder.l2 = ckpt.layer("encoder.l2");
  p.encoder.mu_head = ckpt.layer("encoder.mu");
  p.encoder.logvar_head = ckpt.layer("encoder.logvar");
  expect_shape(p.encoder.l1, "encoder.l1", a.feature_dim + a.attribute_dim, a.encoder_hidden, path);
  expect_shape(p.encoder.l2, "encoder.l2", a.encoder_hidden, a.encoder_hidden, path);
  expect_shape(p.encoder.mu_head, "encoder.mu", a.encoder_hidden, a.latent_dim, path);
  expect_shape(p.encoder.logvar_head, "encoder.logvar", a.encoder_hidden, a.latent_dim, path);
  p.decoder = decoder_from(ckpt, a, path);
  return p;
}

FrozenDecoder load_decoder(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("decoder checkpoint not found: " + path.string());
  Checkpoint ckpt = read_checkpoint(path, "decoder.");
  const CvaeArch arch = checked_arch(ckpt, path);
  return FrozenDecoder{decoder_from(ckpt, arch, path), {}};
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  // The "\x01" prefix matches no layer name, so only the header is decoded.
  Checkpoint ckpt = read_checkpoint(path, "\x01");
  CheckpointMeta m;
  m.task_id = ckpt.metadata.value("task_id", std::size_t{0});
  m.dataset = ckpt.metadata.value("dataset", std::string{});
  m.seed = ckpt.metadata.value("seed", std::uint64_t{0});
  return m;
}

}  // namespace grczsl
