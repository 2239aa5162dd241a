#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "grczsl/cvae.hpp"
#include "grczsl/nn.hpp"

namespace grczsl {

// Binary layer container:
//   "GRZCKPT1" | u32 version | metadata (u32 length + JSON) | u32 layer count |
//   per layer: name (u32 length + bytes), u8 activation, u64 rows, u64 cols,
//   rows*cols f64 weights (row-major), rows f64 bias.
// All integers and doubles are little-endian.
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, nn::DenseLayer>> layers;

  const nn::DenseLayer& layer(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Reads only the layers whose names start with `prefix` (all when empty);
// other layer payloads are skipped without being materialized.
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& prefix = "");

struct CheckpointMeta {
  std::size_t task_id = 0;
  std::string dataset;
  std::uint64_t seed = 0;
};

void save_cvae(const std::filesystem::path& path, const CvaeParams& params, const CheckpointMeta& meta);
CvaeParams load_cvae(const std::filesystem::path& path);
// Loads the decoder sections only; the encoder payload is never read into memory.
FrozenDecoder load_decoder(const std::filesystem::path& path);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace grczsl
