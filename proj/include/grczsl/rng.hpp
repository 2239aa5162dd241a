#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace grczsl {

// Counter-based seed derivation: the stream for (root, k0, k1, ...) depends
// only on those keys, so adding a task never shifts the randomness of
// earlier tasks.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys);

// Purpose tags mixed into derive_seed so independent consumers never share a stream.
enum class SeedPurpose : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Dropout = 3,
  Noise = 4,
  Replay = 5,
  ClassifierSet = 6,
  ClassifierInit = 7,
  ClassifierShuffle = 8,
  Partition = 9,
  ClassOrder = 10,
  Generate = 11,
  ReplayShuffle = 12,
};

inline std::uint64_t tag(SeedPurpose p) { return static_cast<std::uint64_t>(p); }

// Seeded generator with platform-independent uniform and normal draws
// (the std distributions are implementation-defined; the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace grczsl
