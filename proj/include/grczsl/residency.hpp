#pragma once

#include <cstddef>

namespace grczsl::residency {

// Live-instance accounting for the two network kinds the replay engine may
// hold: full CVAEs (encoder + decoder) and frozen standalone decoders.
enum class Kind { FullCvae = 0, FrozenDecoder = 1 };

struct Snapshot {
  std::size_t live_full = 0;
  std::size_t live_frozen = 0;
  std::size_t peak_full = 0;
  std::size_t peak_frozen = 0;
  // Largest live_full + live_frozen seen since the last reset.
  std::size_t peak_total = 0;
};

Snapshot snapshot();
// Collapses peaks to the current live counts.
void reset_peaks();

void acquire(Kind kind);
void release(Kind kind);

// Member token: each owning object counts once while alive, copies included.
// Moving transfers the count, so a moved-from network is not resident.
template <Kind K>
class Token {
 public:
  Token() { acquire(K); }
  Token(const Token&) { acquire(K); }
  Token(Token&& other) noexcept : active_(other.active_) { other.active_ = false; }
  Token& operator=(const Token&) {
    if (!active_) {
      acquire(K);
      active_ = true;
    }
    return *this;
  }
  Token& operator=(Token&& other) noexcept {
    if (this != &other && other.active_) {
      if (active_) release(K);
      active_ = true;
      other.active_ = false;
    }
    return *this;
  }
  ~Token() {
    if (active_) release(K);
  }

  friend bool operator==(const Token&, const Token&) { return true; }

 private:
  bool active_ = true;
};

}  // namespace grczsl::residency
