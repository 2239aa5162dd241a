#include "grczsl/residency.hpp"

#include <algorithm>
#include <mutex>

namespace grczsl::residency {

namespace {

std::mutex g_mutex;
Snapshot g_state;

void update_peaks() {
  g_state.peak_full = std::max(g_state.peak_full, g_state.live_full);
  g_state.peak_frozen = std::max(g_state.peak_frozen, g_state.live_frozen);
  g_state.peak_total = std::max(g_state.peak_total, g_state.live_full + g_state.live_frozen);
}

}  // namespace

Snapshot snapshot() {
  std::lock_guard lock(g_mutex);
  return g_state;
}

void reset_peaks() {
  std::lock_guard lock(g_mutex);
  g_state.peak_full = g_state.live_full;
  g_state.peak_frozen = g_state.live_frozen;
  g_state.peak_total = g_state.live_full + g_state.live_frozen;
}

void acquire(Kind kind) {
  std::lock_guard lock(g_mutex);
  if (kind == Kind::FullCvae)
    ++g_state.live_full;
  else
    ++g_state.live_frozen;
  update_peaks();
}

void release(Kind kind) {
  std::lock_guard lock(g_mutex);
  if (kind == Kind::FullCvae)
    --g_state.live_full;
  else
    --g_state.live_frozen;
}

}  // namespace grczsl::residency
