#pragma once

#include <cmath>
#include <cstdint>

namespace subattn {

// SplitMix64: portable, fully specified 64-bit generator. Used everywhere
// reproducibility across platforms matters (corpus generation, parameter
// init), instead of implementation-defined std distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi] (inclusive), hi >= lo.
  int64_t next_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  // Gaussian via Box-Muller on SplitMix64 uniforms (portable).
  double next_gaussian();

  // Derived stream for a sub-task, decorrelated from the parent.
  SplitMix64 fork(uint64_t stream_id) {
    SplitMix64 mixer(state_ ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    return SplitMix64(mixer.next_u64());
  }

 private:
  uint64_t state_;
};

inline double SplitMix64::next_gaussian() {
  double u1 = next_double();
  double u2 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace subattn
