// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace lookaround {

inline constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Purposes keep streams derived from one seed disjoint.
enum class StreamPurpose : uint64_t {
  kWorldGen = 1,
  kPretrain = 2,
  kPolicy = 3,
  kEval = 4,
  kInit = 5,
  kClassifier = 6,
  kTransfer = 7,
  kDump = 8,
  kTest = 9,
};

/// Counter-based random stream keyed by (seed, purpose, index).
///
/// Every draw is a pure function of the key and the number of prior draws,
/// so episode i of update u sees the same numbers regardless of how work is
/// scheduled.
class RngStream {
 public:
  explicit RngStream(uint64_t seed, StreamPurpose purpose = StreamPurpose::kTest,
                     uint64_t index = 0, uint64_t sub_index = 0)
      : key_(splitmix64(splitmix64(splitmix64(seed) ^
                                   static_cast<uint64_t>(purpose)) ^
                        index) ^
             splitmix64(sub_index + 0x632BE59BD9B4E019ULL)) {}

  uint64_t next_u64() { return splitmix64(key_ + 0xD1B54A32D192ED03ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    const auto r = static_cast<unsigned __int128>(next_u64()) * static_cast<uint64_t>(n);
    return static_cast<int>(r >> 64);
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  uint64_t draws() const { return counter_; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace lookaround
