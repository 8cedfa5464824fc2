#pragma once

#include <cstdint>
#include <random>

#include "hdfa/distributions.hpp"

namespace hdfa {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic stream id for replication `rep` of grid cell `cell`.
inline std::uint64_t stream_for(std::uint64_t cell, std::uint64_t rep) {
  return splitmix64((cell + 1) * 0x9e3779b97f4a7c15ULL ^ splitmix64(rep));
}

/// One reproducible random stream, keyed by (seed, stream).
///
/// The engine is std::mt19937_64 (its output sequence is pinned by the
/// standard) seeded through std::seed_seq, and normal deviates use the
/// inverse-CDF transform rather than std::normal_distribution, whose output
/// is implementation-defined.  Identical (seed, stream) therefore gives
/// byte-identical draws on any platform, independent of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0,1), strictly excluding both endpoints.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  /// Standard normal via inverse CDF.
  double normal() { return std_normal_quantile(uniform01()); }

  /// Chi-square with integer df, as a sum of squared normals.
  double chisq(int df) {
    double s = 0.0;
    for (int i = 0; i < df; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hdfa
