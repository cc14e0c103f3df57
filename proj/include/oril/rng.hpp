#pragma once

#include "oril/common.hpp"

#include <cstdint>
#include <random>

namespace oril {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seeded random stream. Every consumer of randomness owns its own stream,
// derived from (seed, stream id); identical (seed, id) pairs replay exactly.
// The uniform/normal mappings are implemented here rather than with
// std::*_distribution so the draw sequence is pinned by this code.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed ^ (0xda3e39cb94b95bdbull * (stream + 1));
    std::uint64_t init[4];
    for (auto& w : init) w = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(init[0]), static_cast<std::uint32_t>(init[0] >> 32),
                      static_cast<std::uint32_t>(init[1]), static_cast<std::uint32_t>(init[1] >> 32),
                      static_cast<std::uint32_t>(init[2]), static_cast<std::uint32_t>(init[2] >> 32),
                      static_cast<std::uint32_t>(init[3]), static_cast<std::uint32_t>(init[3] >> 32)};
    gen_.seed(seq);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). Rejection sampling, no modulo bias.
  std::uint64_t integer(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::integer: n must be positive");
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller. Two uniforms per draw, no cached spare.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream. Children with distinct ids never overlap in practice.
  RngStream fork(std::uint64_t stream_id) { return RngStream(next_u64(), stream_id); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace oril
