#pragma once

// Deterministic, counter-based random streams (splitmix64).
//
// Every stochastic operation takes a stream explicitly. Streams derived
// from the same (master seed, index path) are bit-identical across
// platforms and runs, which is what keeps batch generation reproducible
// at any parallelism degree: each unit of work derives its own stream
// instead of sharing one.

#include <cstdint>
#include <initializer_list>
#include <span>

namespace simobj {

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Independent stream addressed by an index path under a master seed,
  // e.g. derive(seed, {ref, sim, rep, dialogue}).
  static RandomStream derive(std::uint64_t master, std::span<const std::uint64_t> path) {
    std::uint64_t s = mix(master + kGamma);
    for (std::uint64_t k : path) s = mix(s ^ mix(k + kGamma));
    RandomStream r(0);
    r.state_ = s;
    return r;
  }

  static RandomStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return derive(master, std::span<const std::uint64_t>(path.begin(), path.size()));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace simobj
