#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace smcd {

/// Counter-based generator: the i-th output of a stream is a pure function of
/// (key, i), so substreams can be handed to any thread without changing the
/// numbers drawn. The mixer is the SplitMix64 finalizer.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kGamma * ++counter_); }

  /// Independent child stream labelled by `id`. Does not advance this stream.
  Rng substream(std::uint64_t id) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(id + 0xbb67ae8584caa73bULL));
    return child;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two outputs per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Unit-rate exponential.
  double exponential() { return -std::log(uniform()); }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace smcd
