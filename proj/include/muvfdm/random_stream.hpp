#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace muvfdm {

/// Counter-derived SplitMix64 substream.
///
/// Every random quantity in a simulation is drawn from a stream keyed by
/// (master seed, trial index, resample attempt, purpose id), so any trial is
/// reproducible in isolation and trials can run on any thread in any order
/// without changing a single bit of the output.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in (0, 1], 53-bit resolution. Never returns 0, so it is
  /// safe under a logarithm.
  double next_unit_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance (Box-Muller).
  std::complex<double> next_cgauss(double variance) {
    const double radius = std::sqrt(-variance * std::log(next_unit_pos()));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * next_unit();
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t key_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b ^ 0xD1B54A32D192ED03ull) + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

}  // namespace detail

/// Purpose ids keep the substreams of distinct links / uses disjoint.
enum class StreamPurpose : std::uint64_t {
  MacroToMueTaps = 1,
  SbsToMueTaps = 2,
  SbsToSueTaps = 3,
  MacroToSueTaps = 4,
  PilotNoiseSbsToMue = 5,
  PilotNoiseSbsToSue = 6,
  ProbeSymbols = 7,
  RandomCascade = 8,
};

inline std::uint64_t purpose_id(StreamPurpose kind, std::uint64_t i = 0, std::uint64_t j = 0) {
  return (static_cast<std::uint64_t>(kind) << 40) | (i << 20) | j;
}

inline RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t attempt,
                                  std::uint64_t purpose) {
  using detail::key_combine;
  return RandomStream(key_combine(key_combine(key_combine(master_seed, trial), attempt), purpose));
}

}  // namespace muvfdm
