#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "hawkesbin/errors.hpp"

namespace hawkesbin {

/// The single generator algorithm this library ships. Draws depend only on
/// the 64-bit key and the order of calls, never on platform or library state,
/// so seeded runs are bit-for-bit reproducible.
inline constexpr const char* kRngAlgorithm = "splitmix64-mt19937_64";

/// splitmix64 finalizer; a stateless 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// A keyed draw stream. `split` derives an independent child stream from the
/// key alone, so the child's draws do not depend on how much the parent has
/// consumed; that keeps per-cluster generation reproducible under any
/// scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), gen_(mix64(key)) {}

  [[nodiscard]] RngStream split(std::uint64_t child) const {
    return RngStream(mix64(key_ ^ mix64(child)));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform draw in (0, 1]; safe to feed into log.
  double uniform_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double exponential(double rate) {
    require(rate > 0.0, ErrorCode::invalid_parameter,
            "exponential rate must be positive");
    return -std::log(uniform_positive()) / rate;
  }

  /// Poisson draw. Knuth's product method below mean 60; larger means are
  /// split exactly into bounded-mean summands, so no approximation enters.
  std::int64_t poisson(double mean) {
    require(std::isfinite(mean) && mean >= 0.0, ErrorCode::invalid_parameter,
            "poisson mean must be finite and non-negative");
    if (mean == 0.0) return 0;
    if (mean < 60.0) {
      const double threshold = std::exp(-mean);
      std::int64_t k = 0;
      double product = uniform_positive();
      while (product > threshold) {
        ++k;
        product *= uniform_positive();
      }
      return k;
    }
    const auto parts = static_cast<std::int64_t>(std::ceil(mean / 50.0));
    const double part_mean = mean / static_cast<double>(parts);
    std::int64_t total = 0;
    for (std::int64_t i = 0; i < parts; ++i) total += poisson(part_mean);
    return total;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 gen_;
};

/// Seed plus algorithm identifier. The identifier is stored in run manifests;
/// constructing a root stream re-checks it so stale manifests cannot silently
/// replay under a different generator.
struct RandomSource {
  std::uint64_t seed = 0;
  std::string algorithm = kRngAlgorithm;

  [[nodiscard]] RngStream root() const {
    require(algorithm == kRngAlgorithm, ErrorCode::invalid_parameter,
            "unknown generator algorithm: " + algorithm);
    return RngStream(seed);
  }
};

}  // namespace hawkesbin
