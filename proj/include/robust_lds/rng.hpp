#pragma once

#include <cstdint>
#include <random>

namespace robust_lds {

/// Deterministic RNG stream. Thin wrapper over mt19937_64 so every component
/// takes an explicit handle; substreams are derived by hashing (seed, index).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }

  // shape/rate parameterization
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  double inverse_gamma(double shape, double rate) {
    return rate / std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  double beta(double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
    const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
    return x / (x + y);
  }

  long poisson(double mean) {
    return std::poisson_distribution<long>(mean)(engine_);
  }

  long binomial(long n, double p) {
    return std::binomial_distribution<long>(n, p)(engine_);
  }

  /// Substream with a seed derived from this stream's seed material.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 of seed ^ golden-ratio-scrambled index
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace robust_lds
