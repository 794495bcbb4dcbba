#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "rbl/geometry.hpp"

namespace rbl {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-trial seed from (master seed, grid index, trial index). Serial and
/// parallel sweeps see the same streams because the seed depends only on indices.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1342543de82ef95ULL));
}

/// Seeded random source passed explicitly to every simulation routine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  double normal(double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  Vec3 normal3(double sigma) { return {normal(sigma), normal(sigma), normal(sigma)}; }

  /// Uniformly distributed rotation (Shoemake's quaternion method).
  Mat3 rotation() {
    const double u1 = uniform();
    const double u2 = uniform() * 2.0 * std::numbers::pi;
    const double u3 = uniform() * 2.0 * std::numbers::pi;
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const Eigen::Quaterniond q(b * std::cos(u3), a * std::sin(u2), a * std::cos(u2), b * std::sin(u3));
    return q.normalized().toRotationMatrix();
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rbl
