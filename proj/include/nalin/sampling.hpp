#pragma once

#include "nalin/common.hpp"

#include <cstdint>
#include <random>

namespace nalin {

/// Seeded source of the sample points used by audits, fits and verification.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  Vec unit_vector(int dim) {
    Vec v(dim);
    do {
      for (int i = 0; i < dim; ++i) v(i) = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

  /// Uniform in the Euclidean ball of the given radius.
  Vec in_ball(int dim, double radius) {
    const double r = radius * std::pow(uniform(0.0, 1.0), 1.0 / dim);
    return r * unit_vector(dim);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nalin
