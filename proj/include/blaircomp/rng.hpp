#pragma once

#include <cstdint>
#include <random>

#include "blaircomp/linalg.hpp"

namespace blaircomp {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded random source passed explicitly to every stochastic operation.
///
/// Backed by mt19937_64. Child streams are derived from (seed, stream id) so a
/// trial or auxiliary run can be replayed without reproducing its siblings.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  // Independent generator for sub-stream `stream`.
  Rng derive(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  double normal(double stddev = 1.0);
  double uniform();

  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  Complex complex_normal(double variance = 1.0);
  CVec complex_normal_vector(Eigen::Index n, double variance = 1.0);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace blaircomp
