#include "blaircomp/rng.hpp"

#include <cmath>

namespace blaircomp {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::normal(double stddev) { return stddev * normal_(engine_); }

double Rng::uniform() { return std::generate_canonical<double, 53>(engine_); }

Complex Rng::complex_normal(double variance) {
  const double sd = std::sqrt(0.5 * variance);
  const double re = normal(sd);
  const double im = normal(sd);
  return {re, im};
}

CVec Rng::complex_normal_vector(Eigen::Index n, double variance) {
  CVec v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = complex_normal(variance);
  return v;
}

}  // namespace blaircomp
