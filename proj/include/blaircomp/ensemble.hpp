#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "blaircomp/linalg.hpp"
#include "blaircomp/rng.hpp"

namespace blaircomp {

struct Dims {
  std::size_t s = 0;  // nodes
  std::size_t K = 0;  // channel length
  std::size_t N = 0;  // data length
  std::size_t m = 0;  // measurements
};

/// Access matrix with rows b_j^H (m x K): the first K columns of the unitary DFT.
struct DesignMatrixB {
  CMat rows;

  Eigen::Index m() const { return rows.rows(); }
  Eigen::Index K() const { return rows.cols(); }
  // b_j itself (the conjugate of row j).
  CVec b(Eigen::Index j) const { return rows.row(j).adjoint(); }
};

/// Per-node design vectors a_ij in C^N. adjoint_rows[i] is m x N with row j = a_ij^H,
/// so `adjoint_rows[i] * x` evaluates every a_ij^H x at once.
struct DesignTensorA {
  std::vector<CMat> adjoint_rows;

  std::size_t s() const { return adjoint_rows.size(); }
  Eigen::Index m() const { return adjoint_rows.empty() ? 0 : adjoint_rows.front().rows(); }
  Eigen::Index N() const { return adjoint_rows.empty() ? 0 : adjoint_rows.front().cols(); }
  CVec a(std::size_t i, Eigen::Index j) const { return adjoint_rows[i].row(j).adjoint(); }
};

struct GroundTruth {
  std::vector<CVec> h;
  std::vector<CVec> x;
  std::vector<double> q;  // ||h_i|| = ||x_i|| = q_i
  double kappa = 1.0;     // max q / min q

  std::size_t s() const { return h.size(); }
};

struct Measurements {
  CVec y;
  double noise_variance = 0.0;
};

/// A complete synthetic problem. Immutable after construction; share read-only.
///
/// `access_flips`, when set, is an s x m matrix of unit scalars xi_ij such that node i
/// sees the access vector xi_ij * b_j instead of b_j. Only the random-sign auxiliary
/// ensembles use it.
struct ProblemInstance {
  Dims dims;
  DesignMatrixB B;
  DesignTensorA A;
  GroundTruth truth;
  Measurements meas;
  std::uint64_t seed = 0;
  std::optional<CMat> access_flips;

  // Throws DimensionError if any array disagrees with `dims`.
  void validate() const;
};

DesignMatrixB generate_partial_dft(std::size_t m, std::size_t K);

GroundTruth sample_ground_truth(std::size_t s, std::size_t K, std::size_t N,
                                std::span<const double> q, Rng& rng);

DesignTensorA sample_design_tensor(std::size_t s, std::size_t m, std::size_t N, Rng& rng);

// y_j = sum_i b_j^H h_i x_i^H a_ij + e_j, e_j ~ CN(0, noise_variance).
Measurements synthesize_measurements(const DesignMatrixB& B, const DesignTensorA& A,
                                     const GroundTruth& truth, double noise_variance, Rng& rng);

// Noiseless per-sample value sum_i b_j^H h_i x_i^H a_ij for arbitrary blocks.
CVec bilinear_forward(const DesignMatrixB& B, const DesignTensorA& A,
                      std::span<const CVec> h, std::span<const CVec> x,
                      const std::optional<CMat>& access_flips = std::nullopt);

/// Entrywise pre/post processing of a nomographic function:
/// theta_l = post(sum_i pre(x_il)).
struct NomographicMaps {
  std::function<Complex(Complex)> pre = [](Complex v) { return v; };
  std::function<Complex(Complex)> post = [](Complex v) { return v; };

  static NomographicMaps sum() { return {}; }
  static NomographicMaps arithmetic_mean(std::size_t s);
};

CVec compute_nomographic_target(const GroundTruth& truth,
                                const NomographicMaps& maps = NomographicMaps::sum());

struct InstanceSpec {
  Dims dims;
  std::vector<double> q;  // empty means all ones
  double noise_variance = 0.0;
  std::uint64_t seed = 0;
};

// Draws truth, design tensor and measurements from `spec.seed`.
ProblemInstance make_instance(const InstanceSpec& spec);

}  // namespace blaircomp
