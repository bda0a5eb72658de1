#pragma once

#include <span>
#include <vector>

#include "blaircomp/ensemble.hpp"
#include "blaircomp/iterate.hpp"
#include "blaircomp/rng.hpp"

namespace blaircomp {

/// Minimizer of ||hA / conj(w) - hB||^2 + ||w xA - xB||^2 over nonzero complex w.
struct AlignmentResult {
  Complex omega{1.0, 0.0};
  double cost = 0.0;
};

double alignment_objective(Complex omega, const CVec& hA, const CVec& xA, const CVec& hB,
                           const CVec& xB);

// Global minimizer via the closed-form optimal phase and a 1-D search over |w|.
// Throws DegenerateError when hA or xA is zero.
AlignmentResult align_pair(const CVec& hA, const CVec& xA, const CVec& hB, const CVec& xB);

// Per-node alignment parameters of `z` against the ground truth.
std::vector<Complex> alignment_parameters(const Iterate& z, const GroundTruth& truth);

double dist(const Iterate& z, const GroundTruth& truth);

double relative_error(const Iterate& z, const GroundTruth& truth);
// Same metric with caller-supplied (for example noisy) alignment parameters.
double relative_error_with(const Iterate& z, const GroundTruth& truth,
                           std::span<const Complex> omegas);

/// Signal / perpendicular split of one aligned node.
struct NodeComponents {
  Complex alpha_h;
  double beta_h = 0.0;
  Complex alpha_x;
  double beta_x = 0.0;
  double rmse_x = 0.0;  // beta_x / ||aligned x_i||
};

using ComponentDecomposition = std::vector<NodeComponents>;

// Returns (<d, v>/||d||, ||v - (<d, v>/||d||^2) d||) with <u, v> = u^H v.
std::pair<Complex, double> signal_split(const CVec& direction, const CVec& v);

ComponentDecomposition decompose(const Iterate& z, const GroundTruth& truth);

/// Everything the solver logs per iteration, sharing one alignment per node.
struct MetricSnapshot {
  double relative_error = 0.0;
  double dist = 0.0;
  std::vector<Complex> omega;
  ComponentDecomposition components;
};

MetricSnapshot measure(const Iterate& z, const GroundTruth& truth);

// mu = sqrt(m) * max_{i,j} |b_j^H h_i| / ||h_i||.
double incoherence(const GroundTruth& truth, const DesignMatrixB& B);

// omega + CN(0, 1/sigma_w).
Complex perturb_alignment(Complex omega, double sigma_w, Rng& rng);

}  // namespace blaircomp
