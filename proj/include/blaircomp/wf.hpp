#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "blaircomp/ensemble.hpp"
#include "blaircomp/iterate.hpp"
#include "blaircomp/metrics.hpp"
#include "blaircomp/rng.hpp"

namespace blaircomp {

// Every loss/gradient entry point accepts an optional dropped sample l (0-based);
// the objective then sums over j != l only.
using DroppedSample = std::optional<std::size_t>;

// h_i ~ CN(0, I/K), x_i ~ CN(0, I/N); not normalized.
Iterate random_init(std::size_t s, std::size_t K, std::size_t N, Rng& rng);

// r_j = sum_i b_j^H h_i x_i^H a_ij - y_j; zero at the dropped sample.
CVec residual(const Iterate& z, const ProblemInstance& inst, DroppedSample dropped = {});

double loss(const Iterate& z, const ProblemInstance& inst, DroppedSample dropped = {});

// Wirtinger gradient (derivative with respect to the conjugate variables). One residual
// vector is shared by all nodes.
GradientBlocks wirtinger_gradient(const Iterate& z, const ProblemInstance& inst,
                                  DroppedSample dropped = {});

// Expected gradient over the design ensemble, in closed form.
GradientBlocks population_gradient(const Iterate& z, const GroundTruth& truth);

// h_i -= eta / ||x_i||^2 * g_h_i and x_i -= eta / ||h_i||^2 * g_x_i. Pure.
Iterate wf_step(const Iterate& z, const GradientBlocks& g, double eta);

// The 2N x 2N Wirtinger Hessian of f with respect to (x_i, conj(x_i)):
// [D, E; E^H, conj(D)] with D = sum_j |b_j^H h_i|^2 a_ij a_ij^H. The loss is a squared
// modulus of a function that is linear in conj(x_i), so E is identically zero.
CMat wirtinger_hessian_x_block(const Iterate& z, const ProblemInstance& inst, std::size_t i,
                               DroppedSample dropped = {});

// Mixed block d^2 f / d conj(h_i) d conj(x_i)^T = sum_j b_j b_j^H h_i (a_ij a_ij^H x_i)^T,
// a K x N matrix.
CMat wirtinger_hessian_hx_block(const Iterate& z, const ProblemInstance& inst, std::size_t i,
                                DroppedSample dropped = {});

// 0.1 for s <= 10, otherwise 1/s.
double default_step_size(std::size_t s);

struct SolverSettings {
  double eta = 0.1;
  std::size_t max_iters = 500;
  // Stop once relative_error <= rel_tol (needs ground truth) or loss <= loss_tol.
  std::optional<double> rel_tol;
  std::optional<double> loss_tol;
  std::size_t log_every = 1;
  bool keep_iterates = false;
  double divergence_factor = 1e6;

  void validate() const;
};

struct TraceRecord {
  std::size_t t = 0;
  double loss = 0.0;
  double relative_error = 0.0;
  double dist = 0.0;
  ComponentDecomposition components;
};

struct StateTrace {
  std::vector<TraceRecord> records;
  std::vector<Iterate> iterates;  // aligned with records when keep_iterates is set
  Iterate final_iterate;
  std::size_t iterations = 0;
  bool converged = false;
};

// Called at the logging cadence with (t, iterate, loss). Must not mutate the iterate.
using Observer = std::function<void(std::size_t, const Iterate&, double)>;

StateTrace run_wf(const ProblemInstance& inst, const Iterate& z0, const SolverSettings& settings,
                  std::span<const Observer> observers = {}, DroppedSample dropped = {});

}  // namespace blaircomp
