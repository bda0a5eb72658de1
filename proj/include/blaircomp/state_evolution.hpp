#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "blaircomp/wf.hpp"

namespace blaircomp {

/// Population-level (alpha, beta) pair for one node; alpha is real here.
struct SENode {
  double alpha_h = 0.0;
  double beta_h = 0.0;
  double alpha_x = 0.0;
  double beta_x = 0.0;
  double q = 1.0;
};

struct SEState {
  std::vector<SENode> nodes;
  double eta = 0.1;
};

// alpha_x+ = (1 - eta) alpha_x + eta q^2 alpha_h / (alpha_h^2 + beta_h^2),
// beta_x+  = (1 - eta) beta_x, and symmetrically for h. Synchronous update.
SEState population_se_step(const SEState& state);

/// Deviation of a measured step from the population recursion.
struct Perturbation {
  double psi_h = 0.0;
  double psi_x = 0.0;
  double phi_h = 0.0;
  double phi_x = 0.0;
  double rho_h = 0.0;
  double rho_x = 0.0;
};

// One step of the approximate recursion driven by explicit perturbation terms:
// alpha_h+ = (1 - eta + eta q psi_h / D_x) alpha_h + eta (1 - rho_h) q^2 alpha_x / D_x,
// beta_h+  = (1 - eta + eta q phi_h / D_x) beta_h, with D_x = alpha_x^2 + beta_x^2.
SEState approximate_se_step(const SEState& state, std::span<const Perturbation> perturbations);

// Runs `steps` population steps and returns them as a trace (t = 0..steps).
StateTrace population_trace(const SEState& start, std::size_t steps);

/// Extracted perturbations for one node across one step t -> t+1. psi is reported under
/// the convention rho = 0; delta is the raw deviation of alpha from the population step.
struct PerturbationEntry {
  std::optional<double> psi_h, psi_x, phi_h, phi_x, rho_h, rho_x;
  Complex delta_h;
  Complex delta_x;
};

struct PerturbationSeries {
  std::vector<std::size_t> t;                          // step start index
  std::vector<std::vector<PerturbationEntry>> values;  // [step][node]
};

// Uses every pair of consecutive trace records (t, t + 1); other pairs are skipped.
PerturbationSeries extract_perturbations(const StateTrace& trace, std::span<const double> q,
                                         double eta);

struct StageThresholds {
  double gamma = 0.1;
  double t1 = 1.0;
  double t2 = 0.1;
};

struct StageReport {
  std::optional<std::size_t> t_gamma;
  std::optional<std::size_t> t1;
  std::optional<std::size_t> t2;
  StageThresholds thresholds;
  // Least-squares slope of log(|alpha| / beta) against t over [0, T_gamma], per node.
  std::vector<std::optional<double>> growth_h;
  std::vector<std::optional<double>> growth_x;
};

// q gives the per-node norms (kappa derives from it); m enters the T_1 threshold t1 / log^5 m.
StageReport detect_stages(const StateTrace& trace, std::span<const double> q, std::size_t m,
                          const StageThresholds& thresholds = {});

// Least-squares slope of ys against ts.
std::optional<double> fit_slope(std::span<const double> ts, std::span<const double> ys);

}  // namespace blaircomp
