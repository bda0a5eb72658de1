#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "blaircomp/ensemble.hpp"
#include "blaircomp/state_evolution.hpp"
#include "blaircomp/wf.hpp"

namespace blaircomp {

// Rotates each node frame so the data ground truth becomes q_i e_1. Every a_ij is mapped
// through the same unitary, so the measurements are unchanged and are kept as-is.
ProblemInstance canonicalize(const ProblemInstance& inst);

// Unitary U with U x = ||x|| e_1.
CMat rotation_to_first_axis(const CVec& x);

/// Unit-modulus scalars xi_ij, s x m.
struct SignFlips {
  CMat xi;
};

struct SignFlipEnsemble {
  ProblemInstance instance;
  SignFlips flips;
};

// a_ij,1 -> xi_ij a_ij,1 and b_j -> xi_ij b_j for node i. Measurements are reused.
SignFlipEnsemble sign_flip_ensemble(const ProblemInstance& inst, Rng& rng);
SignFlipEnsemble sign_flip_ensemble(const ProblemInstance& inst, const SignFlips& flips);

// max_{i,j} |b'_ij^H h_i x_i^H a'_ij - b_j^H h_i x_i^H a_ij| over ground-truth blocks.
double max_measurement_gap(const ProblemInstance& original, const ProblemInstance& flipped);

enum class AuxiliaryKind { LeaveOneOut, Sign, SignLeaveOneOut };

std::string_view to_string(AuxiliaryKind kind);

struct AuxiliaryRun {
  AuxiliaryKind kind = AuxiliaryKind::LeaveOneOut;
  std::optional<std::size_t> dropped;                 // sample l, 0-based
  std::shared_ptr<const ProblemInstance> instance;    // instance the run was solved on
  StateTrace trace;
};

// Auxiliary runs always keep iterates and disable early stopping so their schedule matches
// the base run.
SolverSettings auxiliary_settings(SolverSettings settings);

AuxiliaryRun leave_one_out_run(std::shared_ptr<const ProblemInstance> inst, std::size_t l,
                               const Iterate& z0, const SolverSettings& settings);
AuxiliaryRun sign_run(std::shared_ptr<const ProblemInstance> flipped, const Iterate& z0,
                      const SolverSettings& settings);
AuxiliaryRun sign_leave_one_out_run(std::shared_ptr<const ProblemInstance> flipped, std::size_t l,
                                    const Iterate& z0, const SolverSettings& settings);

enum class Hypothesis {
  LooDistance,         // max_l dist(z_i^(l), aligned z_i)
  LooSignalH,          // max_l |hbar^H (h_i^(l) - aligned h_i)| / ||hbar||
  LooSignalX,          // same along xbar
  SignDistanceH,       // ||h_i^sgn (mutually aligned) - aligned h_i||
  SignDistanceX,
  DoubleDifferenceH,   // max_l ||h~ - h^(l) - h~sgn + h^sgn,(l)||
  DoubleDifferenceX,
  NormH,               // ||h_i||
  NormX,
  NormRelativeH,       // ||h_i|| against 5 |alpha_h| sqrt(log^5 m)
  NormRelativeX,
  IncoherenceA,        // max_l |a_il^H x~_i| / ||x~_i||, scale sqrt(log m)
  IncoherenceB,        // max_l |b_l^H h~_i| / ||h~_i||, scale mu log^2 m / sqrt(m)
};

std::string_view to_string(Hypothesis h);

struct HypothesisRow {
  std::size_t t = 0;
  std::size_t node = 0;
  Hypothesis quantity = Hypothesis::LooDistance;
  std::optional<double> value;  // absent when an alignment degenerated
  double scale = 0.0;           // comparison rate with unit constants
};

struct HypothesisReport {
  std::vector<HypothesisRow> rows;
  double mu = 0.0;
  std::size_t m = 0;

  // Largest value of `quantity` over nodes at iteration t, if any row is present.
  std::optional<double> max_at(Hypothesis quantity, std::size_t t) const;
  std::vector<std::size_t> iterations() const;
};

// `base` and every auxiliary trace must hold iterates on the same schedule.
HypothesisReport measure_hypotheses(const StateTrace& base, std::span<const AuxiliaryRun> aux,
                                    const ProblemInstance& inst);

struct ConcentrationNode {
  double max_first_entry = 0.0;  // max_j |a_ij,1|
  double max_norm = 0.0;         // max_j ||a_ij||
};

struct ConcentrationReport {
  std::vector<ConcentrationNode> nodes;
  double first_entry_bound = 0.0;  // 5 sqrt(log m)
  double norm_bound = 0.0;         // 3 sqrt(N)
  double mu = 0.0;
  bool first_entry_ok = true;
  bool norm_ok = true;
};

ConcentrationReport concentration_report(const ProblemInstance& inst);

// count distinct indices from [0, m), uniformly without replacement, sorted.
std::vector<std::size_t> sample_indices(std::size_t m, std::size_t count, Rng& rng);

struct DiagnosticsResult {
  std::shared_ptr<const ProblemInstance> instance;  // canonicalized when requested
  StateTrace base;
  std::vector<AuxiliaryRun> aux;
  HypothesisReport hypotheses;
  StageReport stages;
  ConcentrationReport concentration;
};

struct DiagnosticsOptions {
  std::size_t loo_samples = 8;
  bool canonicalize = true;
  StageThresholds thresholds;
};

DiagnosticsResult run_diagnostics(const ProblemInstance& inst, const Iterate& z0,
                                  const SolverSettings& settings, const DiagnosticsOptions& opts,
                                  Rng& rng);

}  // namespace blaircomp
