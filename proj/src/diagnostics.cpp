#include "blaircomp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "blaircomp/errors.hpp"

namespace blaircomp {

CMat rotation_to_first_axis(const CVec& x) {
  const Eigen::Index n = x.size();
  if (n == 0) throw DimensionError("cannot rotate an empty vector");
  const double norm = x.norm();
  if (norm == 0.0) throw DegenerateError("cannot rotate a zero vector");
  const Complex phase = std::abs(x(0)) > 0.0 ? x(0) / std::abs(x(0)) : Complex(1.0);
  // H = I - 2 w w^H / |w|^2 with w = x + phase |x| e_1 sends x to -phase |x| e_1.
  CVec w = x;
  w(0) += phase * norm;
  CMat U = CMat::Identity(n, n) - (2.0 / w.squaredNorm()) * w * w.adjoint();
  U *= -std::conj(phase);
  return U;
}

ProblemInstance canonicalize(const ProblemInstance& inst) {
  inst.validate();
  ProblemInstance out = inst;
  for (std::size_t i = 0; i < inst.dims.s; ++i) {
    const CMat U = rotation_to_first_axis(inst.truth.x[i]);
    // a' = U a, so the stored rows a^H become a^H U^H.
    out.A.adjoint_rows[i] = inst.A.adjoint_rows[i] * U.adjoint();
    CVec e1 = CVec::Zero(inst.truth.x[i].size());
    e1(0) = inst.truth.q[i];
    out.truth.x[i] = e1;
  }
  return out;
}

SignFlipEnsemble sign_flip_ensemble(const ProblemInstance& inst, Rng& rng) {
  SignFlips flips;
  flips.xi.resize(Eigen::Index(inst.dims.s), Eigen::Index(inst.dims.m));
  for (Eigen::Index i = 0; i < flips.xi.rows(); ++i)
    for (Eigen::Index j = 0; j < flips.xi.cols(); ++j) {
      Complex u = rng.complex_normal();
      while (std::abs(u) == 0.0) u = rng.complex_normal();
      flips.xi(i, j) = u / std::abs(u);
    }
  return sign_flip_ensemble(inst, flips);
}

SignFlipEnsemble sign_flip_ensemble(const ProblemInstance& inst, const SignFlips& flips) {
  inst.validate();
  if (flips.xi.rows() != Eigen::Index(inst.dims.s) || flips.xi.cols() != Eigen::Index(inst.dims.m))
    throw DimensionError("sign flips must be s x m");
  SignFlipEnsemble out{inst, flips};
  ProblemInstance& f = out.instance;
  for (std::size_t i = 0; i < inst.dims.s; ++i) {
    // First entry of a_ij scales by xi, so the stored conjugate scales by conj(xi).
    f.A.adjoint_rows[i].col(0).array() *=
        flips.xi.row(Eigen::Index(i)).transpose().array().conjugate();
  }
  if (inst.access_flips)
    f.access_flips = (inst.access_flips->array() * flips.xi.array()).matrix();
  else
    f.access_flips = flips.xi;
  return out;
}

double max_measurement_gap(const ProblemInstance& original, const ProblemInstance& flipped) {
  original.validate();
  flipped.validate();
  double worst = 0.0;
  const auto& tr = original.truth;
  for (std::size_t i = 0; i < original.dims.s; ++i) {
    std::vector<CVec> h(original.dims.s), x(original.dims.s);
    for (std::size_t k = 0; k < original.dims.s; ++k) {
      h[k] = k == i ? tr.h[k] : CVec::Zero(tr.h[k].size());
      x[k] = k == i ? tr.x[k] : CVec::Zero(tr.x[k].size());
    }
    const CVec a = bilinear_forward(original.B, original.A, h, x, original.access_flips);
    const CVec b = bilinear_forward(flipped.B, flipped.A, h, x, flipped.access_flips);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::string_view to_string(AuxiliaryKind kind) {
  switch (kind) {
    case AuxiliaryKind::LeaveOneOut: return "leave-one-out";
    case AuxiliaryKind::Sign: return "sign";
    case AuxiliaryKind::SignLeaveOneOut: return "sign-leave-one-out";
  }
  return "unknown";
}

SolverSettings auxiliary_settings(SolverSettings settings) {
  settings.keep_iterates = true;
  settings.rel_tol.reset();
  settings.loss_tol.reset();
  return settings;
}

AuxiliaryRun leave_one_out_run(std::shared_ptr<const ProblemInstance> inst, std::size_t l,
                               const Iterate& z0, const SolverSettings& settings) {
  if (l >= inst->dims.m) throw IndexError("leave-one-out index outside [0, m)");
  AuxiliaryRun run{AuxiliaryKind::LeaveOneOut, l, inst, {}};
  run.trace = run_wf(*inst, z0, auxiliary_settings(settings), {}, l);
  return run;
}

AuxiliaryRun sign_run(std::shared_ptr<const ProblemInstance> flipped, const Iterate& z0,
                      const SolverSettings& settings) {
  AuxiliaryRun run{AuxiliaryKind::Sign, std::nullopt, flipped, {}};
  run.trace = run_wf(*flipped, z0, auxiliary_settings(settings));
  return run;
}

AuxiliaryRun sign_leave_one_out_run(std::shared_ptr<const ProblemInstance> flipped, std::size_t l,
                                    const Iterate& z0, const SolverSettings& settings) {
  if (l >= flipped->dims.m) throw IndexError("leave-one-out index outside [0, m)");
  AuxiliaryRun run{AuxiliaryKind::SignLeaveOneOut, l, flipped, {}};
  run.trace = run_wf(*flipped, z0, auxiliary_settings(settings), {}, l);
  return run;
}

std::string_view to_string(Hypothesis h) {
  switch (h) {
    case Hypothesis::LooDistance: return "loo_dist";
    case Hypothesis::LooSignalH: return "loo_signal_h";
    case Hypothesis::LooSignalX: return "loo_signal_x";
    case Hypothesis::SignDistanceH: return "sgn_dist_h";
    case Hypothesis::SignDistanceX: return "sgn_dist_x";
    case Hypothesis::DoubleDifferenceH: return "double_diff_h";
    case Hypothesis::DoubleDifferenceX: return "double_diff_x";
    case Hypothesis::NormH: return "norm_h";
    case Hypothesis::NormX: return "norm_x";
    case Hypothesis::NormRelativeH: return "norm_rel_h";
    case Hypothesis::NormRelativeX: return "norm_rel_x";
    case Hypothesis::IncoherenceA: return "incoherence_a";
    case Hypothesis::IncoherenceB: return "incoherence_b";
  }
  return "unknown";
}

std::optional<double> HypothesisReport::max_at(Hypothesis quantity, std::size_t t) const {
  std::optional<double> best;
  for (const auto& r : rows)
    if (r.t == t && r.quantity == quantity && r.value) best = std::max(best.value_or(*r.value), *r.value);
  return best;
}

std::vector<std::size_t> HypothesisReport::iterations() const {
  std::vector<std::size_t> ts;
  for (const auto& r : rows)
    if (ts.empty() || ts.back() != r.t) ts.push_back(r.t);
  return ts;
}

namespace {

struct Aligned {
  CVec h;
  CVec x;
  double cost = 0.0;
};

// Aligns (h, x) onto (h_ref, x_ref); nullopt when (h, x) is degenerate.
std::optional<Aligned> align_onto(const CVec& h, const CVec& x, const CVec& h_ref,
                                  const CVec& x_ref) {
  try {
    const auto al = align_pair(h, x, h_ref, x_ref);
    return Aligned{h / std::conj(al.omega), al.omega * x, al.cost};
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

void check_schedule(const StateTrace& base, const StateTrace& other) {
  if (other.iterates.size() != base.iterates.size())
    throw DimensionError("auxiliary run does not share the base schedule");
  for (std::size_t k = 0; k < base.iterates.size(); ++k)
    if (other.iterates[k].t != base.iterates[k].t)
      throw DimensionError("auxiliary run does not share the base schedule");
}

}  // namespace

HypothesisReport measure_hypotheses(const StateTrace& base, std::span<const AuxiliaryRun> aux,
                                    const ProblemInstance& inst) {
  if (base.iterates.size() != base.records.size())
    throw DimensionError("base trace must keep iterates");
  const auto& truth = inst.truth;
  const auto s = inst.dims.s;
  const double m = double(inst.dims.m);
  const double logm = std::log(m);
  const double mu = incoherence(truth, inst.B);
  const auto [qmin, qmax] = std::minmax_element(truth.q.begin(), truth.q.end());
  const double kappa = *qmax / *qmin;
  const double K = double(inst.dims.K), N = double(inst.dims.N), S = double(s);

  const AuxiliaryRun* sign = nullptr;
  std::map<std::size_t, const AuxiliaryRun*> loo, sign_loo;
  for (const auto& run : aux) {
    check_schedule(base, run.trace);
    switch (run.kind) {
      case AuxiliaryKind::LeaveOneOut: loo[*run.dropped] = &run; break;
      case AuxiliaryKind::Sign: sign = &run; break;
      case AuxiliaryKind::SignLeaveOneOut: sign_loo[*run.dropped] = &run; break;
    }
  }

  HypothesisReport rep;
  rep.mu = mu;
  rep.m = inst.dims.m;

  for (std::size_t k = 0; k < base.iterates.size(); ++k) {
    const Iterate& z = base.iterates[k];
    const std::size_t t = z.t;
    const double growth = std::pow(1.0 + 1.0 / (S * logm), double(t));
    for (std::size_t i = 0; i < s; ++i) {
      auto push = [&](Hypothesis q, std::optional<double> v, double scale) {
        rep.rows.push_back({t, i, q, v, scale});
      };
      const auto tilde = align_onto(z.h[i], z.x[i], truth.h[i], truth.x[i]);
      if (!tilde) {
        for (int q = 0; q <= int(Hypothesis::IncoherenceB); ++q)
          push(Hypothesis(q), std::nullopt, 0.0);
        continue;
      }
      const auto [alpha_h, beta_h] = signal_split(truth.h[i], tilde->h);
      const auto [alpha_x, beta_x] = signal_split(truth.x[i], tilde->x);
      const double ah = std::abs(alpha_h), ax = std::abs(alpha_x);
      const double hbar_n = truth.h[i].norm(), xbar_n = truth.x[i].norm();

      // Leave-one-out families.
      std::optional<double> loo_dist, loo_sig_h, loo_sig_x;
      std::map<std::size_t, Aligned> loo_hat;
      for (const auto& [l, run] : loo) {
        const Iterate& zl = run->trace.iterates[k];
        const auto hat = align_onto(zl.h[i], zl.x[i], tilde->h, tilde->x);
        if (!hat) continue;
        loo_hat[l] = *hat;
        loo_dist = std::max(loo_dist.value_or(0.0), std::sqrt(std::max(hat->cost, 0.0)));
        loo_sig_h = std::max(loo_sig_h.value_or(0.0),
                             std::abs(truth.h[i].dot(hat->h - tilde->h)) / hbar_n);
        loo_sig_x = std::max(loo_sig_x.value_or(0.0),
                             std::abs(truth.x[i].dot(hat->x - tilde->x)) / xbar_n);
      }
      push(Hypothesis::LooDistance, loo_dist,
           (beta_h + beta_x) * growth * S * mu * mu * kappa * std::sqrt(std::max(K, N) * std::pow(logm, 8)) / m);
      push(Hypothesis::LooSignalH, loo_sig_h,
           ah * growth * S * mu * mu * kappa * std::sqrt(K * std::pow(logm, 13)) / m);
      push(Hypothesis::LooSignalX, loo_sig_x,
           ax * growth * S * mu * mu * kappa * std::sqrt(N * std::pow(logm, 13)) / m);

      // Random-sign family.
      std::optional<double> sgn_h, sgn_x, dd_h, dd_x;
      if (sign) {
        const Iterate& zs = sign->trace.iterates[k];
        if (const auto check = align_onto(zs.h[i], zs.x[i], tilde->h, tilde->x)) {
          sgn_h = (check->h - tilde->h).norm();
          sgn_x = (check->x - tilde->x).norm();
        }
        if (const auto sgn_tilde = align_onto(zs.h[i], zs.x[i], truth.h[i], truth.x[i])) {
          for (const auto& [l, run] : sign_loo) {
            const auto it = loo_hat.find(l);
            if (it == loo_hat.end()) continue;
            const Iterate& zsl = run->trace.iterates[k];
            const auto sl_hat = align_onto(zsl.h[i], zsl.x[i], sgn_tilde->h, sgn_tilde->x);
            if (!sl_hat) continue;
            dd_h = std::max(dd_h.value_or(0.0),
                            (tilde->h - it->second.h - sgn_tilde->h + sl_hat->h).norm());
            dd_x = std::max(dd_x.value_or(0.0),
                            (tilde->x - it->second.x - sgn_tilde->x + sl_hat->x).norm());
          }
        }
      }
      push(Hypothesis::SignDistanceH, sgn_h,
           ah * growth * std::sqrt(S * mu * mu * kappa * kappa * K * std::pow(logm, 8) / m));
      push(Hypothesis::SignDistanceX, sgn_x,
           ax * growth * std::sqrt(S * mu * mu * kappa * kappa * N * std::pow(logm, 8) / m));
      push(Hypothesis::DoubleDifferenceH, dd_h,
           ah * growth * S * mu * mu * std::sqrt(K * std::pow(logm, 16)) / m);
      push(Hypothesis::DoubleDifferenceX, dd_x,
           ax * growth * S * mu * mu * std::sqrt(N * std::pow(logm, 16)) / m);

      // Norm controls.
      const double hn = z.h[i].norm(), xn = z.x[i].norm();
      push(Hypothesis::NormH, hn, 1.0);
      push(Hypothesis::NormX, xn, 1.0);
      push(Hypothesis::NormRelativeH, hn, 5.0 * ah * std::sqrt(std::pow(logm, 5)));
      push(Hypothesis::NormRelativeX, xn, 5.0 * ax * std::sqrt(std::pow(logm, 5)));

      // Incoherence between the aligned iterate and the design.
      const double inc_a =
          (inst.A.adjoint_rows[i] * tilde->x).cwiseAbs().maxCoeff() / tilde->x.norm();
      const double inc_b = (inst.B.rows * tilde->h).cwiseAbs().maxCoeff() / tilde->h.norm();
      push(Hypothesis::IncoherenceA, inc_a, std::sqrt(logm));
      push(Hypothesis::IncoherenceB, inc_b, mu / std::sqrt(m) * logm * logm);
    }
  }
  return rep;
}

ConcentrationReport concentration_report(const ProblemInstance& inst) {
  inst.validate();
  ConcentrationReport rep;
  rep.first_entry_bound = 5.0 * std::sqrt(std::log(double(inst.dims.m)));
  rep.norm_bound = 3.0 * std::sqrt(double(inst.dims.N));
  for (const auto& Ai : inst.A.adjoint_rows) {
    ConcentrationNode n;
    n.max_first_entry = Ai.col(0).cwiseAbs().maxCoeff();
    n.max_norm = Ai.rowwise().norm().maxCoeff();
    rep.first_entry_ok = rep.first_entry_ok && n.max_first_entry <= rep.first_entry_bound;
    rep.norm_ok = rep.norm_ok && n.max_norm <= rep.norm_bound;
    rep.nodes.push_back(n);
  }
  rep.mu = incoherence(inst.truth, inst.B);
  return rep;
}

std::vector<std::size_t> sample_indices(std::size_t m, std::size_t count, Rng& rng) {
  count = std::min(count, m);
  std::vector<std::size_t> pool(m);
  for (std::size_t j = 0; j < m; ++j) pool[j] = j;
  for (std::size_t k = 0; k < count; ++k) {
    const auto pick = k + std::min(m - k - 1, std::size_t(rng.uniform() * double(m - k)));
    std::swap(pool[k], pool[pick]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

DiagnosticsResult run_diagnostics(const ProblemInstance& inst, const Iterate& z0,
                                  const SolverSettings& settings, const DiagnosticsOptions& opts,
                                  Rng& rng) {
  DiagnosticsResult out;
  auto base_inst = std::make_shared<const ProblemInstance>(opts.canonicalize ? canonicalize(inst) : inst);
  out.instance = base_inst;

  // The canonical frame rotates x; carry the initial point into the same frame.
  Iterate start = z0;
  if (opts.canonicalize)
    for (std::size_t i = 0; i < inst.dims.s; ++i)
      start.x[i] = rotation_to_first_axis(inst.truth.x[i]) * z0.x[i];

  const SolverSettings aux_settings = auxiliary_settings(settings);
  out.base = run_wf(*base_inst, start, aux_settings);

  Rng flip_rng = rng.derive(0);
  Rng index_rng = rng.derive(1);
  auto flipped = std::make_shared<const ProblemInstance>(
      sign_flip_ensemble(*base_inst, flip_rng).instance);
  const auto indices = sample_indices(inst.dims.m, opts.loo_samples, index_rng);

  for (auto l : indices) out.aux.push_back(leave_one_out_run(base_inst, l, start, aux_settings));
  out.aux.push_back(sign_run(flipped, start, aux_settings));
  for (auto l : indices) out.aux.push_back(sign_leave_one_out_run(flipped, l, start, aux_settings));

  out.hypotheses = measure_hypotheses(out.base, out.aux, *base_inst);
  out.stages = detect_stages(out.base, base_inst->truth.q, inst.dims.m, opts.thresholds);
  out.concentration = concentration_report(*base_inst);
  return out;
}

}  // namespace blaircomp
