#include "blaircomp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blaircomp/errors.hpp"

namespace blaircomp {

namespace {

// g(r) without the constant ||hB||^2 + ||xB||^2, for the phase-optimal omega of modulus r.
struct ModulusProfile {
  double a;   // ||hA||^2
  double c;   // ||xA||^2
  Complex u;  // hB^H hA
  Complex v;  // xB^H xA

  Complex p(double r) const { return u / r + r * v; }
  double g(double r) const { return a / (r * r) + c * r * r - 2.0 * std::abs(p(r)); }

  // |p|^2 = |u|^2 / r^2 + |v|^2 r^2 + 2 Re(conj(u) v) and its first two derivatives.
  double P(double r) const { return std::norm(p(r)); }
  double dP(double r) const { return -2.0 * std::norm(u) / (r * r * r) + 2.0 * r * std::norm(v); }
  double d2P(double r) const { return 6.0 * std::norm(u) / (r * r * r * r) + 2.0 * std::norm(v); }

  double dg(double r) const {
    const double pp = P(r);
    const double tail = pp > 0.0 ? dP(r) / std::sqrt(pp) : 0.0;
    return -2.0 * a / (r * r * r) + 2.0 * c * r - tail;
  }
  double d2g(double r) const {
    const double pp = P(r);
    double tail = 0.0;
    if (pp > 0.0) {
      const double sp = std::sqrt(pp);
      tail = d2P(r) / sp - dP(r) * dP(r) / (2.0 * pp * sp);
    }
    return 6.0 * a / (r * r * r * r) + 2.0 * c - tail;
  }
};

double golden_section(const ModulusProfile& prof, double lo, double hi, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double rho) { return prof.g(std::exp(rho)); };
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double alignment_objective(Complex omega, const CVec& hA, const CVec& xA, const CVec& hB,
                           const CVec& xB) {
  return (hA / std::conj(omega) - hB).squaredNorm() + (omega * xA - xB).squaredNorm();
}

AlignmentResult align_pair(const CVec& hA, const CVec& xA, const CVec& hB, const CVec& xB) {
  if (hA.size() != hB.size() || xA.size() != xB.size())
    throw DimensionError("alignment pair has mismatched lengths");
  const double nh = hA.norm();
  const double nx = xA.norm();
  if (nh == 0.0 || nx == 0.0) throw DegenerateError("cannot align a zero block");

  const ModulusProfile prof{nh * nh, nx * nx, hB.dot(hA), xB.dot(xA)};

  // Coarse scan over log r in [r0 / 1e6, r0 * 1e6], then golden section in the best cell.
  const double rho0 = 0.5 * std::log(nh / nx);
  const double half_span = std::log(1e6);
  constexpr int kScan = 480;
  const double step = 2.0 * half_span / kScan;
  int best = 0;
  double best_g = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kScan; ++k) {
    const double g = prof.g(std::exp(rho0 - half_span + k * step));
    if (g < best_g) {
      best_g = g;
      best = k;
    }
  }
  const double lo = rho0 - half_span + std::max(best - 1, 0) * step;
  const double hi = rho0 - half_span + std::min(best + 1, kScan) * step;
  double r = std::exp(golden_section(prof, lo, hi, 1e-10));

  // Function values only resolve the minimizer to about sqrt(eps); finish with Newton on g'.
  for (int it = 0; it < 6; ++it) {
    const double slope = prof.dg(r);
    const double curv = prof.d2g(r);
    if (!(curv > 0.0) || slope == 0.0) break;
    const double cand = r - slope / curv;
    if (!(cand > 0.0) || !(std::abs(prof.dg(cand)) < std::abs(slope))) break;
    r = cand;
  }
  const Complex p = prof.p(r);
  const double theta = std::abs(p) > 0.0 ? -std::arg(p) : 0.0;
  AlignmentResult out;
  out.omega = std::polar(r, theta);
  out.cost = alignment_objective(out.omega, hA, xA, hB, xB);
  return out;
}

std::vector<Complex> alignment_parameters(const Iterate& z, const GroundTruth& truth) {
  if (z.s() != truth.s()) throw DimensionError("iterate and truth disagree on s");
  std::vector<Complex> omega(z.s());
  for (std::size_t i = 0; i < z.s(); ++i)
    omega[i] = align_pair(z.h[i], z.x[i], truth.h[i], truth.x[i]).omega;
  return omega;
}

double dist(const Iterate& z, const GroundTruth& truth) {
  if (z.s() != truth.s()) throw DimensionError("iterate and truth disagree on s");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.s(); ++i) {
    const double d = truth.h[i].squaredNorm() + truth.x[i].squaredNorm();
    acc += align_pair(z.h[i], z.x[i], truth.h[i], truth.x[i]).cost / d;
  }
  return std::sqrt(acc);
}

double relative_error_with(const Iterate& z, const GroundTruth& truth,
                           std::span<const Complex> omegas) {
  if (z.s() != truth.s() || omegas.size() != z.s())
    throw DimensionError("iterate, truth and alignment parameters disagree on s");
  CVec target = CVec::Zero(truth.x.front().size());
  CVec estimate = CVec::Zero(target.size());
  for (std::size_t i = 0; i < z.s(); ++i) {
    target += truth.x[i];
    estimate += omegas[i] * z.x[i];
  }
  const double denom = target.norm();
  if (denom == 0.0) throw DegenerateError("relative error undefined for a zero target");
  return (estimate - target).norm() / denom;
}

double relative_error(const Iterate& z, const GroundTruth& truth) {
  const auto omega = alignment_parameters(z, truth);
  return relative_error_with(z, truth, omega);
}

std::pair<Complex, double> signal_split(const CVec& direction, const CVec& v) {
  const double dn2 = direction.squaredNorm();
  if (dn2 == 0.0) throw DegenerateError("signal direction is zero");
  const Complex overlap = direction.dot(v);
  const double beta = (v - (overlap / dn2) * direction).norm();
  return {overlap / std::sqrt(dn2), beta};
}

namespace {

NodeComponents components_for(const CVec& h, const CVec& x, Complex omega, const CVec& h_true,
                              const CVec& x_true) {
  const CVec h_al = h / std::conj(omega);
  const CVec x_al = omega * x;
  NodeComponents c;
  std::tie(c.alpha_h, c.beta_h) = signal_split(h_true, h_al);
  std::tie(c.alpha_x, c.beta_x) = signal_split(x_true, x_al);
  c.rmse_x = c.beta_x / x_al.norm();
  return c;
}

}  // namespace

ComponentDecomposition decompose(const Iterate& z, const GroundTruth& truth) {
  return measure(z, truth).components;
}

MetricSnapshot measure(const Iterate& z, const GroundTruth& truth) {
  if (z.s() != truth.s()) throw DimensionError("iterate and truth disagree on s");
  MetricSnapshot snap;
  snap.omega.resize(z.s());
  snap.components.resize(z.s());
  double dist2 = 0.0;
  for (std::size_t i = 0; i < z.s(); ++i) {
    const auto al = align_pair(z.h[i], z.x[i], truth.h[i], truth.x[i]);
    snap.omega[i] = al.omega;
    dist2 += al.cost / (truth.h[i].squaredNorm() + truth.x[i].squaredNorm());
    snap.components[i] = components_for(z.h[i], z.x[i], al.omega, truth.h[i], truth.x[i]);
  }
  snap.dist = std::sqrt(dist2);
  snap.relative_error = relative_error_with(z, truth, snap.omega);
  return snap;
}

double incoherence(const GroundTruth& truth, const DesignMatrixB& B) {
  double worst = 0.0;
  for (const auto& h : truth.h) {
    if (h.size() != B.K()) throw DimensionError("channel length must equal K");
    const double n = h.norm();
    if (n == 0.0) throw DegenerateError("incoherence undefined for a zero channel");
    worst = std::max(worst, (B.rows * h).cwiseAbs().maxCoeff() / n);
  }
  return std::sqrt(double(B.m())) * worst;
}

Complex perturb_alignment(Complex omega, double sigma_w, Rng& rng) {
  if (!(sigma_w > 0.0)) throw ParameterError("sigma_w must be positive");
  return omega + rng.complex_normal(1.0 / sigma_w);
}

}  // namespace blaircomp
