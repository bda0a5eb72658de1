#include "blaircomp/wf.hpp"

#include <cmath>
#include <string>

#include "blaircomp/errors.hpp"

namespace blaircomp {

namespace {

void check_shapes(const Iterate& z, const ProblemInstance& inst) {
  const auto& d = inst.dims;
  if (z.s() != d.s || z.x.size() != d.s) throw DimensionError("iterate must have s blocks");
  for (std::size_t i = 0; i < d.s; ++i)
    if (z.h[i].size() != Eigen::Index(d.K) || z.x[i].size() != Eigen::Index(d.N))
      throw DimensionError("iterate block has wrong length");
}

void check_dropped(const ProblemInstance& inst, DroppedSample dropped) {
  if (dropped && *dropped >= inst.dims.m)
    throw IndexError("dropped sample " + std::to_string(*dropped) + " outside [0, m)");
}

// b_ij^H h_i for every j, including the per-node access flips when present.
CVec access_products(const ProblemInstance& inst, std::size_t i, const CVec& h) {
  CVec bh = inst.B.rows * h;
  if (inst.access_flips)
    bh.array() *= inst.access_flips->row(Eigen::Index(i)).transpose().array().conjugate();
  return bh;
}

CVec flip_column(const ProblemInstance& inst, std::size_t i) {
  if (inst.access_flips) return inst.access_flips->row(Eigen::Index(i)).transpose();
  return CVec::Ones(inst.B.m());
}

}  // namespace

Iterate random_init(std::size_t s, std::size_t K, std::size_t N, Rng& rng) {
  if (s < 1 || K < 1 || N < 1) throw DimensionError("init needs positive dims");
  Iterate z;
  for (std::size_t i = 0; i < s; ++i) {
    z.h.push_back(rng.complex_normal_vector(Eigen::Index(K), 1.0 / double(K)));
    z.x.push_back(rng.complex_normal_vector(Eigen::Index(N), 1.0 / double(N)));
  }
  return z;
}

CVec residual(const Iterate& z, const ProblemInstance& inst, DroppedSample dropped) {
  check_shapes(z, inst);
  check_dropped(inst, dropped);
  CVec r = -inst.meas.y;
  for (std::size_t i = 0; i < z.s(); ++i)
    r.array() += access_products(inst, i, z.h[i]).array() *
                 (inst.A.adjoint_rows[i] * z.x[i]).array().conjugate();
  if (dropped) r(Eigen::Index(*dropped)) = 0.0;
  return r;
}

double loss(const Iterate& z, const ProblemInstance& inst, DroppedSample dropped) {
  return residual(z, inst, dropped).squaredNorm();
}

GradientBlocks wirtinger_gradient(const Iterate& z, const ProblemInstance& inst,
                                  DroppedSample dropped) {
  const CVec r = residual(z, inst, dropped);
  GradientBlocks g;
  g.h.reserve(z.s());
  g.x.reserve(z.s());
  for (std::size_t i = 0; i < z.s(); ++i) {
    const CVec ax = inst.A.adjoint_rows[i] * z.x[i];
    const CVec bh = access_products(inst, i, z.h[i]);
    const CVec wh = (flip_column(inst, i).array() * r.array() * ax.array()).matrix();
    const CVec wx = (r.array().conjugate() * bh.array()).matrix();
    g.h.push_back(inst.B.rows.adjoint() * wh);
    g.x.push_back(inst.A.adjoint_rows[i].adjoint() * wx);
  }
  return g;
}

GradientBlocks population_gradient(const Iterate& z, const GroundTruth& truth) {
  if (z.s() != truth.s()) throw DimensionError("iterate and truth disagree on s");
  GradientBlocks g;
  for (std::size_t i = 0; i < z.s(); ++i) {
    if (z.h[i].size() != truth.h[i].size() || z.x[i].size() != truth.x[i].size())
      throw DimensionError("iterate block has wrong length");
    g.h.push_back(z.x[i].squaredNorm() * z.h[i] - truth.x[i].dot(z.x[i]) * truth.h[i]);
    g.x.push_back(z.h[i].squaredNorm() * z.x[i] - truth.h[i].dot(z.h[i]) * truth.x[i]);
  }
  return g;
}

Iterate wf_step(const Iterate& z, const GradientBlocks& g, double eta) {
  if (g.s() != z.s() || g.x.size() != z.x.size())
    throw DimensionError("gradient and iterate disagree on s");
  Iterate next;
  next.t = z.t + 1;
  next.h.reserve(z.s());
  next.x.reserve(z.s());
  for (std::size_t i = 0; i < z.s(); ++i) {
    const double hn2 = z.h[i].squaredNorm();
    const double xn2 = z.x[i].squaredNorm();
    if (hn2 == 0.0 || xn2 == 0.0)
      throw DegenerateError("zero block at node " + std::to_string(i) + " in update step");
    if (g.h[i].size() != z.h[i].size() || g.x[i].size() != z.x[i].size())
      throw DimensionError("gradient block has wrong length");
    next.h.push_back(z.h[i] - (eta / xn2) * g.h[i]);
    next.x.push_back(z.x[i] - (eta / hn2) * g.x[i]);
  }
  return next;
}

CMat wirtinger_hessian_x_block(const Iterate& z, const ProblemInstance& inst, std::size_t i,
                               DroppedSample dropped) {
  check_shapes(z, inst);
  check_dropped(inst, dropped);
  if (i >= inst.dims.s) throw IndexError("node index outside [0, s)");
  RVec w = access_products(inst, i, z.h[i]).cwiseAbs2();
  if (dropped) w(Eigen::Index(*dropped)) = 0.0;
  const CMat& Ai = inst.A.adjoint_rows[i];
  const CMat D = Ai.adjoint() * w.asDiagonal() * Ai;
  const Eigen::Index N = D.rows();
  CMat H = CMat::Zero(2 * N, 2 * N);
  H.topLeftCorner(N, N) = D;
  H.bottomRightCorner(N, N) = D.conjugate();
  return H;
}

CMat wirtinger_hessian_hx_block(const Iterate& z, const ProblemInstance& inst, std::size_t i,
                                DroppedSample dropped) {
  check_shapes(z, inst);
  check_dropped(inst, dropped);
  if (i >= inst.dims.s) throw IndexError("node index outside [0, s)");
  const CMat& Ai = inst.A.adjoint_rows[i];
  CVec w = (flip_column(inst, i).array() * access_products(inst, i, z.h[i]).array() *
            (Ai * z.x[i]).array())
               .matrix();
  if (dropped) w(Eigen::Index(*dropped)) = 0.0;
  return inst.B.rows.adjoint() * w.asDiagonal() * Ai.conjugate();
}

double default_step_size(std::size_t s) { return s <= 10 ? 0.1 : 1.0 / double(s); }

void SolverSettings::validate() const {
  if (!(eta > 0.0)) throw ParameterError("step size must be positive");
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (log_every < 1) throw ParameterError("log_every must be >= 1");
}

StateTrace run_wf(const ProblemInstance& inst, const Iterate& z0, const SolverSettings& settings,
                  std::span<const Observer> observers, DroppedSample dropped) {
  settings.validate();
  check_shapes(z0, inst);

  StateTrace trace;
  Iterate z = z0;
  z.t = 0;
  double f = loss(z, inst, dropped);
  const double f0 = f;

  auto stop_reached = [&](double rel, double fval) {
    return (settings.rel_tol && rel <= *settings.rel_tol) ||
           (settings.loss_tol && fval <= *settings.loss_tol);
  };

  // Returns true when the stopping rule fires at this iteration.
  auto record = [&](bool force_log) {
    const bool logged = force_log || z.t % settings.log_every == 0;
    if (!logged && !settings.rel_tol && !settings.loss_tol) return false;
    const MetricSnapshot snap = measure(z, inst.truth);
    const bool stop = stop_reached(snap.relative_error, f);
    if (logged || stop) {
      trace.records.push_back({z.t, f, snap.relative_error, snap.dist, snap.components});
      if (settings.keep_iterates) trace.iterates.push_back(z);
      for (const auto& obs : observers) obs(z.t, z, f);
    }
    return stop;
  };

  if (record(true)) {
    trace.converged = true;
  } else {
    for (std::size_t step = 0; step < settings.max_iters; ++step) {
      z = wf_step(z, wirtinger_gradient(z, inst, dropped), settings.eta);
      f = loss(z, inst, dropped);
      if (!std::isfinite(f) || (f0 > 0.0 && f > settings.divergence_factor * f0))
        throw DivergenceError(z.t, "loss diverged at iteration " + std::to_string(z.t));
      const bool last = step + 1 == settings.max_iters;
      if (record(last)) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.iterations = z.t;
  trace.final_iterate = std::move(z);
  return trace;
}

}  // namespace blaircomp
