#include "blaircomp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "blaircomp/errors.hpp"

namespace blaircomp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

CVec rescaled(const CVec& v, double norm) {
  const double n = v.norm();
  if (n == 0.0) throw DegenerateError("cannot normalize a zero ground-truth draw");
  return v * (norm / n);
}

}  // namespace

void ProblemInstance::validate() const {
  const auto [s, K, N, m] = dims;
  require(s >= 1 && K >= 1 && N >= 1 && m >= 1, "all dimensions must be positive");
  require(B.m() == Eigen::Index(m) && B.K() == Eigen::Index(K), "access matrix must be m x K");
  require(A.s() == s, "design tensor must have s nodes");
  for (const auto& Ai : A.adjoint_rows)
    require(Ai.rows() == Eigen::Index(m) && Ai.cols() == Eigen::Index(N),
            "each design block must be m x N");
  require(truth.h.size() == s && truth.x.size() == s && truth.q.size() == s,
          "ground truth must have s nodes");
  for (std::size_t i = 0; i < s; ++i)
    require(truth.h[i].size() == Eigen::Index(K) && truth.x[i].size() == Eigen::Index(N),
            "ground-truth block has wrong length");
  require(meas.y.size() == Eigen::Index(m), "measurement vector must have length m");
  if (access_flips)
    require(access_flips->rows() == Eigen::Index(s) && access_flips->cols() == Eigen::Index(m),
            "access flips must be s x m");
}

DesignMatrixB generate_partial_dft(std::size_t m, std::size_t K) {
  if (K < 1 || m < 1) throw DimensionError("partial DFT needs m >= 1 and K >= 1");
  if (K > m) throw DimensionError("partial DFT needs K <= m");
  DesignMatrixB B;
  B.rows.resize(Eigen::Index(m), Eigen::Index(K));
  const double scale = 1.0 / std::sqrt(double(m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      // Reduce j*k mod m first so the phase stays exact for large indices.
      const double phase = -2.0 * std::numbers::pi * double((j * k) % m) / double(m);
      B.rows(Eigen::Index(j), Eigen::Index(k)) = std::polar(scale, phase);
    }
  }
  return B;
}

GroundTruth sample_ground_truth(std::size_t s, std::size_t K, std::size_t N,
                                std::span<const double> q, Rng& rng) {
  if (s < 1 || K < 1 || N < 1) throw DimensionError("ground truth needs positive dims");
  if (q.size() != s) throw DimensionError("need one norm q_i per node");
  for (double qi : q)
    if (!(qi > 0.0 && qi <= 1.0)) throw ParameterError("norms q_i must lie in (0, 1]");

  GroundTruth truth;
  truth.q.assign(q.begin(), q.end());
  for (std::size_t i = 0; i < s; ++i) {
    truth.h.push_back(rescaled(rng.complex_normal_vector(Eigen::Index(K), 1.0 / double(K)), q[i]));
    truth.x.push_back(rescaled(rng.complex_normal_vector(Eigen::Index(N), 1.0 / double(N)), q[i]));
  }
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  truth.kappa = *hi / *lo;
  return truth;
}

DesignTensorA sample_design_tensor(std::size_t s, std::size_t m, std::size_t N, Rng& rng) {
  if (s < 1 || m < 1 || N < 1) throw DimensionError("design tensor needs positive dims");
  DesignTensorA A;
  A.adjoint_rows.reserve(s);
  for (std::size_t i = 0; i < s; ++i) {
    CMat rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(N));
    // Draw a_ij entry by entry, store its conjugate as row j.
    for (Eigen::Index j = 0; j < rows.rows(); ++j)
      for (Eigen::Index n = 0; n < rows.cols(); ++n) rows(j, n) = std::conj(rng.complex_normal());
    A.adjoint_rows.push_back(std::move(rows));
  }
  return A;
}

CVec bilinear_forward(const DesignMatrixB& B, const DesignTensorA& A,
                      std::span<const CVec> h, std::span<const CVec> x,
                      const std::optional<CMat>& access_flips) {
  if (h.size() != A.s() || x.size() != A.s()) throw DimensionError("block count must equal s");
  if (A.m() != B.m()) throw DimensionError("design tensor and access matrix disagree on m");
  CVec out = CVec::Zero(B.m());
  for (std::size_t i = 0; i < A.s(); ++i) {
    if (h[i].size() != B.K() || x[i].size() != A.N())
      throw DimensionError("block length does not match the design");
    CVec bh = B.rows * h[i];
    if (access_flips) bh.array() *= access_flips->row(Eigen::Index(i)).transpose().array().conjugate();
    out.array() += bh.array() * (A.adjoint_rows[i] * x[i]).array().conjugate();
  }
  return out;
}

Measurements synthesize_measurements(const DesignMatrixB& B, const DesignTensorA& A,
                                     const GroundTruth& truth, double noise_variance, Rng& rng) {
  if (!(noise_variance >= 0.0)) throw ParameterError("noise variance must be >= 0");
  if (truth.s() != A.s()) throw DimensionError("ground truth and design disagree on s");
  Measurements meas;
  meas.noise_variance = noise_variance;
  meas.y = bilinear_forward(B, A, truth.h, truth.x);
  if (noise_variance > 0.0)
    for (Eigen::Index j = 0; j < meas.y.size(); ++j) meas.y(j) += rng.complex_normal(noise_variance);
  return meas;
}

NomographicMaps NomographicMaps::arithmetic_mean(std::size_t s) {
  NomographicMaps maps;
  const double inv = 1.0 / double(s);
  maps.post = [inv](Complex v) { return v * inv; };
  return maps;
}

CVec compute_nomographic_target(const GroundTruth& truth, const NomographicMaps& maps) {
  if (truth.s() == 0) return {};
  const Eigen::Index N = truth.x.front().size();
  CVec theta(N);
  for (Eigen::Index l = 0; l < N; ++l) {
    Complex acc = 0.0;
    for (const auto& xi : truth.x) acc += maps.pre(xi(l));
    theta(l) = maps.post(acc);
  }
  return theta;
}

ProblemInstance make_instance(const InstanceSpec& spec) {
  const auto& d = spec.dims;
  if (d.s < 1 || d.K < 1 || d.N < 1 || d.m < 1) throw DimensionError("all dimensions must be positive");
  std::vector<double> q = spec.q;
  if (q.empty()) q.assign(d.s, 1.0);

  Rng root(spec.seed);
  Rng truth_rng = root.derive(0);
  Rng design_rng = root.derive(1);
  Rng noise_rng = root.derive(2);

  ProblemInstance inst;
  inst.dims = d;
  inst.seed = spec.seed;
  inst.B = generate_partial_dft(d.m, d.K);
  inst.truth = sample_ground_truth(d.s, d.K, d.N, q, truth_rng);
  inst.A = sample_design_tensor(d.s, d.m, d.N, design_rng);
  inst.meas = synthesize_measurements(inst.B, inst.A, inst.truth, spec.noise_variance, noise_rng);
  return inst;
}

}  // namespace blaircomp
