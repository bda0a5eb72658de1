#include <doctest.h>

#include <cmath>
#include <vector>

#include "blaircomp/errors.hpp"
#include "blaircomp/wf.hpp"
#include "oracles.hpp"

using namespace blaircomp;

namespace {

Iterate random_direction(const ProblemInstance& inst, Rng& rng) {
  return random_init(inst.dims.s, inst.dims.K, inst.dims.N, rng);
}

// Gradient by explicit per-node, per-sample loops (no shared residual).
GradientBlocks naive_gradient(const ProblemInstance& inst, const Iterate& z) {
  const auto [s, K, N, m] = inst.dims;
  GradientBlocks g;
  for (std::size_t i = 0; i < s; ++i) {
    CVec gh = CVec::Zero(Eigen::Index(K)), gx = CVec::Zero(Eigen::Index(N));
    for (std::size_t j = 0; j < m; ++j) {
      Complex r = -inst.meas.y(Eigen::Index(j));
      for (std::size_t k = 0; k < s; ++k) {
        const Complex bh = inst.B.rows.row(Eigen::Index(j)) * z.h[k];
        r += bh * z.x[k].dot(oracle::design_vector(inst, k, j));
      }
      const CVec a = oracle::design_vector(inst, i, j);
      const CVec b = inst.B.b(Eigen::Index(j));
      gh += r * a.dot(z.x[i]) * b;
      gx += std::conj(r) * b.dot(z.h[i]) * a;
    }
    g.h.push_back(gh);
    g.x.push_back(gx);
  }
  return g;
}

double max_block_norm(const GradientBlocks& g) {
  double worst = 0.0;
  for (std::size_t i = 0; i < g.s(); ++i) worst = std::max({worst, g.h[i].norm(), g.x[i].norm()});
  return worst;
}

ProblemInstance scalar_instance(std::vector<Complex> b, std::vector<Complex> a, Complex hbar,
                                Complex xbar) {
  ProblemInstance inst;
  const auto m = b.size();
  inst.dims = {1, 1, 1, m};
  inst.B.rows.resize(Eigen::Index(m), 1);
  CMat Ai(Eigen::Index(m), 1);
  for (std::size_t j = 0; j < m; ++j) {
    inst.B.rows(Eigen::Index(j), 0) = std::conj(b[j]);
    Ai(Eigen::Index(j), 0) = std::conj(a[j]);
  }
  inst.A.adjoint_rows = {Ai};
  inst.truth.h = {CVec::Constant(1, hbar)};
  inst.truth.x = {CVec::Constant(1, xbar)};
  inst.truth.q = {1.0};
  inst.meas.y.resize(Eigen::Index(m));
  for (std::size_t j = 0; j < m; ++j) inst.meas.y(Eigen::Index(j)) = std::conj(b[j]) * hbar * std::conj(xbar) * a[j];
  return inst;
}

Iterate scalar_iterate(Complex h, Complex x) {
  Iterate z;
  z.h = {CVec::Constant(1, h)};
  z.x = {CVec::Constant(1, x)};
  return z;
}

}  // namespace

TEST_CASE("random_init: second moments") {
  Rng rng(1);
  double acc = 0.0;
  for (int k = 0; k < 10000; ++k) acc += random_init(1, 8, 5, rng).h[0].squaredNorm();
  CHECK(acc / 10000.0 == doctest::Approx(1.0).epsilon(0.03));

  double hh = 0.0, xx = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const auto z = random_init(1, 1, 1, rng);
    hh += std::norm(z.h[0](0));
    xx += std::norm(z.x[0](0));
  }
  CHECK(hh / 1e5 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(xx / 1e5 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("random_init: deterministic") {
  Rng a(9), b(9);
  const auto za = random_init(3, 4, 5, a);
  const auto zb = random_init(3, 4, 5, b);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(za.h[i] == zb.h[i]);
    CHECK(za.x[i] == zb.x[i]);
  }
}

TEST_CASE("loss: truth, zero iterate and brute force") {
  const auto inst = make_instance({{2, 3, 3, 10}, {}, 0.0, 4});
  Iterate truth{inst.truth.h, inst.truth.x, 0};
  CHECK(loss(truth, inst) <= 1e-20);

  Iterate zero = truth;
  for (auto& h : zero.h) h.setZero();
  for (auto& x : zero.x) x.setZero();
  CHECK(loss(zero, inst) == doctest::Approx(inst.meas.y.squaredNorm()).epsilon(1e-14));

  Rng rng(2);
  for (int k = 0; k < 5; ++k) {
    const auto z = random_direction(inst, rng);
    const double ref = oracle::loss(inst, z);
    CHECK(std::abs(loss(z, inst) - ref) <= 1e-12 * ref);
  }
}

TEST_CASE("loss: per-node gauge invariance") {
  const auto inst = make_instance({{3, 5, 4, 60}, {}, 0.0, 5});
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto z = random_direction(inst, rng);
    Iterate g = z;
    for (std::size_t i = 0; i < z.s(); ++i) {
      Complex w = rng.complex_normal() * 3.0;
      g.h[i] = z.h[i] / std::conj(w);
      g.x[i] = w * z.x[i];
    }
    const double f = loss(z, inst);
    CHECK(std::abs(loss(g, inst) - f) <= 1e-12 * f);
  }
}

TEST_CASE("gradient: vanishes at the truth") {
  const auto inst = make_instance({{2, 6, 6, 120}, {1.0, 0.5}, 0.0, 6});
  Iterate truth{inst.truth.h, inst.truth.x, 0};
  CHECK(max_block_norm(wirtinger_gradient(truth, inst)) <= 1e-14);
}

TEST_CASE("gradient: shared residual matches per-node loops") {
  const auto inst = make_instance({{3, 4, 5, 30}, {}, 0.01, 7});
  Rng rng(4);
  const auto z = random_direction(inst, rng);
  const auto fast = wirtinger_gradient(z, inst);
  const auto slow = naive_gradient(inst, z);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((fast.h[i] - slow.h[i]).norm() <= 1e-12 * slow.h[i].norm());
    CHECK((fast.x[i] - slow.x[i]).norm() <= 1e-12 * slow.x[i].norm());
  }
}

TEST_CASE("gradient: first-order finite differences") {
  // Errors are measured against 2 ||d|| ||grad||, the largest the linear term can be.
  Rng rng(10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = make_instance({{2, 6, 6, 120}, {}, 0.0, seed});
    const auto z = random_direction(inst, rng);
    const auto d = random_direction(inst, rng);
    const auto g = wirtinger_gradient(z, inst);
    const double lin = 2.0 * oracle::re_inner(d, g);
    double gn = 0.0, dn = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      gn += g.h[i].squaredNorm() + g.x[i].squaredNorm();
      dn += d.h[i].squaredNorm() + d.x[i].squaredNorm();
    }
    const double scale = 2.0 * std::sqrt(gn * dn);
    const double f0 = loss(z, inst);
    double err[2];
    int k = 0;
    for (double eps : {1e-4, 1e-5}) {
      const double fd = (loss(oracle::axpy(z, eps, d), inst) - f0) / eps;
      err[k++] = std::abs(fd - lin) / scale;
    }
    CHECK(err[1] <= 1e-5);
    CHECK(err[0] / err[1] >= 8.0);
    CHECK(err[0] / err[1] <= 12.0);

    const double eps = 1e-5;
    const double central =
        (loss(oracle::axpy(z, eps, d), inst) - loss(oracle::axpy(z, -eps, d), inst)) / (2.0 * eps);
    CHECK(std::abs(central - lin) <= 1e-8 * std::abs(lin));
  }
}

TEST_CASE("gradient: scalar hand case") {
  const std::vector<Complex> b{{0.6, 0.8}, {1.0, -0.5}};
  const std::vector<Complex> a{{2.0, 1.0}, {-0.3, 0.7}};
  const auto inst = scalar_instance(b, a, {1.0, 0.2}, {0.5, -1.0});
  const Complex h{0.3, -0.4}, x{1.2, 0.1};
  Complex gh = 0.0, gx = 0.0;
  for (int j = 0; j < 2; ++j) {
    const Complex r = std::conj(b[j]) * h * std::conj(x) * a[j] - inst.meas.y(j);
    gh += r * b[j] * x * std::conj(a[j]);
    gx += std::conj(r) * std::conj(b[j]) * h * a[j];
  }
  const auto g = wirtinger_gradient(scalar_iterate(h, x), inst);
  CHECK(std::abs(g.h[0](0) - gh) <= 1e-14);
  CHECK(std::abs(g.x[0](0) - gx) <= 1e-14);
}

TEST_CASE("population gradient: closed-form cases") {
  const auto inst = make_instance({{2, 4, 3, 20}, {1.0, 0.4}, 0.0, 8});
  Iterate truth{inst.truth.h, inst.truth.x, 0};
  CHECK(max_block_norm(population_gradient(truth, inst.truth)) <= 1e-15);
  Rng rng(1);
  auto z = random_direction(inst, rng);
  z.x[0].setZero();
  CHECK(population_gradient(z, inst.truth).h[0].norm() == 0.0);
}

TEST_CASE("population gradient: Monte-Carlo average over design draws") {
  const std::size_t s = 2, K = 4, N = 4, m = 40;
  const auto base = make_instance({{s, K, N, m}, {1.0, 0.7}, 0.0, 21});
  Rng rng(22);
  const auto z = random_direction(base, rng);
  GradientBlocks mean;
  for (std::size_t i = 0; i < s; ++i) {
    mean.h.push_back(CVec::Zero(Eigen::Index(K)));
    mean.x.push_back(CVec::Zero(Eigen::Index(N)));
  }
  const int draws = 2000;
  for (int k = 0; k < draws; ++k) {
    ProblemInstance inst = base;
    inst.A = sample_design_tensor(s, m, N, rng);
    inst.meas = synthesize_measurements(inst.B, inst.A, inst.truth, 0.0, rng);
    const auto g = wirtinger_gradient(z, inst);
    for (std::size_t i = 0; i < s; ++i) {
      mean.h[i] += g.h[i] / double(draws);
      mean.x[i] += g.x[i] / double(draws);
    }
  }
  const auto pop = population_gradient(z, base.truth);
  for (std::size_t i = 0; i < s; ++i) {
    CHECK((mean.h[i] - pop.h[i]).norm() <= 0.05 * pop.h[i].norm());
    CHECK((mean.x[i] - pop.x[i]).norm() <= 0.05 * pop.x[i].norm());
  }
}

TEST_CASE("wf_step: trivial and hand-evaluated updates") {
  const auto inst = make_instance({{2, 3, 3, 30}, {}, 0.0, 3});
  Rng rng(5);
  const auto z = random_direction(inst, rng);
  const auto g = wirtinger_gradient(z, inst);
  GradientBlocks zero = g;
  for (auto& v : zero.h) v.setZero();
  for (auto& v : zero.x) v.setZero();
  const auto same = wf_step(z, zero, 0.1);
  const auto frozen = wf_step(z, g, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(same.h[i] == z.h[i]);
    CHECK(same.x[i] == z.x[i]);
    CHECK(frozen.h[i] == z.h[i]);
    CHECK(frozen.x[i] == z.x[i]);
  }
  CHECK(same.t == z.t + 1);

  // scalar: h' = h - eta g_h / |x|^2, x' = x - eta g_x / |h|^2
  const Complex h{2.0, 0.0}, x{0.0, 0.5};
  GradientBlocks gs{{CVec::Constant(1, Complex(1.0, 1.0))}, {CVec::Constant(1, Complex(-2.0, 0.5))}};
  const auto next = wf_step(scalar_iterate(h, x), gs, 0.1);
  CHECK(std::abs(next.h[0](0) - (h - 0.1 / 0.25 * Complex(1.0, 1.0))) <= 1e-15);
  CHECK(std::abs(next.x[0](0) - (x - 0.1 / 4.0 * Complex(-2.0, 0.5))) <= 1e-15);
}

TEST_CASE("wf_step: zero block is rejected") {
  const auto inst = make_instance({{1, 3, 3, 30}, {}, 0.0, 3});
  Rng rng(5);
  auto z = random_direction(inst, rng);
  const auto g = wirtinger_gradient(z, inst);
  z.h[0].setZero();
  CHECK_THROWS_AS(wf_step(z, g, 0.1), DegenerateError);
}

TEST_CASE("run_wf: single node reaches 1e-6 within 500 iterations") {
  SolverSettings st;
  st.eta = 0.1;
  st.max_iters = 500;
  st.rel_tol = 1e-6;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_instance({{1, 8, 8, 400}, {}, 0.0, seed});
    Rng rng(mix_seed(seed, 99));
    const auto tr = run_wf(inst, random_direction(inst, rng), st);
    ok += tr.converged && tr.records.back().relative_error <= 1e-6;
  }
  CHECK(ok >= 18);
}

TEST_CASE("run_wf: disabled tolerance runs the full budget") {
  const auto inst = make_instance({{2, 4, 4, 100}, {}, 0.0, 1});
  Rng rng(1);
  SolverSettings st;
  st.max_iters = 37;
  st.log_every = 10;
  const auto tr = run_wf(inst, random_direction(inst, rng), st);
  CHECK(tr.iterations == 37);
  CHECK_FALSE(tr.converged);
  REQUIRE(tr.records.size() == 5);
  CHECK(tr.records.back().t == 37);
  CHECK(tr.records[1].t == 10);
}

TEST_CASE("run_wf: bit-identical on replay") {
  const auto inst = make_instance({{2, 5, 5, 100}, {}, 0.0, 2});
  Rng a(3), b(3);
  SolverSettings st;
  st.max_iters = 60;
  const auto ta = run_wf(inst, random_direction(inst, a), st);
  const auto tb = run_wf(inst, random_direction(inst, b), st);
  REQUIRE(ta.records.size() == tb.records.size());
  for (std::size_t k = 0; k < ta.records.size(); ++k) {
    CHECK(ta.records[k].loss == tb.records[k].loss);
    CHECK(ta.records[k].relative_error == tb.records[k].relative_error);
  }
  CHECK(ta.final_iterate.h[1] == tb.final_iterate.h[1]);
}

TEST_CASE("run_wf: observers see every logged iterate") {
  const auto inst = make_instance({{1, 4, 4, 80}, {}, 0.0, 2});
  Rng rng(3);
  std::vector<std::size_t> seen;
  const Observer obs = [&](std::size_t t, const Iterate& z, double f) {
    seen.push_back(t);
    CHECK(f == doctest::Approx(loss(z, inst)));
  };
  SolverSettings st;
  st.max_iters = 20;
  st.log_every = 5;
  run_wf(inst, random_direction(inst, rng), st, std::span<const Observer>(&obs, 1));
  CHECK(seen == std::vector<std::size_t>{0, 5, 10, 15, 20});
}

TEST_CASE("run_wf: divergence is detected") {
  const auto inst = make_instance({{2, 4, 4, 100}, {}, 0.0, 1});
  Rng rng(1);
  SolverSettings st;
  st.eta = 50.0;
  st.max_iters = 200;
  CHECK_THROWS_AS(run_wf(inst, random_direction(inst, rng), st), DivergenceError);
}

TEST_CASE("step size default") {
  CHECK(default_step_size(1) == 0.1);
  CHECK(default_step_size(10) == 0.1);
  CHECK(default_step_size(20) == doctest::Approx(0.05));
}

TEST_CASE("hessian: x block vanishes with h") {
  const auto inst = make_instance({{2, 4, 3, 30}, {}, 0.0, 1});
  Rng rng(2);
  auto z = random_direction(inst, rng);
  z.h[1].setZero();
  CHECK(wirtinger_hessian_x_block(z, inst, 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(wirtinger_hessian_hx_block(z, inst, 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hessian: x block second differences") {
  const auto inst = make_instance({{2, 4, 5, 60}, {}, 0.0, 3});
  Rng rng(4);
  const auto z = random_direction(inst, rng);
  const double eps = 1e-4;
  for (std::size_t i = 0; i < 2; ++i) {
    const CVec d = rng.complex_normal_vector(5);
    Iterate dir = z;
    for (auto& v : dir.h) v.setZero();
    for (auto& v : dir.x) v.setZero();
    dir.x[i] = d;
    const double second = loss(oracle::axpy(z, eps, dir), inst) + loss(oracle::axpy(z, -eps, dir), inst) -
                          2.0 * loss(z, inst);
    CVec v(10);
    v << d, d.conjugate();
    const double quad = std::real(v.dot(wirtinger_hessian_x_block(z, inst, i) * v));
    CHECK(second / (eps * eps) == doctest::Approx(quad).epsilon(1e-4));
  }
}

TEST_CASE("hessian: scalar data hand case") {
  const std::vector<Complex> b{{0.6, 0.8}, {1.0, -0.5}};
  const std::vector<Complex> a{{2.0, 1.0}, {-0.3, 0.7}};
  const auto inst = scalar_instance(b, a, 1.0, 1.0);
  const Complex h{0.3, -0.4};
  const auto H = wirtinger_hessian_x_block(scalar_iterate(h, 1.0), inst, 0);
  double D = 0.0;
  for (int j = 0; j < 2; ++j) D += std::norm(std::conj(b[j]) * h) * std::norm(a[j]);
  CHECK(std::abs(H(0, 0) - D) <= 1e-14);
  CHECK(std::abs(H(0, 1)) == 0.0);
  CHECK(std::abs(H(1, 1) - D) <= 1e-14);
}

TEST_CASE("hessian: mixed h/x block against gradient differences") {
  const auto inst = make_instance({{2, 4, 5, 60}, {}, 0.0, 5});
  Rng rng(6);
  const auto z = random_direction(inst, rng);
  const double eps = 1e-5;
  const std::size_t i = 1;
  const CVec d = rng.complex_normal_vector(5);
  auto grad_h_along = [&](Complex scale) {
    Iterate plus = z, minus = z;
    plus.x[i] += eps * scale * d;
    minus.x[i] -= eps * scale * d;
    return CVec((wirtinger_gradient(plus, inst).h[i] - wirtinger_gradient(minus, inst).h[i]) / (2.0 * eps));
  };
  const CVec d1 = grad_h_along(1.0);
  const CVec d2 = grad_h_along(Complex(0.0, 1.0));
  const CVec expect = (d1 + Complex(0.0, 1.0) * d2) / 2.0;
  const CVec got = wirtinger_hessian_hx_block(z, inst, i) * d.conjugate();
  CHECK((got - expect).norm() <= 1e-6 * got.norm());
}

TEST_CASE("dropped sample bounds are checked") {
  const auto inst = make_instance({{1, 3, 3, 10}, {}, 0.0, 1});
  Rng rng(1);
  const auto z = random_direction(inst, rng);
  CHECK_THROWS_AS(loss(z, inst, 10), IndexError);
  CHECK(loss(z, inst, 3) == doctest::Approx(oracle::loss(inst, z, 3)).epsilon(1e-12));
}
