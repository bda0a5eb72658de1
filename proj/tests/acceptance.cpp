// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "blaircomp/diagnostics.hpp"
#include "blaircomp/experiment.hpp"
#include "blaircomp/metrics.hpp"
#include "blaircomp/state_evolution.hpp"
#include "blaircomp/wf.hpp"
#include "grid_oracle.hpp"
#include "oracles.hpp"

using namespace blaircomp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Iterate random_direction(const ProblemInstance& inst, Rng& rng) {
  Iterate d;
  for (std::size_t i = 0; i < inst.dims.s; ++i) {
    d.h.push_back(rng.complex_normal_vector(Eigen::Index(inst.dims.K)));
    d.x.push_back(rng.complex_normal_vector(Eigen::Index(inst.dims.N)));
  }
  return d;
}

// 1. forward differences against the Wirtinger gradient
Outcome gradient_check() {
  Rng rng(2024);
  int ok = 0;
  double worst = 0.0, worst_plain = 0.0, rmin = INFINITY, rmax = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
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
      err[k++] = std::abs(fd - lin);
    }
    const double rel = err[1] / scale, ratio = err[0] / err[1];
    worst = std::max(worst, rel);
    worst_plain = std::max(worst_plain, err[1] / std::abs(lin));
    rmin = std::min(rmin, ratio);
    rmax = std::max(rmax, ratio);
    ok += rel <= 1e-5 && ratio >= 8.0 && ratio <= 12.0;
  }
  return {ok == 50, format("%d/50 triples; max rel err %.2e (vs 2|d||grad|), max err/|2Re<d,grad>| %.2e; "
                           "ratio range [%.2f, %.2f]",
                           ok, worst, worst_plain, rmin, rmax)};
}

ExperimentConfig desk_config() {
  return parse_config({{"preset", "fig1-convergence"}, {"s", "2"}, {"K", "8"}, {"N", "8"}, {"m", "400"},
                       {"eta", "0.1"}, {"noise_var", "0"}, {"trials", "20"}, {"seed", "1"},
                       {"max_iters", "500"}, {"tol", "1e-6"}});
}

// 2. two-stage convergence
Outcome two_stage(const ExperimentResult& res) {
  int conv = 0, ordered = 0;
  for (const auto& tr : res.trials) {
    const auto& s = tr.summary;
    if (s.diverged || !s.converged || s.final_relative_error > 1e-6) continue;
    ++conv;
    const auto& st = s.stages;
    ordered += st.t1 && st.t2 && st.t_gamma && *st.t1 <= *st.t2 && *st.t2 <= *st.t_gamma;
  }
  std::size_t max_iter = 0;
  for (const auto& tr : res.trials) max_iter = std::max(max_iter, tr.summary.iterations);
  return {conv >= 18 && ordered == conv,
          format("%d/20 converged to 1e-6 (max %zu iterations); stage order holds in %d/%d",
                 conv, max_iter, ordered, conv)};
}

// 3. linear rate after T_gamma
Outcome stage_two_rate(const ExperimentResult& res, double eta, double kappa) {
  const double rate = 1.0 - eta / (16.0 * kappa);
  int violations = 0, checked = 0;
  double worst = 0.0;
  for (const auto& tr : res.trials) {
    const auto& s = tr.summary;
    if (s.diverged || !s.converged || !s.stages.t_gamma) continue;
    const auto& recs = tr.trace.records;
    for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
      if (recs[k].t < *s.stages.t_gamma || recs[k + 1].t != recs[k].t + 1) continue;
      const double q = recs[k + 1].relative_error / recs[k].relative_error;
      worst = std::max(worst, q);
      ++checked;
      violations += q > rate;
    }
  }
  return {violations == 0 && checked > 0,
          format("%d violations over %d steps; worst per-step ratio %.5f vs bound %.5f", violations,
                 checked, worst, rate)};
}

// 4. ratio growth over [0, T_gamma]
Outcome ratio_growth(const ExperimentResult& res, double eta) {
  const double level = std::log(1.0 + 0.05 * eta);
  int good = 0, total = 0;
  double lowest = INFINITY;
  for (const auto& tr : res.trials) {
    const auto& st = tr.summary.stages;
    if (tr.summary.diverged) continue;
    ++total;
    bool all = true;
    for (const auto* series : {&st.growth_h, &st.growth_x})
      for (const auto& v : *series) {
        all = all && v && *v >= level;
        if (v) lowest = std::min(lowest, *v);
      }
    good += all;
  }
  return {total > 0 && good * 10 >= total * 9,
          format("%d/%d runs with every slope >= %.5f; lowest slope %.4f", good, total, level, lowest)};
}

std::string error_vs_dist(const ExperimentResult& res) {
  int above = 0, n = 0;
  for (const auto& tr : res.trials)
    for (const auto& r : tr.trace.records) {
      ++n;
      above += r.relative_error > r.dist;
    }
  return format("info: relative_error > dist on %d/%d logged iterations", above, n);
}

// 5. population recursion
Outcome population() {
  SEState st;
  st.eta = 0.1;
  st.nodes = {{0.3, 0.9, 0.2, 1.1, 1.0}, {0.05, 0.7, 0.1, 0.4, 0.6}, {0.8, 0.2, 0.5, 0.5, 0.3}};
  const auto start = st;
  double worst = 0.0;
  for (int t = 1; t <= 100; ++t) {
    st = population_se_step(st);
    const double f = std::pow(1.0 - st.eta, t);
    for (std::size_t i = 0; i < st.nodes.size(); ++i) {
      worst = std::max(worst, std::abs(st.nodes[i].beta_h - f * start.nodes[i].beta_h) / (f * start.nodes[i].beta_h));
      worst = std::max(worst, std::abs(st.nodes[i].beta_x - f * start.nodes[i].beta_x) / (f * start.nodes[i].beta_x));
    }
  }
  SEState fixed;
  fixed.eta = 0.1;
  fixed.nodes = {{1.0, 0.0, 1.0, 0.0, 1.0}, {0.4, 0.0, 0.4, 0.0, 0.4}};
  double drift = 0.0;
  const auto next = population_se_step(fixed);
  for (std::size_t i = 0; i < 2; ++i)
    drift = std::max({drift, std::abs(next.nodes[i].alpha_h - fixed.nodes[i].alpha_h),
                      std::abs(next.nodes[i].alpha_x - fixed.nodes[i].alpha_x),
                      std::abs(next.nodes[i].beta_h), std::abs(next.nodes[i].beta_x)});
  return {worst <= 1e-13 && drift <= 1e-14,
          format("max relative beta deviation over 100 steps %.2e; fixed-point drift %.2e", worst, drift)};
}

// 6. alignment against brute force
Outcome alignment() {
  Rng rng(6);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index K = 1 + k % 6, N = 1 + (k / 6) % 5;
    const double sx = std::exp(4.0 * rng.uniform() - 2.0);
    const CVec hA = rng.complex_normal_vector(K), xA = rng.complex_normal_vector(N, sx * sx);
    const CVec hB = rng.complex_normal_vector(K), xB = rng.complex_normal_vector(N);
    const double grid = oracle::grid_alignment_cost(hA, xA, hB, xB, 1000);
    worst = std::max(worst, std::abs(align_pair(hA, xA, hB, xB).cost - grid));
  }
  return {worst <= 1e-6, format("max |cost - grid| over 100 pairs %.2e", worst)};
}

// 7. sign-flip measurement identity
Outcome measurement_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto can = canonicalize(make_instance({{3, 8, 8, 200}, {1.0, 0.7, 0.4}, 0.0, seed}));
    Rng rng(mix_seed(seed, 77));
    worst = std::max(worst, max_measurement_gap(can, sign_flip_ensemble(can, rng).instance));
  }
  return {worst <= 1e-12, format("max measurement gap over 10 instances %.2e", worst)};
}

// 8. noise sweep
Outcome noise_sweep() {
  const auto cfg = parse_config({{"preset", "noise-sweep"}, {"trials", "5"}, {"seed", "8"}});
  const auto res = run_experiment(cfg);
  if (!res.sweep || !res.sweep->slope) return {false, "no slope"};
  std::string levels;
  for (const auto& l : res.sweep->levels) levels += format(" %.1f", l.mean_error_db);
  const double s = *res.sweep->slope;
  return {!res.any_diverged && s >= -1.2 && s <= -0.8,
          format("K=%zu m=%zu s=%zu slope %.4f; error dB per level:%s", cfg.K, cfg.measurements(), cfg.s, s,
                 levels.c_str())};
}

// 9. design concentration
Outcome concentration() {
  int first = 0, norm = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    ProblemInstance inst;
    inst.dims = {1, 1, 16, 10000};
    inst.B = generate_partial_dft(10000, 1);
    inst.A = sample_design_tensor(1, 10000, 16, rng);
    inst.truth = {{CVec::Ones(1)}, {CVec::Ones(16) / 4.0}, {1.0}, 1.0};
    inst.meas.y = CVec::Zero(10000);
    const auto rep = concentration_report(inst);
    first += rep.first_entry_ok;
    norm += rep.norm_ok;
  }
  return {first >= 99 && norm >= 99,
          format("first-entry bound in %d/100 seeds, norm bound in %d/100 seeds", first, norm)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. byte-identical artifacts
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("blaircomp_acceptance_" + std::to_string(::getpid()));
  std::vector<RawConfig> runs = {
      {{"preset", "fig1-convergence"}, {"s", "2"}, {"K", "8"}, {"max_iters", "200"}, {"trials", "4"}},
      {{"preset", "components"}, {"K", "6"}, {"max_iters", "100"}, {"trials", "3"}},
      {{"preset", "ratio-growth"}, {"K", "6"}, {"max_iters", "100"}, {"trials", "3"}},
      {{"preset", "noise-sweep"}, {"max_iters", "100"}, {"trials", "3"}},
      {{"preset", "diagnostics"}, {"max_iters", "60"}, {"loo_samples", "3"}, {"trials", "2"}},
  };
  int files = 0, same = 0;
  std::string bad;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    runs[k]["seed"] = "11";
    std::vector<fs::path> dirs;
    for (std::size_t rep = 0; rep < 2; ++rep) {
      auto cfg = parse_config(runs[k]);
      cfg.jobs = rep == 0 ? 1 : 4;
      cfg.out = root / (std::to_string(k) + "_" + std::to_string(rep));
      fs::create_directories(cfg.out);
      run_experiment(cfg);
      dirs.push_back(cfg.out);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      if (slurp(e.path()) == slurp(dirs[1] / e.path().filename()))
        ++same;
      else
        bad += " " + runs[k]["preset"] + "/" + e.path().filename().string();
    }
  }
  fs::remove_all(root);
  return {files > 0 && same == files,
          format("%d/%d CSV files identical across 1-job and 4-job reruns of 5 presets%s", same, files,
                 bad.c_str())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = fn();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s) [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", id, name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient correctness", gradient_check);

  const auto cfg = desk_config();
  const auto t0 = std::chrono::steady_clock::now();
  const auto desk = run_experiment(cfg);
  const double desk_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("info: desk run K=N=%zu s=%zu m=%zu, 20 seeds, %.1fs\n", cfg.K, cfg.s, cfg.measurements(),
              desk_secs);
  report(2, "two-stage convergence", [&] { return two_stage(desk); });
  report(3, "stage-II linear rate", [&] { return stage_two_rate(desk, cfg.eta, 1.0); });
  report(4, "ratio growth", [&] { return ratio_growth(desk, cfg.eta); });
  std::printf("%s\n", error_vs_dist(desk).c_str());

  report(5, "population state evolution", population);
  report(6, "alignment oracle", alignment);
  report(7, "measurement identity", measurement_identity);
  report(8, "noise sweep", noise_sweep);
  report(9, "concentration", concentration);
  report(10, "determinism", determinism);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
