#include "blaircomp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "blaircomp/errors.hpp"
#include "blaircomp/metrics.hpp"

namespace blaircomp {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

nlohmann::json opt_json(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt_json(const std::vector<std::optional<double>>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& e : v) arr.push_back(e ? nlohmann::json(*e) : nlohmann::json(nullptr));
  return arr;
}

nlohmann::json stages_json(const StageReport& r) {
  return {{"t_gamma", opt_json(r.t_gamma)},
          {"t1", opt_json(r.t1)},
          {"t2", opt_json(r.t2)},
          {"gamma", r.thresholds.gamma},
          {"t1_threshold", r.thresholds.t1},
          {"t2_threshold", r.thresholds.t2},
          {"growth_h", opt_json(r.growth_h)},
          {"growth_x", opt_json(r.growth_x)}};
}

std::ofstream open_artifact(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

NoiseSweepSummary summarize_noise_sweep(std::span<const NoiseSweepPoint> points) {
  std::map<std::size_t, std::size_t> last_t;
  for (const auto& p : points) last_t[p.trial] = std::max(last_t[p.trial], p.t);
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& p : points) {
    if (2 * p.t < last_t[p.trial] || !(p.error > 0.0)) continue;
    auto& [sum, n] = acc[p.sigma_w];
    sum += 20.0 * std::log10(p.error);
    ++n;
  }
  NoiseSweepSummary out;
  std::vector<double> xs, ys;
  for (const auto& [w, sn] : acc) {
    const NoiseSweepLevel lvl{w, 10.0 * std::log10(w), sn.first / double(sn.second)};
    out.levels.push_back(lvl);
    xs.push_back(lvl.sigma_w_db);
    ys.push_back(lvl.mean_error_db);
  }
  out.slope = fit_slope(xs, ys);
  return out;
}

TrialOutput run_trial(const ExperimentConfig& cfg, std::size_t trial) {
  TrialOutput out;
  auto& sum = out.summary;
  sum.trial = trial;
  sum.seed = mix_seed(cfg.seed, trial);
  const ProblemInstance inst = make_instance(cfg.instance_spec(sum.seed));
  const Rng root(sum.seed);
  Rng init_rng = root.derive(10);
  const Iterate z0 = random_init(cfg.s, cfg.K, cfg.N, init_rng);
  const auto settings = cfg.solver_settings();

  try {
    if (cfg.preset == Preset::Diagnostics) {
      Rng diag_rng = root.derive(12);
      DiagnosticsOptions opts;
      opts.loo_samples = cfg.loo_samples;
      opts.thresholds = cfg.thresholds;
      auto res = run_diagnostics(inst, z0, settings, opts, diag_rng);
      out.trace = std::move(res.base);
      out.trace.iterates.clear();
      out.hypotheses = std::move(res.hypotheses);
      out.concentration = std::move(res.concentration);
    } else if (!cfg.sigma_w.empty()) {
      std::vector<Rng> level_rngs;
      for (std::size_t k = 0; k < cfg.sigma_w.size(); ++k) level_rngs.push_back(root.derive(100 + k));
      const Observer obs = [&](std::size_t t, const Iterate& z, double) {
        const auto omegas = alignment_parameters(z, inst.truth);
        for (std::size_t k = 0; k < cfg.sigma_w.size(); ++k) {
          std::vector<Complex> noisy;
          for (auto w : omegas) noisy.push_back(perturb_alignment(w, cfg.sigma_w[k], level_rngs[k]));
          out.sweep.push_back({trial, cfg.sigma_w[k], t, relative_error_with(z, inst.truth, noisy)});
        }
      };
      out.trace = run_wf(inst, z0, settings, std::span<const Observer>(&obs, 1));
    } else {
      out.trace = run_wf(inst, z0, settings);
    }
  } catch (const std::exception& e) {
    sum.diverged = true;
    sum.error = e.what();
    return out;
  }

  sum.iterations = out.trace.iterations;
  sum.converged = out.trace.converged;
  if (!out.trace.records.empty()) {
    sum.final_relative_error = out.trace.records.back().relative_error;
    sum.final_loss = out.trace.records.back().loss;
  }
  sum.stages = detect_stages(out.trace, inst.truth.q, inst.dims.m, cfg.thresholds);
  return out;
}

std::size_t resolve_jobs(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BLAIRCOMP_JOBS")) {
    std::size_t v = 0;
    const std::string_view sv(env);
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec == std::errc() && ptr == sv.data() + sv.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::string> trace_columns(std::size_t s) {
  std::vector<std::string> cols{"trial", "t", "loss", "relative_error", "dist"};
  for (std::size_t i = 0; i < s; ++i)
    for (const char* name : {"abs_alpha_h_", "beta_h_", "abs_alpha_x_", "beta_x_", "rmse_x_"})
      cols.push_back(name + std::to_string(i));
  return cols;
}

namespace {

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
}

void write_trace_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                     const std::vector<TrialOutput>& trials) {
  auto out = open_artifact(path);
  write_header(out, trace_columns(cfg.s));
  for (const auto& tr : trials)
    for (const auto& r : tr.trace.records) {
      out << tr.summary.trial << ',' << r.t << ',' << fmt(r.loss) << ',' << fmt(r.relative_error)
          << ',' << fmt(r.dist);
      for (const auto& c : r.components)
        out << ',' << fmt(std::abs(c.alpha_h)) << ',' << fmt(c.beta_h) << ','
            << fmt(std::abs(c.alpha_x)) << ',' << fmt(c.beta_x) << ',' << fmt(c.rmse_x);
      out << '\n';
    }
}

void write_noise_csv(const std::filesystem::path& points_path,
                     const std::filesystem::path& levels_path,
                     const std::vector<TrialOutput>& trials, const NoiseSweepSummary& summary) {
  auto out = open_artifact(points_path);
  write_header(out, {"trial", "sigma_w", "t", "error"});
  for (const auto& tr : trials)
    for (const auto& p : tr.sweep)
      out << p.trial << ',' << fmt(p.sigma_w) << ',' << p.t << ',' << fmt(p.error) << '\n';
  auto lv = open_artifact(levels_path);
  write_header(lv, {"sigma_w", "sigma_w_db", "mean_error_db"});
  for (const auto& l : summary.levels)
    lv << fmt(l.sigma_w) << ',' << fmt(l.sigma_w_db) << ',' << fmt(l.mean_error_db) << '\n';
}

void write_diagnostics_csv(const std::filesystem::path& hyp_path,
                           const std::filesystem::path& conc_path,
                           const std::vector<TrialOutput>& trials) {
  auto out = open_artifact(hyp_path);
  write_header(out, {"trial", "t", "node", "quantity", "value", "scale"});
  for (const auto& tr : trials) {
    if (!tr.hypotheses) continue;
    for (const auto& r : tr.hypotheses->rows)
      out << tr.summary.trial << ',' << r.t << ',' << r.node << ',' << to_string(r.quantity) << ','
          << fmt(r.value) << ',' << fmt(r.scale) << '\n';
  }
  auto cc = open_artifact(conc_path);
  write_header(cc, {"trial", "node", "max_first_entry", "first_entry_bound", "max_norm",
                    "norm_bound", "mu"});
  for (const auto& tr : trials) {
    if (!tr.concentration) continue;
    const auto& c = *tr.concentration;
    for (std::size_t i = 0; i < c.nodes.size(); ++i)
      cc << tr.summary.trial << ',' << i << ',' << fmt(c.nodes[i].max_first_entry) << ','
         << fmt(c.first_entry_bound) << ',' << fmt(c.nodes[i].max_norm) << ','
         << fmt(c.norm_bound) << ',' << fmt(c.mu) << '\n';
  }
}

void write_plot_stub(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  auto out = open_artifact(path);
  out << "# gnuplot script; run from the output directory: gnuplot -p plot.gp\n"
         "set datafile separator ','\n"
         "set key autotitle columnhead\n";
  if (!cfg.sigma_w.empty()) {
    out << "set xlabel 'sigma_w (dB)'\nset ylabel 'relative error (dB)'\n"
           "plot 'noise_sweep_summary.csv' using 2:3 with linespoints\n";
    return;
  }
  out << "set logscale y\nset xlabel 'iteration'\nset ylabel 'relative error'\n"
         "plot 'trace.csv' using 2:4 with lines\n"
         "pause -1\n"
         "plot for [i=0:"
      << cfg.s - 1
      << "] 'trace.csv' using 2:(column(6 + 5*i)) with lines title sprintf('|alpha_h| %d', i), \\\n"
         "     for [i=0:"
      << cfg.s - 1 << "] 'trace.csv' using 2:(column(7 + 5*i)) with lines title sprintf('beta_h %d', i)\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.trials.resize(cfg.trials);

  if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);

  const std::size_t jobs = std::min(resolve_jobs(cfg.jobs), cfg.trials);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < cfg.trials;) res.trials[k] = run_trial(cfg, k);
      });
  }

  for (const auto& t : res.trials) res.any_diverged = res.any_diverged || t.summary.diverged;
  if (!cfg.sigma_w.empty()) {
    std::vector<NoiseSweepPoint> all;
    for (const auto& t : res.trials) all.insert(all.end(), t.sweep.begin(), t.sweep.end());
    res.sweep = summarize_noise_sweep(all);
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (cfg.out.empty()) return res;

  const auto& dir = cfg.out;
  res.artifacts.push_back(dir / "trace.csv");
  write_trace_csv(res.artifacts.back(), cfg, res.trials);

  if (res.sweep) {
    res.artifacts.push_back(dir / "noise_sweep.csv");
    res.artifacts.push_back(dir / "noise_sweep_summary.csv");
    write_noise_csv(res.artifacts[res.artifacts.size() - 2], res.artifacts.back(), res.trials,
                    *res.sweep);
  }
  if (cfg.preset == Preset::Diagnostics) {
    res.artifacts.push_back(dir / "hypotheses.csv");
    res.artifacts.push_back(dir / "concentration.csv");
    write_diagnostics_csv(res.artifacts[res.artifacts.size() - 2], res.artifacts.back(),
                          res.trials);
  }

  auto stages = nlohmann::json::array();
  auto summaries = nlohmann::json::array();
  for (const auto& t : res.trials) {
    const auto& s = t.summary;
    auto st = stages_json(s.stages);
    st["trial"] = s.trial;
    stages.push_back(st);
    nlohmann::json js{{"trial", s.trial},
                      {"seed", s.seed},
                      {"diverged", s.diverged},
                      {"iterations", s.iterations},
                      {"converged", s.converged},
                      {"final_relative_error", s.final_relative_error},
                      {"final_loss", s.final_loss}};
    if (!s.error.empty()) js["error"] = s.error;
    summaries.push_back(js);
  }
  res.artifacts.push_back(dir / "stages.json");
  open_artifact(res.artifacts.back()) << stages.dump(2) << '\n';

  nlohmann::json report{{"config", to_raw(cfg)},
                        {"trials", summaries},
                        {"stages", stages},
                        {"jobs", jobs},
                        {"any_diverged", res.any_diverged},
                        {"wall_seconds", res.wall_seconds}};
  if (res.sweep) {
    auto levels = nlohmann::json::array();
    for (const auto& l : res.sweep->levels)
      levels.push_back({{"sigma_w", l.sigma_w},
                        {"sigma_w_db", l.sigma_w_db},
                        {"mean_error_db", l.mean_error_db}});
    report["noise_sweep"] = {{"levels", levels},
                             {"slope", res.sweep->slope ? nlohmann::json(*res.sweep->slope)
                                                        : nlohmann::json(nullptr)}};
  }
  res.artifacts.push_back(dir / "plot.gp");
  write_plot_stub(res.artifacts.back(), cfg);
  res.artifacts.push_back(dir / "report.json");
  open_artifact(res.artifacts.back()) << report.dump(2) << '\n';
  return res;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw std::out_of_range("no CSV column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const auto& cell = rows.at(row).at(col);
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw std::runtime_error("CSV cell '" + cell + "' is not a number");
  return v;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t c = 0;
    while (true) {
      const auto comma = line.find(',', c);
      cells.emplace_back(line.substr(c, comma == std::string_view::npos ? line.npos : comma - c));
      if (comma == std::string_view::npos) break;
      c = comma + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw std::runtime_error("CSV row width does not match the header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace blaircomp
