#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blaircomp/diagnostics.hpp"
#include "blaircomp/ensemble.hpp"
#include "blaircomp/state_evolution.hpp"
#include "blaircomp/wf.hpp"

namespace blaircomp {

enum class Preset { Fig1Convergence, Components, RatioGrowth, NoiseSweep, Diagnostics, Custom };

std::string_view to_string(Preset p);
Preset parse_preset(std::string_view name);  // throws ConfigError("preset", ...)

struct ExperimentConfig {
  Preset preset = Preset::Custom;
  std::size_t s = 0, K = 0, N = 0;
  std::optional<std::size_t> m;
  std::optional<double> m_factor;  // m = m_factor * K
  double eta = 0.1;
  std::size_t max_iters = 500;
  std::optional<double> tol;       // relative-error stop
  std::optional<double> loss_tol;
  double noise_var = 0.0;
  std::vector<double> sigma_w;
  std::vector<double> q;           // empty: all ones
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;       // empty: nothing is written
  std::size_t log_every = 1;
  std::size_t jobs = 0;            // 0: BLAIRCOMP_JOBS, then hardware concurrency
  std::size_t loo_samples = 8;
  StageThresholds thresholds;

  std::size_t measurements() const;
  void validate() const;
  InstanceSpec instance_spec(std::uint64_t trial_seed) const;
  SolverSettings solver_settings() const;
};

// Raw `key = value` pairs. Keys use underscores; dashes are normalized on insert.
using RawConfig = std::map<std::string, std::string>;

const std::vector<std::string>& config_keys();
std::string normalize_key(std::string_view key);

// Flat `key = value` text, one pair per line, `#` starts a comment.
RawConfig parse_config_text(std::string_view text);
RawConfig read_config_file(const std::filesystem::path& path);

// Values in `flags` override `file`. Preset defaults fill anything not given.
ExperimentConfig parse_config(const RawConfig& file, const RawConfig& flags = {});

// Echo of a config as the raw key/value pairs it round-trips through.
RawConfig to_raw(const ExperimentConfig& cfg);

struct TrialSummary {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  std::size_t iterations = 0;
  bool converged = false;
  double final_relative_error = 0.0;
  double final_loss = 0.0;
  StageReport stages;
};

struct NoiseSweepPoint {
  std::size_t trial = 0;
  double sigma_w = 0.0;
  std::size_t t = 0;
  double error = 0.0;
};

struct NoiseSweepLevel {
  double sigma_w = 0.0;
  double sigma_w_db = 0.0;    // 10 log10(sigma_w)
  double mean_error_db = 0.0; // mean of 20 log10(error) over trials and late iterations
};

struct NoiseSweepSummary {
  std::vector<NoiseSweepLevel> levels;
  std::optional<double> slope;  // fitted d error_dB / d sigma_w_dB
};

// Averages over records with t >= t_last / 2 of each trial.
NoiseSweepSummary summarize_noise_sweep(std::span<const NoiseSweepPoint> points);

struct TrialOutput {
  TrialSummary summary;
  StateTrace trace;
  std::vector<NoiseSweepPoint> sweep;
  std::optional<HypothesisReport> hypotheses;
  std::optional<ConcentrationReport> concentration;
};

TrialOutput run_trial(const ExperimentConfig& cfg, std::size_t trial);

struct ExperimentResult {
  std::vector<TrialOutput> trials;
  std::optional<NoiseSweepSummary> sweep;
  std::vector<std::filesystem::path> artifacts;
  double wall_seconds = 0.0;
  bool any_diverged = false;
};

std::size_t resolve_jobs(std::size_t requested);

// Runs every trial on a worker pool and, when cfg.out is set, writes the artifacts.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Column names of trace.csv for s nodes: 5 + 5 s entries.
std::vector<std::string> trace_columns(std::size_t s);

/// Parsed CSV: header plus raw string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws std::out_of_range
  double number(std::size_t row, std::size_t col) const;  // empty cell reads as NaN
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

}  // namespace blaircomp
