#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "blaircomp/errors.hpp"
#include "blaircomp/experiment.hpp"

namespace blaircomp {

std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::Fig1Convergence: return "fig1-convergence";
    case Preset::Components: return "components";
    case Preset::RatioGrowth: return "ratio-growth";
    case Preset::NoiseSweep: return "noise-sweep";
    case Preset::Diagnostics: return "diagnostics";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

Preset parse_preset(std::string_view name) {
  for (auto p : {Preset::Fig1Convergence, Preset::Components, Preset::RatioGrowth,
                 Preset::NoiseSweep, Preset::Diagnostics, Preset::Custom})
    if (to_string(p) == name) return p;
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "preset", "s",     "K",       "N",       "m",         "m_factor",    "eta",
      "max_iters", "tol", "loss_tol", "noise_var", "sigma_w", "q",         "trials",
      "seed",   "out",   "log_every", "jobs",  "loo_samples", "gamma",     "t1_threshold",
      "t2_threshold"};
  return keys;
}

std::string normalize_key(std::string_view key) {
  std::string k(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_known(const std::string& key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

double parse_double(const std::string& field, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(field, field + ": expected a finite number, got '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& field, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(field, field + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

std::optional<double> parse_tolerance(const std::string& field, const std::string& text) {
  if (text == "none" || text == "inf" || text == "off") return std::nullopt;
  return parse_double(field, text);
}

std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.push_back(parse_double(field, t));
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_double(v[k]);
  return out;
}

struct PresetDefaults {
  std::size_t s = 0, K = 0;
  std::optional<double> m_factor;
  std::size_t max_iters = 500;
  std::vector<double> sigma_w;
};

PresetDefaults defaults_for(Preset p) {
  switch (p) {
    case Preset::Fig1Convergence: return {10, 20, 50.0, 500, {}};
    case Preset::Components:
    case Preset::RatioGrowth: return {4, 10, 50.0, 500, {}};
    case Preset::NoiseSweep: return {1, 10, 10.0, 500, {1, 10, 100, 1e3, 1e4, 1e5}};
    case Preset::Diagnostics: return {2, 8, 50.0, 300, {}};
    case Preset::Custom: return {};
  }
  return {};
}

}  // namespace

RawConfig parse_config_text(std::string_view text) {
  RawConfig out;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno),
                        "line " + std::to_string(lineno) + ": expected key = value");
    const auto key = normalize_key(trim(body.substr(0, eq)));
    if (!is_known(key)) throw ConfigError(key, "unknown config key '" + key + "'");
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

RawConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig parse_config(const RawConfig& file, const RawConfig& flags) {
  RawConfig raw;
  for (const auto* src : {&file, &flags})
    for (const auto& [k, v] : *src) {
      const auto key = normalize_key(k);
      if (!is_known(key)) throw ConfigError(key, "unknown config key '" + key + "'");
      raw[key] = v;
    }
  auto get = [&](const char* key) -> const std::string* {
    const auto it = raw.find(key);
    return it == raw.end() ? nullptr : &it->second;
  };
  auto size = [&](const char* key) { return std::size_t(parse_u64(key, *get(key))); };

  ExperimentConfig cfg;
  if (const auto* v = get("preset")) cfg.preset = parse_preset(*v);
  const auto d = defaults_for(cfg.preset);
  cfg.s = d.s;
  cfg.K = d.K;
  cfg.max_iters = d.max_iters;
  cfg.sigma_w = d.sigma_w;

  if (get("s")) cfg.s = size("s");
  if (get("K")) cfg.K = size("K");
  if (get("N")) cfg.N = size("N");
  else if (cfg.preset != Preset::Custom) cfg.N = cfg.K;
  if (get("m") && get("m_factor"))
    throw ConfigError("m", "m and m_factor are mutually exclusive");
  if (get("m")) cfg.m = size("m");
  else if (const auto* v = get("m_factor")) cfg.m_factor = parse_double("m_factor", *v);
  else cfg.m_factor = d.m_factor;

  std::vector<std::string> missing;
  if (cfg.s == 0 && !get("s")) missing.push_back("s");
  if (cfg.K == 0 && !get("K")) missing.push_back("K");
  if (cfg.N == 0 && !get("N")) missing.push_back("N");
  if (!cfg.m && !cfg.m_factor) missing.push_back("m");
  if (!missing.empty()) {
    std::string list;
    for (const auto& f : missing) list += (list.empty() ? "" : ", ") + f;
    throw ConfigError(missing.front(), "missing required fields: " + list);
  }

  if (const auto* v = get("eta")) cfg.eta = parse_double("eta", *v);
  if (get("max_iters")) cfg.max_iters = size("max_iters");
  if (const auto* v = get("tol")) cfg.tol = parse_tolerance("tol", *v);
  if (const auto* v = get("loss_tol")) cfg.loss_tol = parse_tolerance("loss_tol", *v);
  if (const auto* v = get("noise_var")) cfg.noise_var = parse_double("noise_var", *v);
  if (const auto* v = get("sigma_w")) cfg.sigma_w = parse_list("sigma_w", *v);
  if (const auto* v = get("q")) cfg.q = parse_list("q", *v);
  if (get("trials")) cfg.trials = size("trials");
  if (const auto* v = get("seed")) cfg.seed = parse_u64("seed", *v);
  if (const auto* v = get("out")) cfg.out = *v;
  if (get("log_every")) cfg.log_every = size("log_every");
  if (get("jobs")) cfg.jobs = size("jobs");
  if (get("loo_samples")) cfg.loo_samples = size("loo_samples");
  if (const auto* v = get("gamma")) cfg.thresholds.gamma = parse_double("gamma", *v);
  if (const auto* v = get("t1_threshold")) cfg.thresholds.t1 = parse_double("t1_threshold", *v);
  if (const auto* v = get("t2_threshold")) cfg.thresholds.t2 = parse_double("t2_threshold", *v);

  cfg.validate();
  return cfg;
}

std::size_t ExperimentConfig::measurements() const {
  if (m) return *m;
  return m_factor ? std::size_t(std::llround(*m_factor * double(K))) : 0;
}

void ExperimentConfig::validate() const {
  if (s == 0) throw ConfigError("s", "s must be positive");
  if (K == 0) throw ConfigError("K", "K must be positive");
  if (N == 0) throw ConfigError("N", "N must be positive");
  if (m.has_value() == m_factor.has_value())
    throw ConfigError("m", "exactly one of m and m_factor must be set");
  if (m_factor && !(*m_factor > 0.0)) throw ConfigError("m_factor", "m_factor must be positive");
  const auto mm = measurements();
  if (mm == 0) throw ConfigError(m ? "m" : "m_factor", "m must be positive");
  if (mm < K) throw ConfigError(m ? "m" : "m_factor", "m must be at least K");
  if (!(eta > 0.0)) throw ConfigError("eta", "eta must be positive");
  if (max_iters == 0) throw ConfigError("max_iters", "max_iters must be positive");
  if (tol && !(*tol > 0.0)) throw ConfigError("tol", "tol must be positive");
  if (loss_tol && !(*loss_tol > 0.0)) throw ConfigError("loss_tol", "loss_tol must be positive");
  if (!(noise_var >= 0.0)) throw ConfigError("noise_var", "noise_var must be non-negative");
  for (double w : sigma_w)
    if (!(w > 0.0)) throw ConfigError("sigma_w", "sigma_w entries must be positive");
  if (preset == Preset::NoiseSweep && sigma_w.size() < 2)
    throw ConfigError("sigma_w", "noise-sweep needs at least two sigma_w levels");
  if (!q.empty() && q.size() != s)
    throw ConfigError("q", "q must list one norm per node");
  for (double v : q)
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError("q", "q entries must lie in (0, 1]");
  if (trials == 0) throw ConfigError("trials", "trials must be at least 1");
  if (log_every == 0) throw ConfigError("log_every", "log_every must be positive");
  if (!(thresholds.gamma > 0.0)) throw ConfigError("gamma", "gamma must be positive");
  if (!(thresholds.t1 > 0.0)) throw ConfigError("t1_threshold", "t1_threshold must be positive");
  if (!(thresholds.t2 > 0.0)) throw ConfigError("t2_threshold", "t2_threshold must be positive");
}

InstanceSpec ExperimentConfig::instance_spec(std::uint64_t trial_seed) const {
  InstanceSpec spec;
  spec.dims = {s, K, N, measurements()};
  spec.q = q;
  spec.noise_variance = noise_var;
  spec.seed = trial_seed;
  return spec;
}

SolverSettings ExperimentConfig::solver_settings() const {
  SolverSettings st;
  st.eta = eta;
  st.max_iters = max_iters;
  st.rel_tol = tol;
  st.loss_tol = loss_tol;
  st.log_every = log_every;
  return st;
}

RawConfig to_raw(const ExperimentConfig& cfg) {
  RawConfig raw;
  raw["preset"] = std::string(to_string(cfg.preset));
  raw["s"] = std::to_string(cfg.s);
  raw["K"] = std::to_string(cfg.K);
  raw["N"] = std::to_string(cfg.N);
  if (cfg.m) raw["m"] = std::to_string(*cfg.m);
  if (cfg.m_factor) raw["m_factor"] = format_double(*cfg.m_factor);
  raw["eta"] = format_double(cfg.eta);
  raw["max_iters"] = std::to_string(cfg.max_iters);
  raw["tol"] = cfg.tol ? format_double(*cfg.tol) : "none";
  raw["loss_tol"] = cfg.loss_tol ? format_double(*cfg.loss_tol) : "none";
  raw["noise_var"] = format_double(cfg.noise_var);
  if (!cfg.sigma_w.empty()) raw["sigma_w"] = join(cfg.sigma_w);
  if (!cfg.q.empty()) raw["q"] = join(cfg.q);
  raw["trials"] = std::to_string(cfg.trials);
  raw["seed"] = std::to_string(cfg.seed);
  if (!cfg.out.empty()) raw["out"] = cfg.out.string();
  raw["log_every"] = std::to_string(cfg.log_every);
  raw["jobs"] = std::to_string(cfg.jobs);
  raw["loo_samples"] = std::to_string(cfg.loo_samples);
  raw["gamma"] = format_double(cfg.thresholds.gamma);
  raw["t1_threshold"] = format_double(cfg.thresholds.t1);
  raw["t2_threshold"] = format_double(cfg.thresholds.t2);
  return raw;
}

}  // namespace blaircomp
