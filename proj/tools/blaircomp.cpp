#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "blaircomp/errors.hpp"
#include "blaircomp/experiment.hpp"
#include "blaircomp/serialize.hpp"

using namespace blaircomp;

namespace {

struct ExperimentFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_experiment_flags(CLI::App* app, ExperimentFlags& flags) {
  app->add_option("--config", flags.config_path, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& key : config_keys()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option_function<std::string>(
        "--" + flag, [&flags, key](const std::string& v) { flags.values[key] = v; },
        "config key " + key);
  }
}

int run_command(const ExperimentFlags& flags, std::optional<Preset> forced) {
  RawConfig file;
  if (!flags.config_path.empty()) file = read_config_file(flags.config_path);
  RawConfig over(flags.values.begin(), flags.values.end());
  if (forced && !over.count("preset") && !file.count("preset"))
    over["preset"] = std::string(to_string(*forced));
  const auto cfg = parse_config(file, over);
  if (cfg.out.empty()) std::cerr << "note: no --out given, artifacts are not written\n";

  const auto res = run_experiment(cfg);
  std::size_t converged = 0;
  for (const auto& t : res.trials) {
    const auto& s = t.summary;
    converged += s.converged;
    if (s.diverged)
      std::cerr << "trial " << s.trial << ": failed: " << s.error << '\n';
  }
  std::cout << "preset " << to_string(cfg.preset) << ": " << res.trials.size() << " trials, "
            << converged << " reached tolerance, " << res.wall_seconds << " s\n";
  if (res.sweep && res.sweep->slope)
    std::cout << "noise sweep slope (dB/dB): " << *res.sweep->slope << '\n';
  for (const auto& p : res.artifacts) std::cout << "wrote " << p.string() << '\n';
  return res.any_diverged ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind over-the-air computation via randomly initialized Wirtinger flow"};
  app.require_subcommand(1);

  ExperimentFlags run_flags, diag_flags;
  auto* run = app.add_subcommand("run", "run an experiment preset");
  add_experiment_flags(run, run_flags);
  auto* diag = app.add_subcommand("diagnostics", "leave-one-out and random-sign diagnostics");
  add_experiment_flags(diag, diag_flags);

  InstanceSpec dump_spec;
  std::string dump_path;
  auto* dump = app.add_subcommand("dump-instance", "write a synthetic instance to a binary file");
  dump->add_option("--s", dump_spec.dims.s)->required();
  dump->add_option("--K", dump_spec.dims.K)->required();
  dump->add_option("--N", dump_spec.dims.N)->required();
  dump->add_option("--m", dump_spec.dims.m)->required();
  dump->add_option("--seed", dump_spec.seed);
  dump->add_option("--noise-var", dump_spec.noise_variance);
  dump->add_option("--out", dump_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(run_flags, std::nullopt);
    if (*diag) return run_command(diag_flags, Preset::Diagnostics);
    if (*dump) {
      save_instance(dump_path, make_instance(dump_spec));
      std::cout << "wrote " << dump_path << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.field() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
