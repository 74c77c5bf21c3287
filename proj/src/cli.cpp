#include "hjm/cli.hpp"

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjm/config.hpp"
#include "hjm/runner.hpp"

namespace hjm {

namespace {

const std::vector<std::string> kExperiments{"simulate",  "spectrum",     "nonreplicable", "divergence",
                                            "replicate", "bagchi-check", "counterexample"};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HJM infinite-factor bond-market lab", "hjmlab"};
  std::string experiment;
  std::string config_path;
  std::optional<std::string> seed, paths, steps, factors, out_dir, threads, claim, psi_mode;
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(kExperiments));
  app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides LAB_SEED and the file)");
  app.add_option("--paths", paths, "Monte Carlo paths");
  app.add_option("--steps", steps, "Time steps M");
  app.add_option("--factors", factors, "Factor truncation N");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads");
  app.add_option("--claim", claim, "Claim for replicate: exponential | linear | stopped | zero");
  app.add_option("--psi-mode", psi_mode, "pointwise | frozen");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::vector<ConfigEntry> overrides{{"experiment", experiment, 0}};
  if (const char* env = std::getenv("LAB_SEED"); env && *env) overrides.push_back({"seed", env, 0});
  auto add = [&](const char* key, const std::optional<std::string>& v) {
    if (v) overrides.push_back({key, *v, 0});
  };
  add("seed", seed);
  add("paths", paths);
  add("steps", steps);
  add("factors", factors);
  add("out", out_dir);
  add("threads", threads);
  add("claim", claim);
  add("psi_mode", psi_mode);

  ExperimentConfig config;
  try {
    config = config_path.empty() ? build_config(overrides) : load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    err << "hjmlab: " << e.what() << '\n';
    return kExitUsage;
  }

  RunManifest manifest;
  try {
    manifest = run_experiment(config);
  } catch (const std::exception& e) {
    err << "hjmlab: " << e.what() << '\n';
    return kExitInvariant;
  }
  for (const auto& c : manifest.checks) {
    out << (c.passed ? "ok    " : "FAIL  ") << c.name << "  " << c.detail << '\n';
  }
  out << "wrote " << manifest.files.size() + 1 << " files to " << config.out.string() << '\n';
  return manifest.passed() ? kExitOk : kExitInvariant;
}

}  // namespace hjm
