#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjm {

// Flat `key = value` configuration; `#` starts a comment. Keys and defaults:
//
//   experiment          required: simulate | spectrum | nonreplicable | divergence |
//                       replicate | bagchi-check | counterexample
//   horizon             1.0          steps         100 (10000 for counterexample)
//   factors             8            paths         1000
//   seed                1            threads       1
//   out                 out          initial_rate  0.03
//   initial_curve       CSV of maturity,rate (overrides initial_rate)
//   volatility          sine | constant | harmonic | sign-switching   (sine)
//   base                base family for sign-switching: harmonic | sine | constant (harmonic)
//   sigma0              0.2          gamma_power   1.0     gamma_scale 1.0
//   harmonic_scale      1.0
//   psi_mode            pointwise | frozen
//   spectrum_step       0            spectrum_stride 0 (0: only spectrum_step)
//   k_max               10
//   claim               exponential | linear | stopped | zero      claim_a 0.5
//   refine              comma list of coarsening factors, e.g. 4,2,1
//   counterexample_eps  1e-8
//   strict_injectivity  false
struct ExperimentConfig {
  std::string experiment;
  double horizon = 1.0;
  int steps = 100;
  int factors = 8;
  int paths = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out = "out";
  double initial_rate = 0.03;
  std::filesystem::path initial_curve;
  std::string volatility = "sine";
  std::string base = "harmonic";
  double sigma0 = 0.2;
  double gamma_power = 1.0;
  double gamma_scale = 1.0;
  double harmonic_scale = 1.0;
  std::string psi_mode = "pointwise";
  int spectrum_step = 0;
  int spectrum_stride = 0;
  int k_max = 10;
  std::string claim = "exponential";
  double claim_a = 0.5;
  std::vector<int> refine;
  double counterexample_eps = 1e-8;
  bool strict_injectivity = false;

  // Resolved settings in key order, for the manifest.
  std::map<std::string, std::string> echo() const;
};

struct ConfigIssue {
  int line = 0;        // 0 for command-line and environment overrides
  std::string key;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Splits the text into entries; malformed lines are reported with their line number.
std::vector<ConfigEntry> parse_config_text(std::istream& in);

// Later entries override earlier ones. Throws ConfigError listing every problem.
ExperimentConfig build_config(const std::vector<ConfigEntry>& entries);

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<ConfigEntry>& overrides = {});

}  // namespace hjm
