#include "hjm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "hjm/csv.hpp"

namespace hjm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream out;
  out << "invalid configuration:";
  for (const auto& i : issues) {
    out << "\n  ";
    if (i.line > 0) out << "line " << i.line << ": ";
    if (!i.key.empty()) out << "`" << i.key << "`: ";
    out << i.message;
  }
  return out.str();
}

const std::set<std::string> kExperiments{"simulate",   "spectrum",     "nonreplicable", "divergence",
                                         "replicate", "bagchi-check", "counterexample"};

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<ConfigEntry> parse_config_text(std::istream& in) {
  std::vector<ConfigEntry> entries;
  std::vector<ConfigIssue> issues;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line, "", "expected `key = value`, got `" + text + "`"});
      continue;
    }
    std::string key = trim(text.substr(0, eq));
    if (key.empty()) {
      issues.push_back({line, "", "missing key before `=`"});
      continue;
    }
    entries.push_back({std::move(key), trim(text.substr(eq + 1)), line});
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return entries;
}

ExperimentConfig build_config(const std::vector<ConfigEntry>& entries) {
  ExperimentConfig c;
  std::vector<ConfigIssue> issues;
  bool have_experiment = false;
  bool have_steps = false;

  auto fail = [&](const ConfigEntry& e, std::string msg) { issues.push_back({e.line, e.key, std::move(msg)}); };
  auto as_double = [&](const ConfigEntry& e, double& dst) {
    double v = 0.0;
    const auto* end = e.value.data() + e.value.size();
    const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return fail(e, "expected a number, got `" + e.value + "`");
    dst = v;
  };
  auto as_int = [&](const ConfigEntry& e, auto& dst) {
    using T = std::decay_t<decltype(dst)>;
    T v{};
    const auto* end = e.value.data() + e.value.size();
    const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end) return fail(e, "expected an integer, got `" + e.value + "`");
    dst = v;
  };
  auto one_of = [&](const ConfigEntry& e, std::string& dst, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
      if (e.value == a) {
        dst = e.value;
        return;
      }
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : " | ") + a;
    fail(e, "expected one of " + list + ", got `" + e.value + "`");
  };

  const std::map<std::string, std::function<void(const ConfigEntry&)>> handlers{
      {"experiment",
       [&](const ConfigEntry& e) {
         if (!kExperiments.count(e.value)) return fail(e, "unknown experiment `" + e.value + "`");
         c.experiment = e.value;
         have_experiment = true;
       }},
      {"horizon", [&](const ConfigEntry& e) { as_double(e, c.horizon); }},
      {"steps",
       [&](const ConfigEntry& e) {
         as_int(e, c.steps);
         have_steps = true;
       }},
      {"factors", [&](const ConfigEntry& e) { as_int(e, c.factors); }},
      {"paths", [&](const ConfigEntry& e) { as_int(e, c.paths); }},
      {"seed", [&](const ConfigEntry& e) { as_int(e, c.seed); }},
      {"threads", [&](const ConfigEntry& e) { as_int(e, c.threads); }},
      {"out", [&](const ConfigEntry& e) { c.out = e.value; }},
      {"initial_rate", [&](const ConfigEntry& e) { as_double(e, c.initial_rate); }},
      {"initial_curve", [&](const ConfigEntry& e) { c.initial_curve = e.value; }},
      {"volatility",
       [&](const ConfigEntry& e) { one_of(e, c.volatility, {"sine", "constant", "harmonic", "sign-switching"}); }},
      {"base", [&](const ConfigEntry& e) { one_of(e, c.base, {"harmonic", "sine", "constant"}); }},
      {"sigma0", [&](const ConfigEntry& e) { as_double(e, c.sigma0); }},
      {"gamma_power", [&](const ConfigEntry& e) { as_double(e, c.gamma_power); }},
      {"gamma_scale", [&](const ConfigEntry& e) { as_double(e, c.gamma_scale); }},
      {"harmonic_scale", [&](const ConfigEntry& e) { as_double(e, c.harmonic_scale); }},
      {"psi_mode", [&](const ConfigEntry& e) { one_of(e, c.psi_mode, {"pointwise", "frozen"}); }},
      {"spectrum_step", [&](const ConfigEntry& e) { as_int(e, c.spectrum_step); }},
      {"spectrum_stride", [&](const ConfigEntry& e) { as_int(e, c.spectrum_stride); }},
      {"k_max", [&](const ConfigEntry& e) { as_int(e, c.k_max); }},
      {"claim", [&](const ConfigEntry& e) { one_of(e, c.claim, {"exponential", "linear", "stopped", "zero"}); }},
      {"claim_a", [&](const ConfigEntry& e) { as_double(e, c.claim_a); }},
      {"refine",
       [&](const ConfigEntry& e) {
         c.refine.clear();
         std::stringstream ss(e.value);
         std::string item;
         while (std::getline(ss, item, ',')) {
           ConfigEntry part{e.key, trim(item), e.line};
           int v = 0;
           const std::size_t before = issues.size();
           as_int(part, v);
           if (issues.size() != before) return;
           c.refine.push_back(v);
         }
       }},
      {"counterexample_eps", [&](const ConfigEntry& e) { as_double(e, c.counterexample_eps); }},
      {"strict_injectivity",
       [&](const ConfigEntry& e) {
         if (e.value == "true" || e.value == "1") c.strict_injectivity = true;
         else if (e.value == "false" || e.value == "0") c.strict_injectivity = false;
         else fail(e, "expected true or false, got `" + e.value + "`");
       }},
  };

  std::map<std::string, int> lines;
  for (const auto& e : entries) {
    const auto h = handlers.find(e.key);
    if (h == handlers.end()) {
      fail(e, "unknown key");
      continue;
    }
    lines[e.key] = e.line;
    h->second(e);
  }

  auto range = [&](const char* key, bool ok, const std::string& msg) {
    if (!ok) issues.push_back({lines.count(key) ? lines[key] : 0, key, msg});
  };
  if (!have_experiment) {
    if (std::none_of(issues.begin(), issues.end(), [](const ConfigIssue& i) { return i.key == "experiment"; })) {
      issues.push_back({0, "experiment", "missing required key"});
    }
  }
  if (!have_steps && c.experiment == "counterexample") c.steps = 10000;
  range("horizon", c.horizon > 0.0, "must be > 0");
  range("steps", c.steps >= 2, "must be >= 2");
  range("factors", c.factors >= 1, "must be >= 1");
  range("paths", c.paths >= 1, "must be >= 1");
  range("threads", c.threads >= 1, "must be >= 1");
  range("k_max", c.k_max >= 1, "must be >= 1");
  range("spectrum_step", c.spectrum_step >= 0 && c.spectrum_step <= c.steps, "must lie in [0, steps]");
  range("spectrum_stride", c.spectrum_stride >= 0, "must be >= 0");
  range("counterexample_eps", c.counterexample_eps > 0.0 && c.counterexample_eps < 1.0, "must lie in (0, 1)");
  range("harmonic_scale", c.harmonic_scale >= 0.0, "must be >= 0");
  for (int r : c.refine) {
    if (r < 1 || c.steps % r != 0) {
      range("refine", false, "factor " + std::to_string(r) + " must be >= 1 and divide steps");
      break;
    }
  }
  if (c.experiment == "counterexample") range("steps", c.steps >= 1000, "counterexample needs >= 1000 steps");
  if (c.experiment == "bagchi-check") {
    range("volatility", c.volatility == "sign-switching", "bagchi-check needs volatility = sign-switching");
  }
  if (c.experiment == "nonreplicable" || c.experiment == "divergence") {
    range("factors", c.factors >= 2, "the psi~ construction needs at least 2 factors");
  }

  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(),
                     [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
    throw ConfigError(std::move(issues));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<ConfigEntry>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{0, "", "cannot open config file " + path.string()}});
  std::vector<ConfigEntry> entries = parse_config_text(in);
  entries.insert(entries.end(), overrides.begin(), overrides.end());
  return build_config(entries);
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::string refine_list;
  for (int r : refine) refine_list += (refine_list.empty() ? "" : ",") + std::to_string(r);
  return {
      {"experiment", experiment},
      {"horizon", format_double(horizon)},
      {"steps", std::to_string(steps)},
      {"factors", std::to_string(factors)},
      {"paths", std::to_string(paths)},
      {"seed", std::to_string(seed)},
      {"threads", std::to_string(threads)},
      {"out", out.string()},
      {"initial_rate", format_double(initial_rate)},
      {"initial_curve", initial_curve.string()},
      {"volatility", volatility},
      {"base", base},
      {"sigma0", format_double(sigma0)},
      {"gamma_power", format_double(gamma_power)},
      {"gamma_scale", format_double(gamma_scale)},
      {"harmonic_scale", format_double(harmonic_scale)},
      {"psi_mode", psi_mode},
      {"spectrum_step", std::to_string(spectrum_step)},
      {"spectrum_stride", std::to_string(spectrum_stride)},
      {"k_max", std::to_string(k_max)},
      {"claim", claim},
      {"claim_a", format_double(claim_a)},
      {"refine", refine_list},
      {"counterexample_eps", format_double(counterexample_eps)},
      {"strict_injectivity", strict_injectivity ? "true" : "false"},
  };
}

}  // namespace hjm
