#include "hjm/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hjm/completeness.hpp"
#include "hjm/counterexample.hpp"
#include "hjm/csv.hpp"
#include "hjm/incompleteness.hpp"
#include "hjm/parallel.hpp"

namespace hjm {

bool RunManifest::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ManifestCheck& c) { return c.passed; });
}

namespace {

struct Context {
  const ExperimentConfig& config;
  RunManifest& manifest;

  std::filesystem::path file(const std::string& name) const { return config.out / name; }
  void record(const std::string& name, std::size_t rows) { manifest.files.push_back({name, rows}); }
  void summary(const std::string& key, double value) { manifest.summary.emplace_back(key, value); }
  void check(const std::string& name, bool passed, const std::string& detail) {
    manifest.checks.push_back({name, passed, detail});
  }
};

std::string fmt(double v) { return format_double(v); }

VolatilitySpec family(const std::string& name, const ExperimentConfig& c) {
  if (name == "constant") return make_constant_single(c.sigma0);
  if (name == "sine") return make_sine_gaussian_power(c.factors, c.gamma_power, c.gamma_scale);
  if (name == "harmonic") return make_harmonic_flat(c.harmonic_scale);
  throw std::invalid_argument("unknown volatility family `" + name + "`");
}

VolatilitySpec volatility_from(const ExperimentConfig& c) {
  if (c.volatility == "sign-switching") return make_sign_switching(family(c.base, c));
  return family(c.volatility, c);
}

Eigen::VectorXd initial_curve(const ExperimentConfig& c, const TimeGrid& grid) {
  if (!c.initial_curve.empty()) return read_initial_curve(c.initial_curve, grid);
  return flat_curve(grid, c.initial_rate);
}

// Shared model setup for the forward-rate experiments.
struct Model {
  TimeGrid grid;
  FactorTruncation truncation;
  VolatilitySpec spec;
  Eigen::VectorXd curve;
  std::unique_ptr<VolatilityCache> cache;  // of the base family for switching specs
  CounterRng rng;

  explicit Model(const ExperimentConfig& c)
      : grid(c.horizon, c.steps), truncation(c.factors), spec(volatility_from(c)), curve(initial_curve(c, grid)),
        rng(c.seed) {
    validate(spec, grid, truncation);
    const VolatilitySpec* cached = &spec;
    if (const auto* sw = std::get_if<SignSwitching>(&spec.family)) cached = sw->base.get();
    if (is_deterministic(*cached)) cache = std::make_unique<VolatilityCache>(*cached, grid, truncation);
  }

  ForwardSurface simulate(std::uint64_t path, bool retain_normals = true) const {
    SimulationOptions o;
    o.retain_normals = retain_normals;
    o.cache = cache.get();
    return simulate_forward_surface(spec, grid, truncation, curve, PathNormals(rng, path), o);
  }
};

void run_simulate(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  const int rows = model.grid.size();
  struct PathResult {
    Eigen::VectorXd terminal_bond;  // P^(t_k, S) for k = 0..M
    BoundReport bound;
  };
  const auto results = parallel_map(static_cast<std::size_t>(c.paths), c.threads, [&](std::size_t p) {
    const ForwardSurface s = model.simulate(p, false);
    const Eigen::MatrixXd disc = discounted_surface(s);
    return PathResult{disc.col(rows - 1), proposition1_report(s, model.spec, 10.0, model.cache.get())};
  });

  const ForwardSurface first = model.simulate(0, false);
  ctx.record("surface.csv", write_surface_csv(first, ctx.file("surface.csv")));
  {
    const RatePath rp = rate_path(first);
    CsvWriter csv(ctx.file("rates.csv"), {"k", "t", "short_rate", "bank"});
    for (int k = 0; k < rows; ++k) {
      csv.row({std::to_string(k), fmt(model.grid.node(k)), fmt(rp.short_rate(k)), fmt(rp.bank(k))});
    }
    ctx.record("rates.csv", csv.rows());
  }

  const double p0 = results.front().terminal_bond(0);
  CsvWriter csv(ctx.file("martingale.csv"), {"k", "t", "mean", "se", "z"});
  double worst_z = 0.0;
  for (int k = 0; k < rows; ++k) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : results) {
      sum += r.terminal_bond(k);
      sq += r.terminal_bond(k) * r.terminal_bond(k);
    }
    const double n = static_cast<double>(results.size());
    const double mean = sum / n;
    const double se = n > 1 ? std::sqrt(std::max(sq / n - mean * mean, 0.0) / (n - 1)) : 0.0;
    const double z = se > 0.0 ? (mean - p0) / se : (mean == p0 ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, std::abs(z));
    csv.row({std::to_string(k), fmt(model.grid.node(k)), fmt(mean), fmt(se), fmt(z)});
  }
  ctx.record("martingale.csv", csv.rows());

  int violations = 0, checks = 0;
  double required_c = 0.0;
  for (const auto& r : results) {
    violations += r.bound.violations;
    checks += r.bound.checks;
    required_c = std::max(required_c, r.bound.required_c);
  }
  ctx.summary("discounted_bond_0", p0);
  ctx.summary("martingale_worst_z", worst_z);
  ctx.summary("gamma_bound_required_c", required_c);
  if (c.paths > 1) ctx.check("martingale_flatness", worst_z <= 3.0, "worst |z| = " + fmt(worst_z));
  ctx.check("gamma_column_bound", violations == 0,
            std::to_string(violations) + " of " + std::to_string(checks) + " checks above C = 10");
}

void run_spectrum(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  const ForwardSurface s = model.simulate(0);
  std::vector<int> steps;
  if (c.spectrum_stride > 0) {
    for (int k = 0; k <= c.steps; k += c.spectrum_stride) steps.push_back(k);
  } else {
    steps.push_back(c.spectrum_step);
  }
  const auto spectra = parallel_map(steps.size(), c.threads, [&](std::size_t j) {
    return spectrum(assemble_gamma(s, model.spec, steps[j], model.cache.get()));
  });
  ctx.record("spectrum.csv", write_spectrum_csv(spectra, ctx.file("spectrum.csv")));
  const GammaOperator gamma = assemble_gamma(s, model.spec, c.spectrum_step, model.cache.get());
  ctx.record("gamma.csv", write_gamma_csv(gamma, ctx.file("gamma.csv")));
  ctx.summary("lambda_1", spectra.front().lambda(0));
  ctx.summary("hs_norm", hs_norm(gamma));

  if (c.volatility == "sine") {
    // Gamma_{t_k} has M - k nonzero rows; injectivity is only possible while M - k >= N.
    int tested = 0, failed = 0;
    double worst = INFINITY;
    for (const auto& sd : spectra) {
      if (c.steps - sd.k < c.factors) continue;
      ++tested;
      const double ratio = sd.lambda(0) > 0.0 ? injectivity_margin(sd) / sd.lambda(0) : 0.0;
      worst = std::min(worst, ratio);
      if (!(ratio > kRankTolerance)) ++failed;
    }
    ctx.summary("injectivity_worst_ratio", std::isfinite(worst) ? worst : 0.0);
    ctx.check("injectivity", failed == 0,
              std::to_string(failed) + " of " + std::to_string(tested) + " tested steps rank-deficient");
  }
}

void run_nonreplicable(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  ClaimOptions co;
  co.mode = c.psi_mode == "frozen" ? SpectrumMode::Frozen : SpectrumMode::Pointwise;
  co.cache = model.cache.get();
  const auto samples = parallel_map(static_cast<std::size_t>(c.paths), c.threads, [&](std::size_t p) {
    return nonreplicable_claim(model.simulate(p), model.spec, co);
  });
  CsvWriter csv(ctx.file("claims.csv"), {"path", "xi", "tau", "overshoot"});
  double sum = 0.0, sq = 0.0, max_psi = 0.0;
  int bound_violations = 0;
  std::vector<double> overshoot;
  for (std::size_t p = 0; p < samples.size(); ++p) {
    const auto& s = samples[p];
    csv.row({std::to_string(p), fmt(s.xi), fmt(s.tau), fmt(s.overshoot)});
    sum += s.xi;
    sq += s.xi * s.xi;
    max_psi = std::max(max_psi, s.max_psi_norm_sq);
    if (std::abs(s.xi) > 1.0 + s.max_increment + 1e-12) ++bound_violations;
    if (s.stopped) overshoot.push_back(s.overshoot);
  }
  ctx.record("claims.csv", csv.rows());
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  const double se = n > 1 ? std::sqrt(std::max(sq / n - mean * mean, 0.0) / (n - 1)) : 0.0;
  double median = 0.0;
  if (!overshoot.empty()) {
    std::sort(overshoot.begin(), overshoot.end());
    const std::size_t m = overshoot.size();
    median = m % 2 ? overshoot[m / 2] : 0.5 * (overshoot[m / 2 - 1] + overshoot[m / 2]);
  }
  ctx.summary("xi_mean", mean);
  ctx.summary("xi_se", se);
  ctx.summary("stopped_paths", static_cast<double>(overshoot.size()));
  ctx.summary("median_overshoot", median);
  ctx.summary("max_psi_norm_sq", max_psi);
  ctx.check("bounded_claim", bound_violations == 0, std::to_string(bound_violations) + " paths above 1 + increment");
  ctx.check("psi_l2_bound", max_psi <= std::numbers::pi * std::numbers::pi / 6.0 + 1e-12,
            "max |psi~|^2 = " + fmt(max_psi));
  if (c.paths > 1) ctx.check("zero_mean", std::abs(mean) <= 3.0 * se, "mean " + fmt(mean) + " se " + fmt(se));
}

void run_divergence(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  const ForwardSurface s = model.simulate(0);
  const GammaOperator gamma = assemble_gamma(s, model.spec, c.spectrum_step, model.cache.get());
  const DivergenceTable t = divergence_profile(spectrum(gamma), gamma.metric, c.k_max);
  ctx.record("divergence.csv", write_divergence_csv(t, ctx.file("divergence.csv")));
  bool lower = true, monotone = true;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double v = t.rows[k].min_norm_sq;
    if (v < (t.rows[k].count - 1.0) * (1.0 - 1e-8)) lower = false;
    if (k > 0 && v < t.rows[k - 1].min_norm_sq) monotone = false;
  }
  if (!t.rows.empty()) ctx.summary("min_norm_sq_last", t.rows.back().min_norm_sq);
  ctx.check("enough_indices", !t.insufficient,
            std::to_string(t.rows.size()) + " of " + std::to_string(c.k_max) + " indices found");
  ctx.check("lower_bound", lower, "min-norm^2(K) >= K - 1");
  ctx.check("nondecreasing", monotone, "table nondecreasing in K");
}

ClaimSpec claim_from(const ExperimentConfig& c) {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, c.claim_a);
  if (c.claim == "zero") return make_zero_claim(c.factors);
  if (c.claim == "linear") return make_linear_claim(a);
  if (c.claim == "stopped") return make_stopped_claim(Eigen::VectorXd::Constant(1, 1.0), std::abs(c.claim_a));
  return make_exponential_claim(a);
}

void run_replicate(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  ReplicationSetup setup{model.spec, claim_from(c), model.grid, model.truncation, model.curve, c.seed, 1,
                         c.strict_injectivity ? StrategyMode::Strict : StrategyMode::Project, c.threads};
  const ReplicationSummary summary = replicate_claim(setup, c.paths);
  ctx.record("replication.csv", write_replication_csv(summary, ctx.file("replication.csv")));
  ctx.summary("rms_error", summary.rms_error);
  ctx.summary("mean_residual", summary.mean_residual);
  ctx.summary("max_linearized_error", summary.max_linearized_error);
  ctx.summary("paths_with_deficient_steps", summary.paths_with_deficient_steps);
  double worst_lin = summary.max_linearized_error;

  if (!c.refine.empty()) {
    std::vector<int> levels = c.refine;
    std::sort(levels.begin(), levels.end(), std::greater<>());
    const auto rows = convergence_table(setup, c.steps, levels, c.paths);
    ctx.record("convergence.csv", write_convergence_csv(rows, ctx.file("convergence.csv")));
    bool ok = true;
    std::string detail;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      worst_lin = std::max(worst_lin, rows[j].max_linearized_error);
      if (j == 0) continue;
      const double ratio = rows[j].rms_error > 0.0 ? rows[j - 1].rms_error / rows[j].rms_error : INFINITY;
      detail += (detail.empty() ? "ratios " : ", ") + fmt(ratio);
      if (!(ratio >= 1.3)) ok = false;
    }
    if (rows.size() > 1) ctx.check("convergence", ok, detail);
  }
  ctx.check("linearized_identity", worst_lin <= 1e-8, "max error " + fmt(worst_lin));
}

void run_bagchi(Context& ctx) {
  const auto& c = ctx.config;
  const Model model(c);
  const AdmissibilityAccumulator proto(model.spec, model.grid, model.truncation);
  const auto parts = parallel_map(static_cast<std::size_t>(c.paths), c.threads, [&](std::size_t p) {
    AdmissibilityAccumulator local = proto;
    local.add(model.simulate(p, false));
    return local;
  });
  AdmissibilityAccumulator total = proto;
  for (const auto& part : parts) total.merge(part);
  const AdmissibilityReport r = total.report();
  ctx.record("admissibility.csv", write_admissibility_csv(r, ctx.file("admissibility.csv")));
  ctx.summary("loading_bound", r.loading_bound);
  ctx.summary("rate_slack", r.rate_slack);
  ctx.summary("min_rate", r.min_rate);
  ctx.summary("max_discounted", r.max_discounted);
  for (const auto& chk : r.checks) {
    ctx.check(chk.name, chk.passed,
              std::to_string(chk.violations) + " violations, margin " + fmt(chk.margin));
  }
}

void run_counterexample(Context& ctx) {
  const auto& c = ctx.config;
  const CounterRng rng(c.seed);
  auto batch = [&](int steps, int refinement, std::optional<double> control) {
    CounterexampleOptions o{steps, c.counterexample_eps, refinement, control};
    return parallel_map(static_cast<std::size_t>(c.paths), c.threads,
                        [&](std::size_t p) { return simulate_counterexample(rng, p, o); });
  };
  const auto fine = batch(c.steps, 1, std::nullopt);
  ctx.record("counterexample.csv", write_counterexample_csv(fine, ctx.file("counterexample.csv")));

  const bool nested = c.steps % 10 == 0;
  const auto coarse = nested ? batch(c.steps / 10, 10, std::nullopt) : fine;
  const auto control = batch(nested ? c.steps / 10 : c.steps, 1, 1.0);
  const ExpectationGap gap = expectation_gap(fine);
  const DualRepresentationReport dual = dual_representation_report(coarse, fine, control);

  int positive = 0, below = 0, n = 0, underflow = 0;
  for (const auto& p : fine) {
    if (p.positive()) ++positive;
    if (p.terminal == 0.0) ++underflow;
    if (p.forced) continue;
    ++n;
    if (p.slack() < 0.05) ++below;
  }
  const double frac = n ? static_cast<double>(below) / n : 0.0;
  ctx.summary("mean_M1", gap.mean);
  ctx.summary("se_M1", gap.se);
  ctx.summary("ci99_high", gap.ci_high);
  ctx.summary("separation", dual.separation);
  ctx.summary("separation_in_ci", dual.separation_in_ci);
  ctx.summary("energy_coarse", dual.coarse_energy);
  ctx.summary("energy_fine", dual.fine_energy);
  ctx.summary("energy_growth", dual.energy_growth);
  ctx.summary("control_mean", dual.control_mean);
  ctx.summary("control_se", dual.control_se);
  ctx.summary("degenerate_paths", gap.excluded);
  ctx.summary("underflowed_M1", underflow);
  ctx.check("M1_positive", positive == static_cast<int>(fine.size()),
            std::to_string(positive) + " of " + std::to_string(fine.size()) + " paths with finite L");
  ctx.check("ci99_below_e_inverse", gap.ci_high <= std::exp(-1.0) + 0.02, "upper CI " + fmt(gap.ci_high));
  ctx.check("three_sigma_below_one", gap.mean + 3.0 * gap.se < 1.0, fmt(gap.sigmas_below_one) + " sigma");
  ctx.check("log_exponent_below_minus_one", frac >= 0.99, "fraction " + fmt(frac));
  ctx.check("control_martingale", dual.control_is_martingale(),
            "mean " + fmt(dual.control_mean) + " se " + fmt(dual.control_se));
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config = config;
  std::filesystem::create_directories(config.out);
  Context ctx{config, manifest};
  try {
    if (config.experiment == "simulate") run_simulate(ctx);
    else if (config.experiment == "spectrum") run_spectrum(ctx);
    else if (config.experiment == "nonreplicable") run_nonreplicable(ctx);
    else if (config.experiment == "divergence") run_divergence(ctx);
    else if (config.experiment == "replicate") run_replicate(ctx);
    else if (config.experiment == "bagchi-check") run_bagchi(ctx);
    else if (config.experiment == "counterexample") run_counterexample(ctx);
    else throw std::invalid_argument("unknown experiment `" + config.experiment + "`");
  } catch (const std::exception& e) {
    throw std::runtime_error(config.experiment + ": " + e.what());
  }
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(manifest, config.out / "manifest.json");
  return manifest;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["version"] = manifest.version;
  j["experiment"] = manifest.config.experiment;
  j["wall_seconds"] = manifest.wall_seconds;
  j["passed"] = manifest.passed();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : manifest.config.echo()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [k, v] : manifest.summary) summary[k] = v;
  j["summary"] = summary;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : manifest.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : manifest.files) j["files"].push_back({{"name", f.name}, {"rows", f.rows}});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace hjm
