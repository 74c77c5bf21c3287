#include "hjm/completeness.hpp"

#include <cmath>
#include <memory>

#include "hjm/csv.hpp"
#include "hjm/parallel.hpp"

namespace hjm {

Eigen::MatrixXd sine_gaussian_orthogonality(const SineGaussian& spec, double horizon, double t, int panels) {
  if (!(t < horizon)) throw std::invalid_argument("sine_gaussian_orthogonality: need t < horizon");
  if (panels < 1) throw std::invalid_argument("sine_gaussian_orthogonality: panels must be >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(spec.gamma.size());
  const double h = (horizon - t) / panels;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd s(n);
  for (int p = 0; p <= panels; ++p) {
    const double x = static_cast<double>(p) / panels;  // (T - t) / (horizon - t)
    for (Eigen::Index j = 0; j < n; ++j) s(j) = spec.gamma[j] * std::sin((j + 1) * M_PI * x);
    const double w = (p == 0 || p == panels) ? 0.5 * h : h;
    gram.noalias() += w * s * s.transpose();
  }
  return gram;
}

double injectivity_margin(const SpectralData& spec) {
  return spec.lambda.size() ? spec.lambda(spec.lambda.size() - 1) : 0.0;
}

bool is_injective(const SpectralData& spec) { return spec.rank == spec.lambda.size() && spec.rank > 0; }

namespace {

std::string deficient_message(int k, const std::vector<int>& deficient) {
  std::string msg = "Gamma is not injective at t_" + std::to_string(k) + "; zero spectral directions:";
  for (int i : deficient) msg += " g^" + std::to_string(i);
  return msg;
}

}  // namespace

InjectivityError::InjectivityError(int k, std::vector<int> deficient)
    : std::runtime_error(deficient_message(k, deficient)), k_(k), deficient_(std::move(deficient)) {}

GeneralizedStrategy build_generalized_strategy(const SpectralData& spec, const GMetric& metric,
                                               const Eigen::VectorXd& psi, StrategyMode mode) {
  const Eigen::Index n = spec.right.cols();
  if (psi.size() != n) throw std::invalid_argument("build_generalized_strategy: psi length != factor count");
  GeneralizedStrategy out{spec.k, Eigen::VectorXd::Zero(n), {}, metric, true, {}, 0.0};
  for (Eigen::Index i = spec.rank; i < n; ++i) out.deficient.push_back(static_cast<int>(i) + 1);
  out.injective = out.deficient.empty();
  if (!out.injective && mode == StrategyMode::Strict) throw InjectivityError(spec.k, out.deficient);

  const Eigen::VectorXd coords = spec.right.transpose() * psi;
  for (Eigen::Index i = 0; i < spec.rank; ++i) out.spectral(i) = coords(i) / spec.lambda(i);
  out.unattained = coords.tail(n - spec.rank).norm();
  out.whitened = spec.left * out.spectral;
  return out;
}

// --- claims --------------------------------------------------------------------

std::string ClaimSpec::name() const {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, IntegralClaim>) {
          return c.name.empty() ? "integral" : c.name;
        } else if constexpr (std::is_same_v<T, StoppedIntegralClaim>) {
          return "stopped";
        } else {
          return c.kind == FiniteFactorClaim::Kind::Linear ? "linear" : "exponential";
        }
      },
      kind);
}

double ClaimSpec::expectation(double) const {
  if (const auto* f = std::get_if<FiniteFactorClaim>(&kind)) {
    return f->kind == FiniteFactorClaim::Kind::Exponential ? 1.0 : 0.0;
  }
  return 0.0;
}

int ClaimSpec::factors() const {
  if (const auto* f = std::get_if<FiniteFactorClaim>(&kind)) return static_cast<int>(f->a.size());
  if (const auto* s = std::get_if<StoppedIntegralClaim>(&kind)) return static_cast<int>(s->direction.size());
  return 0;
}

ClaimSpec make_zero_claim(int factors) {
  return ClaimSpec{IntegralClaim{"zero", [factors](double) { return Eigen::VectorXd::Zero(factors).eval(); }}};
}

ClaimSpec make_linear_claim(Eigen::VectorXd a) {
  return ClaimSpec{FiniteFactorClaim{FiniteFactorClaim::Kind::Linear, std::move(a)}};
}

ClaimSpec make_exponential_claim(Eigen::VectorXd a) {
  return ClaimSpec{FiniteFactorClaim{FiniteFactorClaim::Kind::Exponential, std::move(a)}};
}

ClaimSpec make_stopped_claim(Eigen::VectorXd direction, double barrier) {
  if (!(barrier > 0.0)) throw std::invalid_argument("stopped claim: barrier must be > 0");
  return ClaimSpec{StoppedIntegralClaim{std::move(direction), barrier}};
}

namespace {

Eigen::VectorXd padded(const Eigen::VectorXd& a, Eigen::Index n) {
  if (a.size() > n) throw std::invalid_argument("claim uses more factors than the truncation provides");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(a.size()) = a;
  return out;
}

}  // namespace

ClaimPath evaluate_claim(const ClaimSpec& claim, const TimeGrid& grid, const Eigen::MatrixXd& increments) {
  const int steps = grid.steps();
  const Eigen::Index n = increments.cols();
  if (increments.rows() != steps) throw std::invalid_argument("evaluate_claim: increments must have one row per step");
  ClaimPath out;
  out.integrand.reserve(static_cast<std::size_t>(steps));

  if (const auto* c = std::get_if<IntegralClaim>(&claim.kind)) {
    for (int k = 0; k < steps; ++k) {
      Eigen::VectorXd psi = c->integrand(grid.node(k));
      if (psi.size() != n) throw std::invalid_argument("evaluate_claim: integrand length != factor count");
      out.value += psi.dot(increments.row(k));
      out.integrand.push_back(std::move(psi));
    }
  } else if (const auto* c = std::get_if<StoppedIntegralClaim>(&claim.kind)) {
    const Eigen::VectorXd d = padded(c->direction, n);
    bool stopped = false;
    for (int k = 0; k < steps; ++k) {
      if (stopped) {
        out.integrand.push_back(Eigen::VectorXd::Zero(n));
        continue;
      }
      out.value += d.dot(increments.row(k));
      out.integrand.push_back(d);
      stopped = std::abs(out.value) >= c->barrier;
    }
  } else {
    const auto& f = std::get<FiniteFactorClaim>(claim.kind);
    const Eigen::VectorXd a = padded(f.a, n);
    const double a2 = a.squaredNorm();
    double w = 0.0;  // a . W_{t_k}
    for (int k = 0; k < steps; ++k) {
      if (f.kind == FiniteFactorClaim::Kind::Linear) {
        out.integrand.push_back(a);
      } else {
        out.integrand.push_back(a * std::exp(w - 0.5 * a2 * grid.node(k)));
      }
      w += a.dot(increments.row(k));
    }
    out.value = f.kind == FiniteFactorClaim::Kind::Linear ? w : std::exp(w - 0.5 * a2 * grid.horizon());
  }
  return out;
}

// --- replication -----------------------------------------------------------------

ReplicationPath replicate_path(const VolatilitySpec& spec, const ClaimSpec& claim, const ForwardSurface& surface,
                               const ReplicationOptions& options) {
  const auto& grid = surface.grid;
  const int steps = grid.steps();
  const int n = surface.truncation.factors;
  if (surface.normals.rows() != steps || surface.normals.cols() != n) {
    throw std::invalid_argument("replicate_path: surface was simulated without retained normals");
  }
  const Eigen::MatrixXd dw = surface.normals * std::sqrt(grid.dt());
  const ClaimPath cp = evaluate_claim(claim, grid, dw);
  const Eigen::MatrixXd discounted = discounted_surface(surface);
  const GMetric metric(grid);

  ReplicationPath out;
  out.claim = cp.value;
  double wealth = claim.expectation(grid.horizon());
  HedgeReport& report = out.report;
  if (options.keep_report) {
    report.claim = cp.value;
    report.initial_capital = wealth;
    report.wealth.reserve(static_cast<std::size_t>(steps) + 1);
    report.wealth.push_back(wealth);
  }
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd& psi = cp.integrand[static_cast<std::size_t>(k)];
    double norm_sq = 0.0;
    if (psi.squaredNorm() > 0.0) {
      const GammaOperator gamma =
          assemble_gamma(path_slice(surface, spec, k, options.cache), discounted.row(k).transpose(), metric);
      const SpectralData sd = spectrum(gamma);
      const GeneralizedStrategy phi = build_generalized_strategy(sd, metric, psi, options.mode);
      const Eigen::VectorXd dwk = dw.row(k).transpose();
      if (phi.injective) {
        const double lin = std::abs(phi(gamma.matrix * dwk) - psi.dot(dwk));
        out.linearized_error = std::max(out.linearized_error, lin);
      } else {
        out.deficient_steps.push_back(k);
      }
      wealth += phi((discounted.row(k + 1) - discounted.row(k)).transpose());
      norm_sq = phi.spectral.squaredNorm();
    }
    if (options.keep_report) {
      report.wealth.push_back(wealth);
      report.norm_profile.push_back(norm_sq);
    }
  }
  out.hedge_terminal = wealth;
  out.residual = out.claim - wealth;
  if (options.keep_report) report.residual = out.residual;
  return out;
}

ReplicationSummary replicate_claim(const ReplicationSetup& setup, int paths) {
  if (paths < 1) throw std::invalid_argument("replicate_claim: paths must be >= 1");
  if (setup.claim.factors() > setup.truncation.factors) {
    throw std::invalid_argument("replicate_claim: claim needs more factors than the truncation");
  }
  std::unique_ptr<VolatilityCache> cache;
  const VolatilitySpec* cached_spec = &setup.spec;
  if (const auto* sw = std::get_if<SignSwitching>(&setup.spec.family)) cached_spec = sw->base.get();
  if (is_deterministic(*cached_spec)) cache = std::make_unique<VolatilityCache>(*cached_spec, setup.grid, setup.truncation);

  const CounterRng rng(setup.seed);
  ReplicationSummary summary;
  summary.paths = parallel_map(static_cast<std::size_t>(paths), setup.threads, [&](std::size_t p) {
    SimulationOptions so;
    so.cache = cache.get();
    const ForwardSurface surface =
        simulate_forward_surface(setup.spec, setup.grid, setup.truncation, setup.initial_curve,
                                 PathNormals(rng, p, Stream::Forward, setup.refinement), so);
    ReplicationOptions ro;
    ro.mode = setup.mode;
    ro.cache = cache.get();
    return replicate_path(setup.spec, setup.claim, surface, ro);
  });
  double sq = 0.0, sum = 0.0;
  for (const auto& p : summary.paths) {
    sq += p.residual * p.residual;
    sum += p.residual;
    summary.max_linearized_error = std::max(summary.max_linearized_error, p.linearized_error);
    if (!p.deficient_steps.empty()) ++summary.paths_with_deficient_steps;
  }
  summary.rms_error = std::sqrt(sq / paths);
  summary.mean_residual = sum / paths;
  return summary;
}

std::vector<ConvergenceRow> convergence_table(ReplicationSetup setup, int fine_steps,
                                              const std::vector<int>& coarsening, int paths) {
  const TimeGrid fine(setup.grid.horizon(), fine_steps);
  if (setup.initial_curve.size() != fine.size()) {
    throw std::invalid_argument("convergence_table: initial curve must live on the fine grid");
  }
  const Eigen::VectorXd fine_curve = setup.initial_curve;
  std::vector<ConvergenceRow> rows;
  for (int r : coarsening) {
    if (r < 1 || fine_steps % r != 0) throw std::invalid_argument("convergence_table: coarsening must divide fine_steps");
    setup.grid = TimeGrid(fine.horizon(), fine_steps / r);
    setup.refinement = r;
    setup.initial_curve.resize(setup.grid.size());
    for (int l = 0; l < setup.grid.size(); ++l) setup.initial_curve(l) = fine_curve(l * r);
    const ReplicationSummary s = replicate_claim(setup, paths);
    rows.push_back({setup.grid.steps(), setup.grid.dt(), s.rms_error, s.max_linearized_error});
  }
  return rows;
}

std::size_t write_replication_csv(const ReplicationSummary& summary, const std::filesystem::path& path) {
  CsvWriter csv(path, {"path", "claim", "hedge_terminal", "residual"});
  for (std::size_t p = 0; p < summary.paths.size(); ++p) {
    const auto& r = summary.paths[p];
    csv.row({std::to_string(p), format_double(r.claim), format_double(r.hedge_terminal), format_double(r.residual)});
  }
  return csv.rows();
}

std::size_t write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::filesystem::path& path) {
  CsvWriter csv(path, {"dt", "rms_error"});
  for (const auto& r : rows) csv.row({format_double(r.dt), format_double(r.rms_error)});
  return csv.rows();
}

// --- finite-factor representation ---------------------------------------------------

ProjectionReport finite_factor_projection(const FiniteFactorClaim& claim, const TimeGrid& grid, std::uint64_t seed,
                                          int paths) {
  if (paths < 2) throw std::invalid_argument("finite_factor_projection: need at least two paths");
  const int n = static_cast<int>(claim.a.size());
  if (n < 1) throw std::invalid_argument("finite_factor_projection: empty claim");
  const double s = grid.horizon();
  const bool expo = claim.kind == FiniteFactorClaim::Kind::Exponential;
  const ClaimSpec spec{claim};
  const double mean = spec.expectation(s);
  const CounterRng rng(seed);
  const double sqdt = std::sqrt(grid.dt());

  std::vector<double> gap_sum(n, 0.0), gap_sq(n, 0.0);
  double var_sum = 0.0, energy_sum = 0.0, diff_sum = 0.0, diff_sq = 0.0;
  Eigen::MatrixXd dw(grid.steps(), n);
  for (int p = 0; p < paths; ++p) {
    const PathNormals normals(rng, static_cast<std::uint64_t>(p));
    for (int k = 0; k < grid.steps(); ++k)
      for (int i = 0; i < n; ++i) dw(k, i) = normals(k, i) * sqdt;
    const ClaimPath cp = evaluate_claim(spec, grid, dw);
    const Eigen::VectorXd w = dw.colwise().sum().transpose();
    for (int m = 1; m <= n; ++m) {
      const double head = claim.a.head(m).dot(w.head(m));
      const double proj = expo ? std::exp(head - 0.5 * claim.a.head(m).squaredNorm() * s) : head;
      const double g = (proj - cp.value) * (proj - cp.value);
      gap_sum[m - 1] += g;
      gap_sq[m - 1] += g * g;
    }
    double energy = 0.0;
    for (const auto& psi : cp.integrand) energy += psi.squaredNorm() * grid.dt();
    const double v = (cp.value - mean) * (cp.value - mean);
    var_sum += v;
    energy_sum += energy;
    diff_sum += v - energy;
    diff_sq += (v - energy) * (v - energy);
  }
  ProjectionReport report;
  for (int m = 1; m <= n; ++m) {
    ProjectionRow row;
    row.retained = m;
    row.mc_gap = gap_sum[m - 1] / paths;
    row.mc_gap_se = std::sqrt(std::max(gap_sq[m - 1] / paths - row.mc_gap * row.mc_gap, 0.0) / paths);
    const double head = claim.a.head(m).squaredNorm();
    const double tail = claim.a.tail(n - m).squaredNorm();
    row.exact_gap = expo ? std::exp(head * s) * std::expm1(tail * s) : tail * s;
    report.rows.push_back(row);
  }
  report.variance = var_sum / paths;
  report.integrand_energy = energy_sum / paths;
  report.isometry_gap = diff_sum / paths;
  report.isometry_se = std::sqrt(std::max(diff_sq / paths - report.isometry_gap * report.isometry_gap, 0.0) / paths);
  return report;
}

}  // namespace hjm
