#include "hjm/incompleteness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hjm/csv.hpp"

namespace hjm {

PsiTilde build_psi_tilde(const Eigen::VectorXd& lambda, int max_indices) {
  const Eigen::Index n = lambda.size();
  PsiTilde out;
  out.coefficients = Eigen::VectorXd::Zero(n);
  const double top = n > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0;
  Eigen::Index i = 0;
  for (int k = 1; k <= max_indices && i < n; ++k) {
    // i_1 and i_2 both use threshold 1; after that i_{k} uses k - 1.
    const double threshold = k == 1 ? 1.0 : static_cast<double>(k - 1);
    while (i < n) {
      const double l = lambda(i);
      const bool zero = !(l > kRankTolerance * top);
      if (zero || l * threshold <= 1.0) break;
      ++i;
    }
    if (i == n) break;
    out.indices.push_back(static_cast<int>(i) + 1);
    out.coefficients(i) = 1.0 / k;
    ++i;
  }
  return out;
}

Eigen::VectorXd spectral_to_l2(const Eigen::VectorXd& coefficients, const SpectralData& spec) {
  if (coefficients.size() != spec.right.cols()) {
    throw std::invalid_argument("spectral_to_l2: coefficient length != factor count");
  }
  return spec.right * coefficients;
}

double guaranteed_divergence_bound(int count) {
  if (count <= 0) return 0.0;
  double acc = 1.0;
  for (int k = 2; k <= count; ++k) {
    const double r = static_cast<double>(k - 1) / k;
    acc += r * r;
  }
  return acc;
}

MinNormPortfolio min_norm_portfolio(const SpectralData& spec, const GMetric& metric, const Eigen::VectorXd& target) {
  const Eigen::Index n = spec.right.cols();
  if (target.size() != n) throw std::invalid_argument("min_norm_portfolio: target length != factor count");
  const Eigen::VectorXd coords = spec.right.transpose() * target;
  MinNormPortfolio out;
  out.spectral = Eigen::VectorXd::Zero(n);
  double residual_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spec.positive(static_cast<int>(i))) {
      out.spectral(i) = coords(i) / spec.lambda(i);
    } else {
      residual_sq += coords(i) * coords(i);
    }
  }
  out.whitened = spec.left * out.spectral;
  out.representer = metric.unwhiten(out.whitened);
  out.norm_sq = out.spectral.squaredNorm();
  out.residual_norm = std::sqrt(residual_sq);
  return out;
}

DivergenceTable divergence_profile(const SpectralData& spec, const GMetric& metric, int max_count) {
  if (max_count < 1) throw std::invalid_argument("divergence_profile: max_count must be >= 1");
  const PsiTilde psi = build_psi_tilde(spec.lambda, max_count);
  DivergenceTable table;
  table.time_index = spec.k;
  table.factors = static_cast<int>(spec.lambda.size());
  table.indices = psi.indices;
  table.insufficient = static_cast<int>(psi.indices.size()) < max_count;

  Eigen::VectorXd truncated = Eigen::VectorXd::Zero(spec.lambda.size());
  for (std::size_t k = 0; k < psi.indices.size(); ++k) {
    const int i = psi.indices[k] - 1;
    truncated(i) = psi.coefficients(i);
    const MinNormPortfolio phi = min_norm_portfolio(spec, metric, spectral_to_l2(truncated, spec));
    DivergenceRow row;
    row.count = static_cast<int>(k) + 1;
    // A selected direction outside the range cannot be reached by any finite portfolio.
    row.min_norm_sq = phi.residual_norm > 0.0 ? std::numeric_limits<double>::infinity() : phi.norm_sq;
    row.guaranteed = guaranteed_divergence_bound(row.count);
    table.rows.push_back(row);
  }
  return table;
}

DivergenceTable divergence_profile(const ForwardSurface& surface, const VolatilitySpec& spec, int max_count,
                                   int time_index) {
  const GammaOperator gamma = assemble_gamma(surface, spec, time_index);
  return divergence_profile(spectrum(gamma), gamma.metric, max_count);
}

std::size_t write_divergence_csv(const DivergenceTable& table, const std::filesystem::path& path) {
  CsvWriter csv(path, {"K", "min_norm_sq"});
  for (const auto& row : table.rows) csv.row({std::to_string(row.count), format_double(row.min_norm_sq)});
  return csv.rows();
}

ClaimSample nonreplicable_claim(const ForwardSurface& surface, const VolatilitySpec& spec,
                                const ClaimOptions& options) {
  const auto& grid = surface.grid;
  const int steps = grid.steps();
  const int n = surface.truncation.factors;
  if (surface.normals.rows() != steps || surface.normals.cols() != n) {
    throw std::invalid_argument("nonreplicable_claim: surface was simulated without retained normals");
  }
  const double sqdt = std::sqrt(grid.dt());
  const Eigen::MatrixXd discounted = discounted_surface(surface);
  const GMetric metric(grid);

  auto spectrum_at = [&](int k) {
    return spectrum(assemble_gamma(path_slice(surface, spec, k, options.cache), discounted.row(k).transpose(), metric));
  };

  ClaimSample sample;
  PsiProcess process;
  process.running = Eigen::VectorXd::Zero(steps + 1);
  process.tau_index = steps;
  auto& report = sample.report;
  report.wealth.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  report.norm_profile.assign(static_cast<std::size_t>(steps), 0.0);

  PsiTilde frozen;
  SpectralData frozen_spec;
  if (options.mode == SpectrumMode::Frozen) {
    frozen_spec = spectrum_at(0);
    frozen = build_psi_tilde(frozen_spec.lambda);
  }

  double running = 0.0;
  double wealth = 0.0;
  bool stopped = false;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
    std::vector<int> indices;
    if (!stopped) {
      const SpectralData current = spectrum_at(k);
      if (options.mode == SpectrumMode::Frozen) {
        psi = spectral_to_l2(frozen.coefficients, frozen_spec);
        indices = frozen.indices;
      } else {
        const PsiTilde tilde = build_psi_tilde(current.lambda);
        psi = spectral_to_l2(tilde.coefficients, current);
        indices = tilde.indices;
      }
      sample.max_psi_norm_sq = std::max(sample.max_psi_norm_sq, psi.squaredNorm());

      const MinNormPortfolio phi = min_norm_portfolio(current, metric, psi);
      report.norm_profile[static_cast<std::size_t>(k)] = phi.norm_sq;
      if (k == 0) {
        Eigen::VectorXd partial = Eigen::VectorXd::Zero(n);
        const Eigen::VectorXd coords = current.right.transpose() * psi;
        for (int idx : indices) {
          partial(idx - 1) = coords(idx - 1);
          const MinNormPortfolio p = min_norm_portfolio(current, metric, spectral_to_l2(partial, current));
          report.truncation_profile.push_back(p.residual_norm > 0.0 ? std::numeric_limits<double>::infinity()
                                                                    : p.norm_sq);
        }
      }

      const Eigen::VectorXd dw = surface.normals.row(k).transpose() * sqdt;
      const double increment = psi.dot(dw);
      // The hedge delivers Gamma* phi, the attainable part of psi.
      const Eigen::VectorXd attained = current.right * (current.lambda.cwiseProduct(phi.spectral));
      wealth += attained.dot(dw);
      running += increment;
      sample.max_increment = std::max(sample.max_increment, std::abs(increment));
      if (std::abs(running) >= 1.0) {
        stopped = true;
        process.tau_index = k + 1;
      }
    }
    process.running(k + 1) = running;
    report.wealth[static_cast<std::size_t>(k) + 1] = wealth;
    if (options.retain_process) {
      process.psi.push_back(std::move(psi));
      process.indices.push_back(std::move(indices));
    }
  }

  sample.xi = running;
  sample.tau_index = process.tau_index;
  sample.tau = grid.node(process.tau_index);
  sample.stopped = stopped;
  sample.overshoot = std::max(std::abs(running) - 1.0, 0.0);
  report.claim = running;
  report.initial_capital = 0.0;
  report.residual = running - wealth;
  if (options.retain_process) sample.process = std::move(process);
  return sample;
}

bool AdmissibilityReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AdmissibilityCheck& c) { return c.passed; });
}

namespace {

const VolatilitySpec& switching_base(const VolatilitySpec& spec) {
  const auto* switching = std::get_if<SignSwitching>(&spec.family);
  if (!switching || !switching->base) throw std::invalid_argument("expected a sign-switching volatility spec");
  return *switching->base;
}

double trapezoid(const Eigen::VectorXd& v, double dt) {
  if (v.size() < 2) return 0.0;
  return dt * (v.sum() - 0.5 * (v(0) + v(v.size() - 1)));
}

double quad_sq_from(const VolatilitySlice& slice, int factor, double dt) {
  const Eigen::Index rows = slice.sigma.rows();
  double prev = slice.left_limit(factor) * slice.left_limit(factor);
  double acc = 0.0;
  for (Eigen::Index l = slice.k + 1; l < rows; ++l) {
    const double cur = slice.sigma(l, factor) * slice.sigma(l, factor);
    acc += 0.5 * dt * (prev + cur);
    prev = cur;
  }
  return acc;
}

}  // namespace

void validate_switching_base(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation) {
  const VolatilitySpec& base = switching_base(spec);
  if (!is_deterministic(base)) throw std::invalid_argument("switching base must be deterministic");
  validate(base, grid, truncation);
  const double dt = grid.dt();
  for (int k = 0; k < grid.size(); ++k) {
    const VolatilitySlice slice = volatility_slice(base, grid, truncation, k);
    for (int i = 0; i < truncation.factors; ++i) {
      if (slice.sigma.col(i).minCoeff() < 0.0 || slice.left_limit(i) < 0.0) {
        throw std::invalid_argument("switching base: negative volatility for factor " + std::to_string(i + 1));
      }
      const double bound = 1.0 / ((i + 1.0) * (i + 1.0));
      const double h2 = quad_sq_from(slice, i, dt);
      if (h2 > bound * (1.0 + 1e-12)) {
        throw std::invalid_argument("switching base: |sigma^" + std::to_string(i + 1) + "(t_" + std::to_string(k) +
                                    ", .)|_H^2 = " + format_double(h2) + " exceeds 1/i^2");
      }
    }
  }
}

double switching_rate_slack(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation) {
  const VolatilitySpec& base = switching_base(spec);
  Eigen::VectorXd sup = Eigen::VectorXd::Zero(truncation.factors);
  for (int k = 0; k < grid.size(); ++k) {
    const VolatilitySlice slice = volatility_slice(base, grid, truncation, k);
    for (int i = 0; i < truncation.factors; ++i) {
      sup(i) = std::max({sup(i), slice.sigma.col(i).cwiseAbs().maxCoeff(), std::abs(slice.left_limit(i))});
    }
  }
  return 3.0 * std::sqrt(grid.dt()) * sup.norm();
}

AdmissibilityAccumulator::AdmissibilityAccumulator(const VolatilitySpec& spec, const TimeGrid& grid,
                                                   const FactorTruncation& truncation)
    : grid_(grid) {
  validate_switching_base(spec, grid, truncation);
  base_ = std::make_shared<const VolatilityCache>(switching_base(spec), grid, truncation);
  double basel = 0.0;
  for (int i = 1; i <= truncation.factors; ++i) basel += 1.0 / (static_cast<double>(i) * i);
  bound_ = grid.horizon() * grid.horizon() * basel;
  slack_ = switching_rate_slack(spec, grid, truncation);
}

void AdmissibilityAccumulator::add(const ForwardSurface& surface) {
  if (!(surface.grid == grid_)) throw std::invalid_argument("AdmissibilityAccumulator: grid mismatch");
  const int rows = grid_.size();
  const double dt = grid_.dt();
  const Eigen::MatrixXd discounted = discounted_surface(surface);

  for (Eigen::Index k = 0; k < surface.f.rows(); ++k) {
    for (Eigen::Index l = 0; l < surface.f.cols(); ++l) {
      const double f = surface.f(k, l);
      min_rate_ = std::min(min_rate_, f);
      if (f < -slack_) ++rate_violations_;
      const double p = discounted(k, l);
      max_discounted_ = std::max(max_discounted_, p);
      if (p > 1.0 + 1e-12) ++discounted_violations_;
    }
  }

  // Sample density strategies phi(T): 1, T / horizon, sin(pi T / horizon).
  Eigen::MatrixXd phis(rows, 3);
  for (int l = 0; l < rows; ++l) {
    const double x = grid_.node(l) / grid_.horizon();
    phis(l, 0) = 1.0;
    phis(l, 1) = x;
    phis(l, 2) = std::sin(M_PI * x);
  }
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(rows, dt);
  weights(0) = weights(rows - 1) = 0.5 * dt;

  for (int k = 0; k < rows; ++k) {
    const VolatilitySlice slice = switch_slice(base_->at(k), surface.running_at(k), dt);
    const Eigen::MatrixXd b = -slice.integral;
    const Eigen::VectorXd p = discounted.row(k).transpose();
    double loading = 0.0;
    for (Eigen::Index i = 0; i < b.cols(); ++i) loading += trapezoid(b.col(i).array().square().matrix(), dt);
    max_loading_ = std::max(max_loading_, loading);
    if (loading > bound_) ++loading_violations_;

    for (Eigen::Index j = 0; j < phis.cols(); ++j) {
      const Eigen::VectorXd phi = phis.col(j);
      const Eigen::VectorXd weighted = weights.cwiseProduct(phi).cwiseProduct(p);
      const double lhs = (b.transpose() * weighted).squaredNorm();
      const double phi_sq = weights.dot(phi.cwiseProduct(phi));
      const double middle = phi_sq * loading;
      const double right = bound_ * phi_sq;
      worst_chain_first_ = std::min(worst_chain_first_, middle - lhs);
      worst_chain_second_ = std::min(worst_chain_second_, right - middle);
      if (lhs > middle * (1.0 + 1e-12) || middle > right * (1.0 + 1e-12)) ++chain_violations_;
    }
  }
}

void AdmissibilityAccumulator::merge(const AdmissibilityAccumulator& other) {
  min_rate_ = std::min(min_rate_, other.min_rate_);
  max_discounted_ = std::max(max_discounted_, other.max_discounted_);
  max_loading_ = std::max(max_loading_, other.max_loading_);
  worst_chain_first_ = std::min(worst_chain_first_, other.worst_chain_first_);
  worst_chain_second_ = std::min(worst_chain_second_, other.worst_chain_second_);
  rate_violations_ += other.rate_violations_;
  discounted_violations_ += other.discounted_violations_;
  loading_violations_ += other.loading_violations_;
  chain_violations_ += other.chain_violations_;
}

AdmissibilityReport AdmissibilityAccumulator::report() const {
  AdmissibilityReport r;
  r.loading_bound = bound_;
  r.rate_slack = slack_;
  r.min_rate = std::isfinite(min_rate_) ? min_rate_ : 0.0;
  r.max_discounted = max_discounted_;
  r.checks.push_back({"rates_nonnegative", rate_violations_ == 0, r.min_rate + slack_, rate_violations_});
  r.checks.push_back({"discounted_le_one", discounted_violations_ == 0, 1.0 + 1e-12 - max_discounted_,
                      discounted_violations_});
  r.checks.push_back({"loading_bound", loading_violations_ == 0, bound_ - max_loading_, loading_violations_});
  const double chain = std::min(worst_chain_first_, worst_chain_second_);
  r.checks.push_back(
      {"strategy_chain", chain_violations_ == 0, std::isfinite(chain) ? chain : 0.0, chain_violations_});
  return r;
}

std::size_t write_admissibility_csv(const AdmissibilityReport& report, const std::filesystem::path& path) {
  CsvWriter csv(path, {"check", "passed", "margin"});
  for (const auto& c : report.checks) csv.row({c.name, c.passed ? "1" : "0", format_double(c.margin)});
  return csv.rows();
}

}  // namespace hjm
