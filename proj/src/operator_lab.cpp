#include "hjm/operator_lab.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "hjm/csv.hpp"
#include "hjm/errors.hpp"

namespace hjm {

void GMetric::check(Eigen::Index n) const {
  if (n != grid_.size()) {
    throw std::invalid_argument("GMetric: curve has " + std::to_string(n) + " values, grid has " +
                                std::to_string(grid_.size()) + " nodes");
  }
}

Eigen::VectorXd GMetric::whiten(const Eigen::VectorXd& g) const {
  check(g.size());
  const double scale = 1.0 / std::sqrt(grid_.dt());
  Eigen::VectorXd w(g.size());
  w(0) = g(0);
  for (Eigen::Index l = 1; l < g.size(); ++l) w(l) = (g(l) - g(l - 1)) * scale;
  return w;
}

Eigen::MatrixXd GMetric::whiten(const Eigen::MatrixXd& columns) const {
  check(columns.rows());
  const double scale = 1.0 / std::sqrt(grid_.dt());
  Eigen::MatrixXd w(columns.rows(), columns.cols());
  w.row(0) = columns.row(0);
  const Eigen::Index m = columns.rows() - 1;
  w.bottomRows(m) = (columns.bottomRows(m) - columns.topRows(m)) * scale;
  return w;
}

Eigen::VectorXd GMetric::unwhiten(const Eigen::VectorXd& w) const {
  check(w.size());
  const double step = std::sqrt(grid_.dt());
  Eigen::VectorXd g(w.size());
  g(0) = w(0);
  for (Eigen::Index l = 1; l < w.size(); ++l) g(l) = g(l - 1) + step * w(l);
  return g;
}

double GMetric::inner(const Eigen::VectorXd& g, const Eigen::VectorXd& h) const {
  return whiten(g).dot(whiten(h));
}

Eigen::MatrixXd GMetric::gram() const {
  const int n = grid_.size();
  const double inv = 1.0 / grid_.dt();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m(0, 0) = 1.0;
  for (int l = 0; l + 1 < n; ++l) {
    m(l, l) += inv;
    m(l + 1, l + 1) += inv;
    m(l, l + 1) -= inv;
    m(l + 1, l) -= inv;
  }
  return m;
}

double g_norm(const Eigen::VectorXd& values, const GMetric& metric) { return metric.whiten(values).norm(); }

Eigen::VectorXd GammaOperator::apply_q(const Eigen::VectorXd& g) const {
  return matrix * gamma_adjoint(*this, g);
}

GammaOperator assemble_gamma(const VolatilitySlice& slice, const Eigen::VectorXd& discounted,
                             const GMetric& metric) {
  if (discounted.size() != slice.integral.rows()) {
    throw std::invalid_argument("assemble_gamma: discounted curve length mismatch");
  }
  GammaOperator gamma{slice.k, {}, -slice.integral, metric};
  gamma.matrix = discounted.asDiagonal() * gamma.b;
  return gamma;
}

VolatilitySlice path_slice(const ForwardSurface& surface, const VolatilitySpec& spec, int k,
                           const VolatilityCache* cache) {
  const auto& grid = surface.grid;
  if (const auto* switching = std::get_if<SignSwitching>(&spec.family)) {
    const VolatilitySlice base =
        cache ? cache->at(k) : volatility_slice(*switching->base, grid, surface.truncation, k);
    return switch_slice(base, surface.running_at(k), grid.dt());
  }
  return cache ? cache->at(k) : volatility_slice(spec, grid, surface.truncation, k);
}

GammaOperator assemble_gamma(const ForwardSurface& surface, const VolatilitySpec& spec, int k,
                             const VolatilityCache* cache) {
  return assemble_gamma(path_slice(surface, spec, k, cache), discounted_curve(surface, k).discounted,
                        GMetric(surface.grid));
}

GammaOperator gamma_from_columns(const Eigen::MatrixXd& columns, const TimeGrid& grid, int k) {
  if (columns.rows() != grid.size()) throw std::invalid_argument("gamma_from_columns: row count != grid size");
  return GammaOperator{k, columns, Eigen::MatrixXd::Zero(columns.rows(), columns.cols()), GMetric(grid)};
}

Eigen::VectorXd gamma_adjoint(const GammaOperator& gamma, const Eigen::VectorXd& g) {
  return gamma.whitened().transpose() * gamma.metric.whiten(g);
}

double hs_norm(const GammaOperator& gamma) { return gamma.whitened().norm(); }

SpectralData spectrum(const GammaOperator& gamma) {
  const Eigen::MatrixXd a = gamma.whitened();
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      if (!std::isfinite(a(r, c))) {
        throw NumericalError("spectrum: non-finite operator entry", gamma.k, static_cast<int>(r));
      }
    }
  }
  const Eigen::Index n = a.cols();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::Index found = svd.singularValues().size();

  SpectralData out;
  out.k = gamma.k;
  out.lambda = Eigen::VectorXd::Zero(n);
  out.lambda.head(found) = svd.singularValues();
  out.right = svd.matrixV();
  out.left = Eigen::MatrixXd::Zero(a.rows(), n);
  out.left.leftCols(found) = svd.matrixU();
  // Canonical sign: the largest-magnitude entry of each g^i is positive.
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    out.right.col(i).cwiseAbs().maxCoeff(&arg);
    if (out.right(arg, i) < 0.0) {
      out.right.col(i) *= -1.0;
      out.left.col(i) *= -1.0;
    }
  }
  const double top = n > 0 ? out.lambda(0) : 0.0;
  out.rank = 0;
  if (top > 0.0) {
    while (out.rank < n && out.lambda(out.rank) > kRankTolerance * top) ++out.rank;
  }
  return out;
}

Eigen::VectorXd min_norm_preimage(const SpectralData& spec, const GMetric& metric, const Eigen::VectorXd& g) {
  const Eigen::VectorXd w = metric.whiten(g);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(spec.right.rows());
  for (int i = 0; i < spec.rank; ++i) u += spec.right.col(i) * (spec.left.col(i).dot(w) / spec.lambda(i));
  return u;
}

namespace {

double trapezoid_h_norm_sq(const VolatilitySlice& slice, int factor, double dt) {
  const Eigen::Index rows = slice.sigma.rows();
  double acc = 0.0;
  double prev = slice.left_limit(factor) * slice.left_limit(factor);
  for (Eigen::Index l = slice.k + 1; l < rows; ++l) {
    const double cur = slice.sigma(l, factor) * slice.sigma(l, factor);
    acc += 0.5 * dt * (prev + cur);
    prev = cur;
  }
  return acc;
}

}  // namespace

BoundReport proposition1_report(const ForwardSurface& surface, const VolatilitySpec& spec, double slack_c,
                                const VolatilityCache* cache) {
  const auto& grid = surface.grid;
  const int rows = grid.size();
  const double dt = grid.dt();
  const Eigen::MatrixXd discounted = discounted_surface(surface);

  BoundReport report;
  report.slack_c = slack_c;
  for (int k = 0; k < rows; ++k) {
    const Eigen::VectorXd sq = surface.f.row(k).transpose().array().square().matrix();
    double h2 = 0.0;
    for (int l = 1; l < rows; ++l) h2 += 0.5 * dt * (sq(l - 1) + sq(l));
    report.a = std::max(report.a, std::sqrt(h2));
  }
  report.b = discounted.cwiseAbs().maxCoeff();

  const double factor = 2.0 * report.b * report.b * (grid.horizon() * report.a + 1.0);
  const GMetric metric(grid);
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < rows; ++k) {
    const VolatilitySlice slice = path_slice(surface, spec, k, cache);
    const GammaOperator gamma = assemble_gamma(slice, discounted.row(k).transpose(), metric);
    const Eigen::MatrixXd w = gamma.whitened();
    if (k < grid.steps()) report.hs_time_integral += w.squaredNorm() * dt;
    for (int i = 0; i < gamma.factors(); ++i) {
      const double lhs = w.col(i).squaredNorm();
      const double rhs = factor * trapezoid_h_norm_sq(slice, i, dt);
      ++report.checks;
      report.worst_margin = std::min(report.worst_margin, rhs - lhs);
      if (lhs > rhs + slack_c * dt) ++report.violations;
      report.required_c = std::max(report.required_c, (lhs - rhs) / dt);
    }
  }
  return report;
}

std::size_t write_spectrum_csv(const std::vector<SpectralData>& spectra, const std::filesystem::path& path) {
  CsvWriter csv(path, {"k", "i", "lambda"});
  for (const auto& s : spectra) {
    for (Eigen::Index i = 0; i < s.lambda.size(); ++i) {
      csv.row({std::to_string(s.k), std::to_string(i + 1), format_double(s.lambda(i))});
    }
  }
  return csv.rows();
}

std::size_t write_gamma_csv(const GammaOperator& gamma, const std::filesystem::path& path) {
  std::vector<std::string> header{"l", "T"};
  for (int i = 1; i <= gamma.factors(); ++i) header.push_back("gamma_" + std::to_string(i));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const auto& grid = gamma.metric.grid();
  for (int l = 0; l < grid.size(); ++l) {
    out << l << ',' << format_double(grid.node(l));
    for (int i = 0; i < gamma.factors(); ++i) out << ',' << format_double(gamma.matrix(l, i));
    out << '\n';
  }
  return static_cast<std::size_t>(grid.size());
}

}  // namespace hjm
