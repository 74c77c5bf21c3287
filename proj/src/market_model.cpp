#include "hjm/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjm/csv.hpp"
#include "hjm/errors.hpp"

namespace hjm {

Eigen::VectorXd flat_curve(const TimeGrid& grid, double rate) {
  if (!std::isfinite(rate)) throw std::invalid_argument("flat_curve: rate not finite");
  return Eigen::VectorXd::Constant(grid.size(), rate);
}

Eigen::VectorXd read_initial_curve(std::istream& in, const TimeGrid& grid) {
  std::vector<double> maturities;
  std::vector<double> rates;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double m = 0.0;
    double r = 0.0;
    if (!(fields >> m >> r)) {
      if (maturities.empty() && line_no == 1) continue;  // header
      throw std::invalid_argument("initial curve: cannot parse line " + std::to_string(line_no));
    }
    if (!std::isfinite(m) || !std::isfinite(r)) {
      throw std::invalid_argument("initial curve: non-finite value on line " + std::to_string(line_no));
    }
    if (!maturities.empty() && m <= maturities.back()) {
      throw std::invalid_argument("initial curve: maturities must increase (line " + std::to_string(line_no) + ")");
    }
    maturities.push_back(m);
    rates.push_back(r);
  }
  if (maturities.empty()) throw std::invalid_argument("initial curve: no data rows");

  Eigen::VectorXd curve(grid.size());
  std::size_t j = 0;
  for (int l = 0; l < grid.size(); ++l) {
    const double T = grid.node(l);
    if (T <= maturities.front()) {
      curve(l) = rates.front();
    } else if (T >= maturities.back()) {
      curve(l) = rates.back();
    } else {
      while (maturities[j + 1] < T) ++j;
      const double w = (T - maturities[j]) / (maturities[j + 1] - maturities[j]);
      curve(l) = (1.0 - w) * rates[j] + w * rates[j + 1];
    }
  }
  return curve;
}

Eigen::VectorXd read_initial_curve(const std::filesystem::path& path, const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("initial curve: cannot open " + path.string());
  return read_initial_curve(in, grid);
}

std::span<const double> ForwardSurface::running_at(int k) const {
  if (running.size() == 0) return {};
  // Stored as (l, k) so the state at t_k is a contiguous column.
  return {running.col(k).data(), static_cast<std::size_t>(running.rows())};
}

ForwardSurface simulate_forward_surface(const VolatilitySpec& spec, const TimeGrid& grid,
                                        const FactorTruncation& truncation,
                                        const Eigen::VectorXd& initial_curve, const PathNormals& normals,
                                        const SimulationOptions& options) {
  validate(spec, grid, truncation);
  const int rows = grid.size();
  const int steps = grid.steps();
  const int n = truncation.factors;
  if (initial_curve.size() != rows) throw std::invalid_argument("simulate: initial curve length != grid size");
  for (int l = 0; l < rows; ++l) {
    if (!std::isfinite(initial_curve(l))) throw NumericalError("non-finite initial curve", 0, l);
  }

  const auto* switching = std::get_if<SignSwitching>(&spec.family);
  const VolatilitySpec& base = switching ? *switching->base : spec;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);

  ForwardSurface s{grid, truncation, {}, {}, {}, {}, 0, normals.path()};
  s.f.setZero(rows, rows);
  s.alpha.setZero(rows, rows);
  s.f.row(0) = initial_curve.transpose();
  if (switching) s.running.setZero(rows, rows);  // (l, k): column k is the state at t_k
  if (options.retain_normals) s.normals.setZero(steps, n);

  Eigen::VectorXd z(n);
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < n; ++i) z(i) = normals(k, i);
    if (options.retain_normals) s.normals.row(k) = z.transpose();

    VolatilitySlice owned;
    const VolatilitySlice* base_slice = nullptr;
    if (options.cache) {
      base_slice = &options.cache->at(k);
    } else {
      owned = volatility_slice(base, grid, truncation, k);
      base_slice = &owned;
    }

    const VolatilitySlice* slice = base_slice;
    VolatilitySlice switched;
    if (switching) {
      switched = switch_slice(*base_slice, s.running_at(k), dt);
      slice = &switched;
      const Eigen::VectorXd base_shock = base_slice->sigma * z * sqdt;
      s.running.col(k + 1) = s.running.col(k) + base_shock;
    }

    const Eigen::VectorXd shock = slice->sigma * z * sqdt;
    s.alpha.row(k) = slice->drift.transpose();
    s.f.row(k + 1) = s.f.row(k);
    for (int l = k + 1; l < rows; ++l) {
      const double next = s.f(k, l) + slice->drift(l) * dt + shock(l);
      if (!std::isfinite(next)) throw NumericalError("non-finite forward rate", k + 1, l);
      s.f(k + 1, l) = next;
    }
  }
  return s;
}

namespace {

// Cumulative trapezoid of row k of f over maturity nodes 0..l.
Eigen::VectorXd cumulative_integral(const ForwardSurface& surface, int k) {
  const int rows = surface.grid.size();
  const double dt = surface.grid.dt();
  Eigen::VectorXd acc(rows);
  acc(0) = 0.0;
  for (int l = 1; l < rows; ++l) acc(l) = acc(l - 1) + 0.5 * dt * (surface.f(k, l - 1) + surface.f(k, l));
  return acc;
}

}  // namespace

DiscountedCurve discounted_curve(const ForwardSurface& surface, int k) {
  if (k < 0 || k > surface.grid.steps()) throw std::out_of_range("discounted_curve: time index out of range");
  const Eigen::VectorXd acc = cumulative_integral(surface, k);
  DiscountedCurve curve;
  curve.k = k;
  curve.discounted = (-acc.array()).exp().matrix();
  curve.price = (-(acc.array() - acc(k))).exp().matrix();
  return curve;
}

Eigen::MatrixXd discounted_surface(const ForwardSurface& surface) {
  const int rows = surface.grid.size();
  Eigen::MatrixXd out(rows, rows);
  for (int k = 0; k < rows; ++k) out.row(k) = (-cumulative_integral(surface, k).array()).exp().matrix().transpose();
  return out;
}

RatePath rate_path(const ForwardSurface& surface) {
  const int rows = surface.grid.size();
  const double dt = surface.grid.dt();
  RatePath path;
  path.short_rate = surface.f.diagonal();
  path.bank.resize(rows);
  double log_bank = 0.0;
  path.bank(0) = 1.0;
  for (int k = 1; k < rows; ++k) {
    log_bank += 0.5 * dt * (path.short_rate(k - 1) + path.short_rate(k));
    path.bank(k) = std::exp(log_bank);
  }
  return path;
}

std::size_t write_surface_csv(const ForwardSurface& surface, const std::filesystem::path& path) {
  CsvWriter csv(path, {"t", "T", "f", "alpha"});
  const auto& grid = surface.grid;
  for (int k = 0; k < grid.size(); ++k) {
    for (int l = 0; l < grid.size(); ++l) {
      csv.row({format_double(grid.node(k)), format_double(grid.node(l)), format_double(surface.f(k, l)),
               format_double(surface.alpha(k, l))});
    }
  }
  return csv.rows();
}

}  // namespace hjm
