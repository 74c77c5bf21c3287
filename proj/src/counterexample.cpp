#include "hjm/counterexample.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hjm/csv.hpp"

namespace hjm {

std::vector<double> counterexample_grid(int steps, double eps) {
  if (steps < 1) throw std::invalid_argument("counterexample_grid: steps must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("counterexample_grid: eps must lie in (0, 1)");
  const double umax = -std::log(eps);
  std::vector<double> nodes(static_cast<std::size_t>(steps) + 2);
  for (int j = 0; j <= steps; ++j) nodes[j] = -std::expm1(-umax * j / steps);
  nodes[steps] = 1.0 - eps;
  nodes[steps + 1] = 1.0;
  return nodes;
}

CounterexamplePath counterexample_from_increments(const std::vector<double>& nodes, const std::vector<double>& db,
                                                  std::optional<double> control) {
  if (nodes.size() < 2 || db.size() != nodes.size() - 1) {
    throw std::invalid_argument("counterexample: need one increment per grid interval");
  }
  CounterexamplePath out;
  const int last = static_cast<int>(nodes.size()) - 1;
  double b = 0.0;
  double ito = 0.0;
  double quad = 0.0;   // int X^2 dt
  double drift = 0.0;  // int B^2((1-s)^-4 - (1-s)^-3) ds, left points
  if (control) {
    for (int j = 0; j < last; ++j) {
      const double dt = nodes[j + 1] - nodes[j];
      ito += *control * db[j];
      quad += *control * *control * dt;
      b += db[j];
    }
    out.tau = nodes[last];
    out.tau_index = last;
    out.terminal_b = b;
    out.energy = quad;
    out.log_exponent = ito - 0.5 * quad;
    out.terminal = std::exp(out.log_exponent);
    out.identity = out.log_exponent;
    return out;
  }
  int j = 0;
  for (; j < last; ++j) {
    if (j > 0 && b * b + nodes[j] >= 1.0) break;
    const double s = 1.0 - nodes[j];
    const double dt = nodes[j + 1] - nodes[j];
    const double x = -2.0 * b / (s * s);
    ito += x * db[j];
    quad += x * x * dt;
    drift += b * b * (1.0 / (s * s * s * s) - 1.0 / (s * s * s)) * dt;
    b += db[j];
  }
  out.tau_index = j;
  out.tau = nodes[j];
  // At t = 1 the crossing condition always holds; reaching it means no earlier crossing.
  out.forced = j == last;
  out.terminal_b = b;
  out.energy = quad;
  out.log_exponent = ito - 0.5 * quad;
  out.terminal = std::exp(out.log_exponent);
  const double s = 1.0 - out.tau;
  out.identity = s > 0.0 ? -1.0 - (b * b - s) / (s * s) - 2.0 * drift : -1.0 - 2.0 * drift;
  return out;
}

CounterexamplePath simulate_counterexample(const CounterRng& rng, std::uint64_t path,
                                           const CounterexampleOptions& options) {
  if (options.refinement < 1) throw std::invalid_argument("simulate_counterexample: refinement must be >= 1");
  const int r = options.refinement;
  const std::vector<double> fine = counterexample_grid(options.steps * r, options.eps);
  const std::vector<double> coarse = counterexample_grid(options.steps, options.eps);
  const auto stream = static_cast<std::uint64_t>(Stream::Counterexample);
  const std::size_t intervals = coarse.size() - 1;
  std::vector<double> db(intervals, 0.0);
  // Geometric part: coarse interval j is the union of fine intervals j r .. j r + r - 1.
  for (std::size_t j = 0; j + 1 < intervals; ++j) {
    for (int q = 0; q < r; ++q) {
      const std::size_t f = j * r + q;
      db[j] += std::sqrt(fine[f + 1] - fine[f]) * rng.normal(stream, path, f, 0);
    }
  }
  // Final interval [1 - eps, 1] uses one draw shared across refinements.
  constexpr std::uint64_t kFinalStep = 1ull << 40;
  db[intervals - 1] = std::sqrt(options.eps) * rng.normal(stream, path, kFinalStep, 0);
  return counterexample_from_increments(coarse, db, options.control);
}

ExpectationGap expectation_gap(const std::vector<CounterexamplePath>& paths) {
  ExpectationGap g;
  double sum = 0.0, sq = 0.0;
  for (const auto& p : paths) {
    if (p.forced) {
      ++g.excluded;
      continue;
    }
    sum += p.terminal;
    sq += p.terminal * p.terminal;
    ++g.paths;
  }
  if (g.paths < 2) throw std::invalid_argument("expectation_gap: need at least two non-degenerate paths");
  g.mean = sum / g.paths;
  g.se = std::sqrt(std::max(sq / g.paths - g.mean * g.mean, 0.0) / (g.paths - 1));
  g.ci_low = g.mean - kZ99 * g.se;
  g.ci_high = g.mean + kZ99 * g.se;
  g.e_inverse_margin = std::exp(-1.0) - g.ci_high;
  g.sigmas_below_one = g.se > 0.0 ? (1.0 - g.mean) / g.se : INFINITY;
  return g;
}

DualRepresentationReport dual_representation_report(const std::vector<CounterexamplePath>& coarse,
                                                    const std::vector<CounterexamplePath>& fine,
                                                    const std::vector<CounterexamplePath>& control) {
  const ExpectationGap gap = expectation_gap(fine);
  DualRepresentationReport r;
  r.x = gap.mean;
  r.separation = r.y - r.x;
  r.separation_in_ci = gap.se > 0.0 ? r.separation / (kZ99 * gap.se) : INFINITY;
  auto mean_energy = [](const std::vector<CounterexamplePath>& v) {
    double s = 0.0;
    int n = 0;
    for (const auto& p : v) {
      if (p.forced) continue;
      s += p.energy;
      ++n;
    }
    return n ? s / n : 0.0;
  };
  r.coarse_energy = mean_energy(coarse);
  r.fine_energy = mean_energy(fine);
  r.energy_growth = r.coarse_energy > 0.0 ? r.fine_energy / r.coarse_energy : 0.0;
  if (control.size() >= 2) {
    const ExpectationGap c = expectation_gap(control);
    r.control_mean = c.mean;
    r.control_se = c.se;
  }
  return r;
}

std::size_t write_counterexample_csv(const std::vector<CounterexamplePath>& paths, const std::filesystem::path& path) {
  CsvWriter csv(path, {"path", "tau", "L", "M1"});
  for (std::size_t p = 0; p < paths.size(); ++p) {
    csv.row({std::to_string(p), format_double(paths[p].tau), format_double(paths[p].log_exponent),
             format_double(paths[p].terminal)});
  }
  return csv.rows();
}

}  // namespace hjm
