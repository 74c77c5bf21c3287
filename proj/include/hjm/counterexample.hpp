#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hjm/rng.hpp"

namespace hjm {

// Nodes on [0, 1] uniform in u = -log(1 - t) up to 1 - eps, plus t = 1.
// Spacing shrinks like (1 - t) log(1/eps) / steps near the right end.
std::vector<double> counterexample_grid(int steps, double eps);

struct CounterexampleOptions {
  int steps = 10000;   // geometric steps before the final node
  double eps = 1e-8;   // last geometric node is 1 - eps
  int refinement = 1;  // increments aggregated from a grid this many times finer (nested)
  // Replaces X by the bounded constant integrand X = c on [0, 1] (no stopping).
  std::optional<double> control;
};

struct CounterexamplePath {
  double tau = 1.0;
  int tau_index = 0;
  bool forced = false;          // no crossing before t = 1 (degenerate path)
  double terminal_b = 0.0;      // B(tau)
  double log_exponent = 0.0;    // L = sum X dB - 1/2 sum X^2 dt
  double terminal = 1.0;        // M(1) = exp(L); may underflow to 0 in double when L < -745
  double identity = 0.0;        // -1 - (B_tau^2 - (1-tau))/(1-tau)^2 - 2 int B^2((1-s)^-4 - (1-s)^-3) ds
  double energy = 0.0;          // int_0^tau X^2 dt
  double slack() const { return log_exponent + 1.0; }  // L < -1 + slack
  // M(1) = exp(L) > 0 exactly iff the log-exponent is finite.
  bool positive() const { return std::isfinite(log_exponent); }
  double identity_error() const { return log_exponent - identity; }
};

// One path of X(t) = -2 B(t) / (1 - t)^2 stopped at tau = inf{t : B^2 + t >= 1},
// with left-point sums. Normals come from Stream::Counterexample.
CounterexamplePath simulate_counterexample(const CounterRng& rng, std::uint64_t path,
                                           const CounterexampleOptions& options = {});

// The same computation on explicit Wiener increments over explicit nodes.
CounterexamplePath counterexample_from_increments(const std::vector<double>& nodes, const std::vector<double>& db,
                                                  std::optional<double> control = std::nullopt);

struct ExpectationGap {
  int paths = 0;
  int excluded = 0;       // forced (degenerate) paths
  double mean = 0.0;      // estimate of E[M(1)] = x
  double se = 0.0;
  double ci_low = 0.0;    // 99% normal interval
  double ci_high = 0.0;
  double e_inverse_margin = 0.0;  // e^{-1} - ci_high
  double sigmas_below_one = 0.0;  // (1 - mean) / se
};

inline constexpr double kZ99 = 2.5758293035489;

ExpectationGap expectation_gap(const std::vector<CounterexamplePath>& paths);

struct DualRepresentationReport {
  double x = 0.0;             // E[M(1)]
  double y = 1.0;             // M(0)
  double separation = 0.0;    // y - x
  double separation_in_ci = 0.0;  // (y - x) / (kZ99 * se)
  double coarse_energy = 0.0;     // mean int X^2 at the coarse grid
  double fine_energy = 0.0;       // same paths, fine grid
  double energy_growth = 0.0;     // fine / coarse
  double control_mean = 0.0;      // bounded-integrand exponent
  double control_se = 0.0;
  bool control_is_martingale() const { return std::abs(control_mean - 1.0) <= 3.0 * control_se; }
};

DualRepresentationReport dual_representation_report(const std::vector<CounterexamplePath>& coarse,
                                                    const std::vector<CounterexamplePath>& fine,
                                                    const std::vector<CounterexamplePath>& control);

// `path,tau,L,M1`
std::size_t write_counterexample_csv(const std::vector<CounterexamplePath>& paths, const std::filesystem::path& path);

}  // namespace hjm
