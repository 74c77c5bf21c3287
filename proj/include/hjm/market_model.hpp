#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "hjm/grid.hpp"
#include "hjm/rng.hpp"
#include "hjm/volatility.hpp"

namespace hjm {

// f(0, T_l) on the maturity nodes.
Eigen::VectorXd flat_curve(const TimeGrid& grid, double rate);

// Two-column CSV (maturity, rate), optional header line, linearly
// interpolated onto the grid and held flat beyond the given range.
Eigen::VectorXd read_initial_curve(std::istream& in, const TimeGrid& grid);
Eigen::VectorXd read_initial_curve(const std::filesystem::path& path, const TimeGrid& grid);

// One simulated forward-rate path. Row k is calendar time t_k, column l is
// maturity T_l. Entries with k >= l are frozen at f(t_l, T_l).
struct ForwardSurface {
  TimeGrid grid;
  FactorTruncation truncation;
  Eigen::MatrixXd f;        // (M+1) x (M+1)
  Eigen::MatrixXd alpha;    // drift applied on step k -> k+1; row M is zero
  Eigen::MatrixXd running;  // sign-switching integrals per (k, l); empty for other families
  Eigen::MatrixXd normals;  // M x N standard normals Z_{k,i}; empty unless retained
  std::uint64_t seed = 0;
  std::uint64_t path = 0;

  std::span<const double> running_at(int k) const;
};

struct SimulationOptions {
  bool retain_normals = true;
  // Precomputed slices for deterministic specs (for switching specs: of the base family).
  const VolatilityCache* cache = nullptr;
};

// Euler-Maruyama for df = alpha dt + sum_i sigma^i dW^i with the drift taken
// from the HJM condition. Throws NumericalError on a non-finite entry.
ForwardSurface simulate_forward_surface(const VolatilitySpec& spec, const TimeGrid& grid,
                                        const FactorTruncation& truncation,
                                        const Eigen::VectorXd& initial_curve, const PathNormals& normals,
                                        const SimulationOptions& options = {});

struct DiscountedCurve {
  int k = 0;
  Eigen::VectorXd discounted;  // P^(t_k, T_l) = exp(-int_0^{T_l} f(t_k,u) du)
  Eigen::VectorXd price;       // P(t_k, T_l) = exp(-int_{t_k}^{T_l} f(t_k,u) du)
};

DiscountedCurve discounted_curve(const ForwardSurface& surface, int k);

// P^(t_k, T_l) for every (k, l).
Eigen::MatrixXd discounted_surface(const ForwardSurface& surface);

struct RatePath {
  Eigen::VectorXd short_rate;  // r(t_k) = f(t_k, t_k)
  Eigen::VectorXd bank;        // B(t_k) = exp(trapezoid of r on [0, t_k])
};

RatePath rate_path(const ForwardSurface& surface);

// Writes `t,T,f,alpha`, one row per (k, l). Returns the row count.
std::size_t write_surface_csv(const ForwardSurface& surface, const std::filesystem::path& path);

}  // namespace hjm
