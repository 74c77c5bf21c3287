#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

#include "hjm/grid.hpp"
#include "hjm/market_model.hpp"
#include "hjm/volatility.hpp"

namespace hjm {

// Discrete H^1[0, horizon] inner product
//   <g, h>_G = g(0) h(0) + sum_l (g_{l+1} - g_l)(h_{l+1} - h_l) / dt,
// i.e. M_G = J^T J with the lower-bidiagonal square root
//   (J g)_0 = g_0,  (J g)_{l+1} = (g_{l+1} - g_l) / sqrt(dt).
class GMetric {
 public:
  explicit GMetric(const TimeGrid& grid) : grid_(grid) {}

  const TimeGrid& grid() const { return grid_; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& g) const;
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& columns) const;
  // Inverse of whiten: the curve g with J g = w.
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& w) const;

  double inner(const Eigen::VectorXd& g, const Eigen::VectorXd& h) const;
  // Dense Gram matrix M_G; used by tests and inspection dumps.
  Eigen::MatrixXd gram() const;

 private:
  void check(Eigen::Index n) const;
  TimeGrid grid_;
};

// |g|_G. Throws std::invalid_argument on a length mismatch with the grid.
double g_norm(const Eigen::VectorXd& values, const GMetric& metric);

// Gamma_t at t_k as an (M+1) x N matrix: column i is the curve
// T_l -> P^(t_k, T_l) b^i(t_k, T_l).
struct GammaOperator {
  int k = 0;
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd b;  // b^i(t_k, T_l) = -int_0^{T_l} sigma^i(t_k, u) du
  GMetric metric;

  int factors() const { return static_cast<int>(matrix.cols()); }
  Eigen::MatrixXd whitened() const { return metric.whiten(matrix); }
  // Q_t g = Gamma Gamma' g as a curve.
  Eigen::VectorXd apply_q(const Eigen::VectorXd& g) const;
};

// Volatility slice seen by a path at t_k; applies the switching rule when needed.
// For switching specs the cache holds slices of the base family.
VolatilitySlice path_slice(const ForwardSurface& surface, const VolatilitySpec& spec, int k,
                           const VolatilityCache* cache = nullptr);

GammaOperator assemble_gamma(const ForwardSurface& surface, const VolatilitySpec& spec, int k,
                             const VolatilityCache* cache = nullptr);

// Assembly from a precomputed slice and discounted row; the common inner loop
// of the path experiments.
GammaOperator assemble_gamma(const VolatilitySlice& slice, const Eigen::VectorXd& discounted,
                             const GMetric& metric);

// Gamma from explicit columns; mostly for fixtures.
GammaOperator gamma_from_columns(const Eigen::MatrixXd& columns, const TimeGrid& grid, int k = 0);

// Gamma^T M_G g, the l2 adjoint of Gamma with respect to the G inner product.
Eigen::VectorXd gamma_adjoint(const GammaOperator& gamma, const Eigen::VectorXd& g);

double hs_norm(const GammaOperator& gamma);

// Singular values below this fraction of lambda_1 count as zero.
inline constexpr double kRankTolerance = 1e-12;

struct SpectralData {
  int k = 0;
  Eigen::VectorXd lambda;   // nonincreasing singular values of Gamma: l2 -> G
  Eigen::MatrixXd right;    // N x N, column i = g^i in l2 coordinates
  Eigen::MatrixXd left;     // (M+1) x N, whitened left vectors (J Gamma g^i / lambda_i)
  int rank = 0;

  bool positive(int i) const { return rank > i; }
};

// SVD of J Gamma. Throws NumericalError on non-finite entries.
SpectralData spectrum(const GammaOperator& gamma);

// Minimum-norm u with Gamma u = g (least squares in G when g is off the range).
Eigen::VectorXd min_norm_preimage(const SpectralData& spec, const GMetric& metric, const Eigen::VectorXd& g);

struct BoundReport {
  double a = 0.0;          // max_k |f(t_k, .)|_H
  double b = 0.0;          // max_{k,l} |P^(t_k, T_l)|
  double slack_c = 10.0;   // violations are lhs > rhs + slack_c * dt
  int checks = 0;
  int violations = 0;
  double worst_margin = 0.0;     // min over (k,i) of rhs - lhs (negative means lhs exceeded rhs)
  double required_c = 0.0;       // smallest C making every check pass
  double hs_time_integral = 0.0; // sum_k |Gamma_{t_k}|_HS^2 dt
};

// Checks |P^ b^i|_G^2 <= 2 B^2 (horizon A + 1) |sigma^i_t|_H^2 + C dt for every
// time node and factor of one path.
BoundReport proposition1_report(const ForwardSurface& surface, const VolatilitySpec& spec,
                                double slack_c = 10.0, const VolatilityCache* cache = nullptr);

// Writes `k,i,lambda` rows (i is 1-based).
std::size_t write_spectrum_csv(const std::vector<SpectralData>& spectra, const std::filesystem::path& path);

// Dumps the (M+1) x N operator matrix with header `l,T,gamma_1..gamma_N`.
std::size_t write_gamma_csv(const GammaOperator& gamma, const std::filesystem::path& path);

}  // namespace hjm
