#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hjm/hedge.hpp"
#include "hjm/market_model.hpp"
#include "hjm/operator_lab.hpp"

namespace hjm {

// Gram matrix of sigma^j(t, .) on [t, horizon] by a fine uniform trapezoid
// (independent of the model grid).
Eigen::MatrixXd sine_gaussian_orthogonality(const SineGaussian& spec, double horizon, double t,
                                            int panels = 20000);

// Smallest singular value at truncation N.
double injectivity_margin(const SpectralData& spec);
bool is_injective(const SpectralData& spec);

class InjectivityError : public std::runtime_error {
 public:
  InjectivityError(int k, std::vector<int> deficient);
  int k() const { return k_; }
  // 1-based spectral indices with lambda_i = 0.
  const std::vector<int>& deficient() const { return deficient_; }

 private:
  int k_;
  std::vector<int> deficient_;
};

enum class StrategyMode {
  Strict,   // non-injective Gamma is an error
  Project,  // phi = <psi, Gamma^+ .>, the least-squares hedge on the range
};

// phi_{t_k}(v) = <psi, Gamma^{-1} v> stored in spectral coordinates:
// phi(v) = sum_i spectral_i <u_i, J v> with spectral_i = <psi, g^i> / lambda_i.
struct GeneralizedStrategy {
  int k = 0;
  Eigen::VectorXd spectral;
  Eigen::VectorXd whitened;   // U * spectral; phi(v) = whitened . (J v)
  GMetric metric;
  bool injective = true;
  std::vector<int> deficient;
  double unattained = 0.0;    // |psi component on the zero spectrum|

  double operator()(const Eigen::VectorXd& v) const { return whitened.dot(metric.whiten(v)); }
};

GeneralizedStrategy build_generalized_strategy(const SpectralData& spec, const GMetric& metric,
                                               const Eigen::VectorXd& psi,
                                               StrategyMode mode = StrategyMode::Strict);

// --- claim library -----------------------------------------------------------

// xi = sum_k <psi(t_k), dW_k> for a deterministic integrand.
struct IntegralClaim {
  std::string name;
  std::function<Eigen::VectorXd(double)> integrand;  // t -> psi(t), length N
};

// psi_t = direction while |int psi dW| < barrier, zero afterwards.
struct StoppedIntegralClaim {
  Eigen::VectorXd direction;
  double barrier = 1.0;
};

// Functions of (W^1(S), ..., W^n(S)):
//   Linear:      xi = sum_i a_i W^i(S),                 psi = a
//   Exponential: xi = exp(sum_i a_i W^i(S) - |a|^2 S/2), psi_t = a xi_t
struct FiniteFactorClaim {
  enum class Kind { Linear, Exponential };
  Kind kind = Kind::Linear;
  Eigen::VectorXd a;
};

struct ClaimSpec {
  std::variant<IntegralClaim, StoppedIntegralClaim, FiniteFactorClaim> kind;

  std::string name() const;
  double expectation(double horizon) const;
  int factors() const;  // minimal truncation the claim needs (0 for integrands of any length)
};

ClaimSpec make_zero_claim(int factors);
ClaimSpec make_linear_claim(Eigen::VectorXd a);
ClaimSpec make_exponential_claim(Eigen::VectorXd a);
ClaimSpec make_stopped_claim(Eigen::VectorXd direction, double barrier = 1.0);

// Claim value and integrand along a path of Wiener increments dW (steps x N).
struct ClaimPath {
  double value = 0.0;
  std::vector<Eigen::VectorXd> integrand;  // psi_{t_k}, k = 0..M-1
};
ClaimPath evaluate_claim(const ClaimSpec& claim, const TimeGrid& grid, const Eigen::MatrixXd& increments);

// --- replication -------------------------------------------------------------

struct ReplicationOptions {
  StrategyMode mode = StrategyMode::Project;
  const VolatilityCache* cache = nullptr;
  bool keep_report = false;
};

struct ReplicationPath {
  double claim = 0.0;
  double hedge_terminal = 0.0;
  double residual = 0.0;
  // max_k |phi_k(Gamma_k dW_k) - <psi_k, dW_k>| over injective steps.
  double linearized_error = 0.0;
  std::vector<int> deficient_steps;
  HedgeReport report;  // filled when keep_report
};

// V_S = E xi + sum_k phi_k(P^(t_{k+1}, .) - P^(t_k, .)). The surface must retain its normals.
ReplicationPath replicate_path(const VolatilitySpec& spec, const ClaimSpec& claim, const ForwardSurface& surface,
                               const ReplicationOptions& options = {});

struct ReplicationSetup {
  VolatilitySpec spec;
  ClaimSpec claim;
  TimeGrid grid;
  FactorTruncation truncation;
  Eigen::VectorXd initial_curve;
  std::uint64_t seed = 0;
  int refinement = 1;  // normals aggregated from a grid `refinement` times finer
  StrategyMode mode = StrategyMode::Project;
  int threads = 1;
};

struct ReplicationSummary {
  std::vector<ReplicationPath> paths;
  double rms_error = 0.0;
  double mean_residual = 0.0;
  double max_linearized_error = 0.0;
  int paths_with_deficient_steps = 0;
};

ReplicationSummary replicate_claim(const ReplicationSetup& setup, int paths);

struct ConvergenceRow {
  int steps = 0;
  double dt = 0.0;
  double rms_error = 0.0;
  double max_linearized_error = 0.0;
};

// Runs the setup on grids of fine_steps / r for each r in `coarsening`
// (coupled through the fine-grid normals).
std::vector<ConvergenceRow> convergence_table(ReplicationSetup setup, int fine_steps,
                                              const std::vector<int>& coarsening, int paths);

std::size_t write_replication_csv(const ReplicationSummary& summary, const std::filesystem::path& path);
std::size_t write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::filesystem::path& path);

// --- finite-factor representation ---------------------------------------------

struct ProjectionRow {
  int retained = 0;         // n'
  double mc_gap = 0.0;      // sample mean of (xi_{n'} - xi)^2
  double mc_gap_se = 0.0;
  double exact_gap = 0.0;   // analytic E(xi_{n'} - xi)^2
};

struct ProjectionReport {
  std::vector<ProjectionRow> rows;   // n' = 1..n
  double variance = 0.0;             // sample mean of (xi - E xi)^2
  double integrand_energy = 0.0;     // sample mean of sum_k |psi_k|^2 dt
  double isometry_gap = 0.0;         // mean of the per-path difference of the two
  double isometry_se = 0.0;
  bool isometry_ok() const { return std::abs(isometry_gap) <= 3.0 * isometry_se; }
};

ProjectionReport finite_factor_projection(const FiniteFactorClaim& claim, const TimeGrid& grid, std::uint64_t seed,
                                          int paths);

}  // namespace hjm
