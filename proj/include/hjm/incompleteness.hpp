#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hjm/hedge.hpp"
#include "hjm/market_model.hpp"
#include "hjm/operator_lab.hpp"

namespace hjm {

// Integrand outside the attainable range: coefficient 1/k on the k-th
// selected spectral index, zero elsewhere. Indices follow
//   i_1 = inf{i : 1/lambda_i >= 1},  i_{k+1} = inf{i > i_k : 1/lambda_i >= k},
// with lambda_i = 0 passing every threshold.
struct PsiTilde {
  std::vector<int> indices;      // 1-based, strictly increasing
  Eigen::VectorXd coefficients;  // spectral coordinates, length N

  // Fewer than two indices cannot exhibit the divergence; a larger N is needed.
  bool sufficient() const { return indices.size() >= 2; }
};

PsiTilde build_psi_tilde(const Eigen::VectorXd& lambda,
                         int max_indices = std::numeric_limits<int>::max());

// Rotates spectral coordinates into the standard l2 basis: sum_i c_i g^i.
Eigen::VectorXd spectral_to_l2(const Eigen::VectorXd& coefficients, const SpectralData& spec);

// What the threshold recursion guarantees for sum_{k<=K} (psi^{i_k} / lambda_{i_k})^2:
// the first term is >= 1 and the k-th (k >= 2) is >= ((k-1)/k)^2.
double guaranteed_divergence_bound(int count);

struct MinNormPortfolio {
  Eigen::VectorXd spectral;     // coefficients <target, g^i> / lambda_i on the positive spectrum
  Eigen::VectorXd whitened;     // J h for the G-representer h of the functional
  Eigen::VectorXd representer;  // h on the grid; phi(v) = <h, v>_G
  double norm_sq = 0.0;         // |phi|^2_{G*} = sum_i (<target, g^i> / lambda_i)^2
  double residual_norm = 0.0;   // |target component on the zero spectrum|
};

// Solves Gamma* phi = target on the range of Gamma*; the part of the target
// on lambda_i = 0 directions is reported as residual.
MinNormPortfolio min_norm_portfolio(const SpectralData& spec, const GMetric& metric, const Eigen::VectorXd& target);

struct DivergenceRow {
  int count = 0;              // K
  double min_norm_sq = 0.0;   // |phi|^2 replicating psi~ truncated to its first K indices
  double guaranteed = 0.0;    // guaranteed_divergence_bound(K)
};

struct DivergenceTable {
  int time_index = 0;
  int factors = 0;
  std::vector<int> indices;
  std::vector<DivergenceRow> rows;
  bool insufficient = false;  // fewer indices than requested rows
};

DivergenceTable divergence_profile(const SpectralData& spec, const GMetric& metric, int max_count);
DivergenceTable divergence_profile(const ForwardSurface& surface, const VolatilitySpec& spec, int max_count,
                                   int time_index = 0);

std::size_t write_divergence_csv(const DivergenceTable& table, const std::filesystem::path& path);

enum class SpectrumMode {
  Pointwise,  // psi~ rebuilt from the spectrum of Gamma_{t_k} at every step
  Frozen,     // psi~ built once from Gamma_0 and held fixed
};

struct PsiProcess {
  std::vector<Eigen::VectorXd> psi;         // psi~_{t_k} in l2 coordinates, k = 0..M-1
  std::vector<std::vector<int>> indices;    // i_k(t_k) per step
  Eigen::VectorXd running;                  // I_k, k = 0..M (frozen after the stop)
  int tau_index = 0;                        // first k with |I_k| >= 1, or M
};

struct ClaimSample {
  double xi = 0.0;
  double tau = 0.0;
  int tau_index = 0;
  bool stopped = false;
  double overshoot = 0.0;        // max(|xi| - 1, 0)
  double max_increment = 0.0;    // max_k |<psi_{t_k}, dW_k>| before the stop
  double max_psi_norm_sq = 0.0;  // max_k |psi~_{t_k}|^2
  std::optional<PsiProcess> process;
  HedgeReport report;
};

struct ClaimOptions {
  SpectrumMode mode = SpectrumMode::Pointwise;
  bool retain_process = false;
  const VolatilityCache* cache = nullptr;  // as in assemble_gamma
};

// Builds the bounded claim xi = sum_k <psi_{t_k}, sqrt(dt) Z_k> stopped when
// the running integral leaves (-1, 1). The surface must retain its normals.
ClaimSample nonreplicable_claim(const ForwardSurface& surface, const VolatilitySpec& spec,
                                const ClaimOptions& options = {});

struct AdmissibilityCheck {
  std::string name;
  bool passed = true;
  double margin = 0.0;  // bound minus worst observed value; negative when violated
  long violations = 0;
};

struct AdmissibilityReport {
  double loading_bound = 0.0;  // horizon^2 sum_{i<=N} 1/i^2
  double rate_slack = 0.0;     // tolerated negative rate
  double min_rate = 0.0;
  double max_discounted = 0.0;
  std::vector<AdmissibilityCheck> checks;

  bool passed() const;
};

// Throws std::invalid_argument unless the base family satisfies
// 0 <= sigma~^i and |sigma~^i_{t_k}|_H^2 <= 1/i^2 on every node.
void validate_switching_base(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation);

// Slack for the rate positivity check: three one-step standard deviations of
// the switching integral, 3 sqrt(dt) sqrt(sum_i sup sigma~^i^2).
double switching_rate_slack(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation);

// Accumulates the switching-model checks over a set of simulated paths:
// rates >= -slack, P^ <= 1 + 1e-12, sum_i Quad(b^i(t_k,.)^2) <= horizon^2 sum 1/i^2,
// and |Gamma*phi|^2 <= Quad(phi^2) sum_i Quad(b^i^2) <= horizon^2 sum 1/i^2 Quad(phi^2)
// for a few density strategies phi.
class AdmissibilityAccumulator {
 public:
  AdmissibilityAccumulator(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation);
  void add(const ForwardSurface& surface);
  void merge(const AdmissibilityAccumulator& other);
  AdmissibilityReport report() const;

 private:
  TimeGrid grid_;
  std::shared_ptr<const VolatilityCache> base_;
  double bound_;
  double slack_;
  double min_rate_ = std::numeric_limits<double>::infinity();
  double max_discounted_ = 0.0;
  double max_loading_ = 0.0;
  double worst_chain_first_ = std::numeric_limits<double>::infinity();
  double worst_chain_second_ = std::numeric_limits<double>::infinity();
  long rate_violations_ = 0;
  long discounted_violations_ = 0;
  long loading_violations_ = 0;
  long chain_violations_ = 0;
};

std::size_t write_admissibility_csv(const AdmissibilityReport& report, const std::filesystem::path& path);

}  // namespace hjm
