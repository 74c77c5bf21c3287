#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hjm/grid.hpp"

namespace hjm {

// sigma^1 = sigma0, all other factors silent.
struct ConstantSingle {
  double sigma0 = 0.0;
};

// sigma^j(t,T) = gamma_j sin(j pi ((T - t)/(horizon - t)) v 0).
struct SineGaussian {
  std::vector<double> gamma;
};

// sigma^i(t,T) = scale / i for t < T. With scale <= 1 and horizon <= 1 the
// H-norm satisfies |sigma^i_t|_H^2 <= 1/i^2.
struct HarmonicFlat {
  double scale = 1.0;
};

// sigma^i(t_k, T_l) given on the grid; entries with l <= k are ignored.
struct Tabulated {
  TimeGrid grid;
  int factors;
  std::vector<double> values;  // row-major (i-1, k, l)

  Tabulated(TimeGrid g, int n) : grid(g), factors(n), values(static_cast<std::size_t>(n) * g.size() * g.size(), 0.0) {}

  double& at(int factor, int k, int l) { return values[index(factor, k, l)]; }
  double at(int factor, int k, int l) const { return values[index(factor, k, l)]; }

 private:
  std::size_t index(int factor, int k, int l) const {
    const auto n = static_cast<std::size_t>(grid.size());
    return (static_cast<std::size_t>(factor - 1) * n + k) * n + l;
  }
};

struct VolatilitySpec;

// sigma^i(t,T) = base^i(t,T) while the running integral
// sum_i int_0^t base^i(s,T) dW^i(s) is nonnegative, zero otherwise.
struct SignSwitching {
  std::shared_ptr<const VolatilitySpec> base;
};

struct VolatilitySpec {
  std::variant<ConstantSingle, SineGaussian, HarmonicFlat, Tabulated, SignSwitching> family;

  std::string name() const;
};

VolatilitySpec make_constant_single(double sigma0);
VolatilitySpec make_sine_gaussian(std::vector<double> gamma);
// gamma_j = scale * j^{-power}, j = 1..n.
VolatilitySpec make_sine_gaussian_power(int n, double power, double scale = 1.0);
VolatilitySpec make_harmonic_flat(double scale);
VolatilitySpec make_sign_switching(VolatilitySpec base);

// Throws std::invalid_argument if the spec cannot serve `truncation` factors
// on `grid` (too few gamma/table entries, non-finite values, nested switching).
void validate(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation);

// True when sigma does not depend on the path.
bool is_deterministic(const VolatilitySpec& spec);

// sigma^i(t,T). `running` is the value of sum_i int_0^t base^i(s,T) dW^i(s)
// and only matters for SignSwitching.
double eval_volatility(const VolatilitySpec& spec, const TimeGrid& grid,
                       const FactorTruncation& truncation, int factor, double t, double T,
                       double running = 0.0);

// Right limit sigma^i(t, t+). The zero-beyond-maturity convention makes
// sigma^i(t,t) = 0, but quadratures over (t, T] need the limit from above.
double volatility_right_limit(const VolatilitySpec& spec, const TimeGrid& grid,
                              const FactorTruncation& truncation, int factor, double t,
                              double running = 0.0);

// int_t^T sigma^i(t,u) du in closed form, when the family has one.
std::optional<double> closed_form_integral(const VolatilitySpec& spec, const TimeGrid& grid,
                                           int factor, double t, double T);

// Everything the simulator and the operator assembly need at one time node.
struct VolatilitySlice {
  int k = 0;
  Eigen::MatrixXd sigma;       // (M+1) x N, sigma^i(t_k, T_l); zero for l <= k
  Eigen::VectorXd left_limit;  // sigma^i(t_k, t_k+)
  Eigen::MatrixXd integral;    // int_{t_k}^{T_l} sigma^i(t_k, u) du; zero for l <= k
  Eigen::VectorXd drift;       // alpha(t_k, T_l)
};

// `running` holds the switching integral per maturity node at step k; it may
// be empty for deterministic specs. Integrals use the closed form when
// available, otherwise the composite trapezoid on maturity nodes.
VolatilitySlice volatility_slice(const VolatilitySpec& spec, const TimeGrid& grid,
                                 const FactorTruncation& truncation, int k,
                                 std::span<const double> running = {});

// Applies the sign-switching rule to a slice of the base family: rows whose
// running integral is negative are zeroed and the integrals re-done by trapezoid.
VolatilitySlice switch_slice(const VolatilitySlice& base, std::span<const double> running, double dt);

// alpha(t,T) = sum_i sigma^i(t,T) int_t^T sigma^i(t,u) du. Off-grid (t,T) are
// allowed only for families with a closed-form inner integral.
double hjm_drift(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation,
                 double t, double T, std::span<const double> running = {});

// Slices for every k of a deterministic spec; shared read-only across paths.
class VolatilityCache {
 public:
  VolatilityCache(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation);
  const VolatilitySlice& at(int k) const { return slices_.at(static_cast<std::size_t>(k)); }

 private:
  std::vector<VolatilitySlice> slices_;
};

}  // namespace hjm
