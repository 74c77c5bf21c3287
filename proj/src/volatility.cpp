#include "hjm/volatility.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hjm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_factor(const FactorTruncation& truncation, int factor) {
  if (factor < 1 || factor > truncation.factors) {
    throw std::out_of_range("volatility: factor " + std::to_string(factor) + " outside truncation 1.." +
                            std::to_string(truncation.factors));
  }
}

void check_time(const TimeGrid& grid, double t, const char* what) {
  if (!grid.contains(t)) {
    throw std::out_of_range(std::string("volatility: ") + what + "=" + std::to_string(t) +
                            " outside [0, horizon]");
  }
}

int require_node(const TimeGrid& grid, double t, const char* what) {
  const int k = grid.index_of(t);
  if (k < 0) {
    throw std::invalid_argument(std::string("volatility: tabulated family needs ") + what +
                                " on a grid node, got " + std::to_string(t));
  }
  return k;
}

// sigma^i(t,T) of a non-switching family for t < T.
double base_value(const VolatilitySpec& spec, const TimeGrid& grid, int factor, double t, double T) {
  return std::visit(
      Overloaded{
          [&](const ConstantSingle& c) { return factor == 1 ? c.sigma0 : 0.0; },
          [&](const SineGaussian& s) {
            const double x = (T - t) / (grid.horizon() - t);
            return s.gamma[factor - 1] * std::sin(factor * std::numbers::pi * std::max(x, 0.0));
          },
          [&](const HarmonicFlat& h) { return h.scale / factor; },
          [&](const Tabulated& tab) {
            return tab.at(factor, require_node(grid, t, "t"), require_node(grid, T, "T"));
          },
          [&](const SignSwitching&) -> double {
            throw std::logic_error("base_value: nested switching");
          },
      },
      spec.family);
}

double base_right_limit(const VolatilitySpec& spec, const TimeGrid& grid, int factor, double t) {
  return std::visit(
      Overloaded{
          [&](const ConstantSingle& c) { return factor == 1 ? c.sigma0 : 0.0; },
          [&](const SineGaussian&) { return 0.0; },
          [&](const HarmonicFlat& h) { return h.scale / factor; },
          [&](const Tabulated& tab) {
            const int k = require_node(grid, t, "t");
            return k < grid.steps() ? tab.at(factor, k, k + 1) : 0.0;
          },
          [&](const SignSwitching&) -> double {
            throw std::logic_error("base_right_limit: nested switching");
          },
      },
      spec.family);
}

void fill_trapezoid(VolatilitySlice& slice, double dt) {
  const int rows = static_cast<int>(slice.sigma.rows());
  const int n = static_cast<int>(slice.sigma.cols());
  slice.integral.setZero(rows, n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    double prev = slice.left_limit(i);
    for (int l = slice.k + 1; l < rows; ++l) {
      const double cur = slice.sigma(l, i);
      acc += 0.5 * dt * (prev + cur);
      slice.integral(l, i) = acc;
      prev = cur;
    }
  }
}

}  // namespace

std::string VolatilitySpec::name() const {
  return std::visit(Overloaded{
                        [](const ConstantSingle&) { return std::string("constant"); },
                        [](const SineGaussian&) { return std::string("sine"); },
                        [](const HarmonicFlat&) { return std::string("harmonic"); },
                        [](const Tabulated&) { return std::string("tabulated"); },
                        [](const SignSwitching& s) { return "sign-switching(" + s.base->name() + ")"; },
                    },
                    family);
}

VolatilitySpec make_constant_single(double sigma0) { return {ConstantSingle{sigma0}}; }

VolatilitySpec make_sine_gaussian(std::vector<double> gamma) { return {SineGaussian{std::move(gamma)}}; }

VolatilitySpec make_sine_gaussian_power(int n, double power, double scale) {
  std::vector<double> gamma(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) gamma[j - 1] = scale * std::pow(static_cast<double>(j), -power);
  return make_sine_gaussian(std::move(gamma));
}

VolatilitySpec make_harmonic_flat(double scale) { return {HarmonicFlat{scale}}; }

VolatilitySpec make_sign_switching(VolatilitySpec base) {
  return {SignSwitching{std::make_shared<const VolatilitySpec>(std::move(base))}};
}

void validate(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation) {
  std::visit(Overloaded{
                 [&](const ConstantSingle& c) {
                   if (!std::isfinite(c.sigma0)) throw std::invalid_argument("constant: sigma0 not finite");
                 },
                 [&](const SineGaussian& s) {
                   if (static_cast<int>(s.gamma.size()) < truncation.factors) {
                     throw std::invalid_argument("sine: " + std::to_string(s.gamma.size()) +
                                                 " gamma coefficients for " +
                                                 std::to_string(truncation.factors) + " factors");
                   }
                   for (double g : s.gamma) {
                     if (!std::isfinite(g)) throw std::invalid_argument("sine: gamma not finite");
                   }
                 },
                 [&](const HarmonicFlat& h) {
                   if (!std::isfinite(h.scale)) throw std::invalid_argument("harmonic: scale not finite");
                 },
                 [&](const Tabulated& tab) {
                   if (!(tab.grid == grid)) throw std::invalid_argument("tabulated: grid mismatch");
                   if (tab.factors < truncation.factors) {
                     throw std::invalid_argument("tabulated: too few factors");
                   }
                   for (double v : tab.values) {
                     if (!std::isfinite(v)) throw std::invalid_argument("tabulated: entry not finite");
                   }
                 },
                 [&](const SignSwitching& s) {
                   if (!s.base) throw std::invalid_argument("sign-switching: missing base");
                   if (std::holds_alternative<SignSwitching>(s.base->family)) {
                     throw std::invalid_argument("sign-switching: base must not switch");
                   }
                   validate(*s.base, grid, truncation);
                 },
             },
             spec.family);
}

bool is_deterministic(const VolatilitySpec& spec) {
  return !std::holds_alternative<SignSwitching>(spec.family);
}

double eval_volatility(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation,
                       int factor, double t, double T, double running) {
  check_factor(truncation, factor);
  check_time(grid, t, "t");
  check_time(grid, T, "T");
  if (t >= T) return 0.0;
  if (const auto* s = std::get_if<SignSwitching>(&spec.family)) {
    return running >= 0.0 ? base_value(*s->base, grid, factor, t, T) : 0.0;
  }
  return base_value(spec, grid, factor, t, T);
}

double volatility_right_limit(const VolatilitySpec& spec, const TimeGrid& grid,
                              const FactorTruncation& truncation, int factor, double t, double running) {
  check_factor(truncation, factor);
  check_time(grid, t, "t");
  if (const auto* s = std::get_if<SignSwitching>(&spec.family)) {
    return running >= 0.0 ? base_right_limit(*s->base, grid, factor, t) : 0.0;
  }
  return base_right_limit(spec, grid, factor, t);
}

std::optional<double> closed_form_integral(const VolatilitySpec& spec, const TimeGrid& grid, int factor,
                                           double t, double T) {
  if (t >= T) return 0.0;
  return std::visit(Overloaded{
                        [&](const ConstantSingle& c) -> std::optional<double> {
                          return factor == 1 ? c.sigma0 * (T - t) : 0.0;
                        },
                        [&](const SineGaussian& s) -> std::optional<double> {
                          const double width = grid.horizon() - t;
                          const double w = factor * std::numbers::pi;
                          return s.gamma[factor - 1] * width / w * (1.0 - std::cos(w * (T - t) / width));
                        },
                        [&](const HarmonicFlat& h) -> std::optional<double> {
                          return h.scale / factor * (T - t);
                        },
                        [](const Tabulated&) -> std::optional<double> { return std::nullopt; },
                        [](const SignSwitching&) -> std::optional<double> { return std::nullopt; },
                    },
                    spec.family);
}

VolatilitySlice volatility_slice(const VolatilitySpec& spec, const TimeGrid& grid,
                                 const FactorTruncation& truncation, int k, std::span<const double> running) {
  const int rows = grid.size();
  const int n = truncation.factors;
  if (k < 0 || k > grid.steps()) throw std::out_of_range("volatility_slice: time index out of range");

  if (const auto* switching = std::get_if<SignSwitching>(&spec.family)) {
    if (static_cast<int>(running.size()) != rows) {
      throw std::invalid_argument("volatility_slice: sign-switching needs running integrals per maturity node");
    }
    return switch_slice(volatility_slice(*switching->base, grid, truncation, k), running, grid.dt());
  }

  const double t = grid.node(k);
  VolatilitySlice slice;
  slice.k = k;
  slice.sigma.setZero(rows, n);
  slice.left_limit.setZero(n);
  for (int i = 1; i <= n; ++i) {
    slice.left_limit(i - 1) = base_right_limit(spec, grid, i, t);
    for (int l = k + 1; l < rows; ++l) slice.sigma(l, i - 1) = base_value(spec, grid, i, t, grid.node(l));
  }

  if (std::holds_alternative<Tabulated>(spec.family)) {
    fill_trapezoid(slice, grid.dt());
  } else {
    slice.integral.setZero(rows, n);
    for (int i = 1; i <= n; ++i) {
      for (int l = k + 1; l < rows; ++l) {
        slice.integral(l, i - 1) = *closed_form_integral(spec, grid, i, t, grid.node(l));
      }
    }
  }
  slice.drift = slice.sigma.cwiseProduct(slice.integral).rowwise().sum();
  return slice;
}

VolatilitySlice switch_slice(const VolatilitySlice& base, std::span<const double> running, double dt) {
  VolatilitySlice slice = base;
  const int rows = static_cast<int>(slice.sigma.rows());
  if (running[slice.k] < 0.0) slice.left_limit.setZero();
  for (int l = slice.k + 1; l < rows; ++l) {
    if (running[l] < 0.0) slice.sigma.row(l).setZero();
  }
  fill_trapezoid(slice, dt);
  slice.drift = slice.sigma.cwiseProduct(slice.integral).rowwise().sum();
  return slice;
}

double hjm_drift(const VolatilitySpec& spec, const TimeGrid& grid, const FactorTruncation& truncation, double t,
                 double T, std::span<const double> running) {
  check_time(grid, t, "t");
  check_time(grid, T, "T");
  if (t >= T) return 0.0;
  if (is_deterministic(spec) && closed_form_integral(spec, grid, 1, t, T)) {
    double alpha = 0.0;
    for (int i = 1; i <= truncation.factors; ++i) {
      alpha += eval_volatility(spec, grid, truncation, i, t, T) * *closed_form_integral(spec, grid, i, t, T);
    }
    return alpha;
  }
  const int k = require_node(grid, t, "t");
  const int l = require_node(grid, T, "T");
  return volatility_slice(spec, grid, truncation, k, running).drift(l);
}

VolatilityCache::VolatilityCache(const VolatilitySpec& spec, const TimeGrid& grid,
                                 const FactorTruncation& truncation) {
  if (!is_deterministic(spec)) throw std::invalid_argument("VolatilityCache: spec depends on the path");
  slices_.reserve(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.size(); ++k) slices_.push_back(volatility_slice(spec, grid, truncation, k));
}

}  // namespace hjm
