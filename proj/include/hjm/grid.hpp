#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace hjm {

// Uniform grid on [0, horizon] shared by calendar time t and maturity T.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("TimeGrid: horizon must be finite and > 0");
    }
    if (steps < 2) {
      throw std::invalid_argument("TimeGrid: steps must be >= 2, got " + std::to_string(steps));
    }
  }

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  int size() const { return steps_ + 1; }
  double dt() const { return horizon_ / steps_; }

  // t_k = k * dt, with the last node pinned to the horizon exactly.
  double node(int k) const { return k == steps_ ? horizon_ : k * dt(); }

  // Index of the node equal to `t` (within a relative tolerance), or -1.
  int index_of(double t) const {
    const double x = t / dt();
    const long k = std::lround(x);
    if (k < 0 || k > steps_) return -1;
    return std::abs(x - static_cast<double>(k)) <= 1e-9 * std::max(1.0, x) ? static_cast<int>(k) : -1;
  }

  bool contains(double t) const { return t >= 0.0 && t <= horizon_ * (1.0 + 1e-12); }

  bool operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && steps_ == other.steps_;
  }

 private:
  double horizon_;
  int steps_;
};

// Number of retained Wiener factors W^1..W^N.
struct FactorTruncation {
  explicit FactorTruncation(int n) : factors(n) {
    if (n < 1) throw std::invalid_argument("FactorTruncation: need at least one factor");
  }
  int factors;
};

}  // namespace hjm
