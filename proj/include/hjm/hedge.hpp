#pragma once

#include <vector>

namespace hjm {

// Outcome of hedging one claim along one path.
struct HedgeReport {
  double claim = 0.0;
  double initial_capital = 0.0;
  std::vector<double> wealth;              // V_{t_k}, k = 0..M
  double residual = 0.0;                   // claim - V_S
  std::vector<double> norm_profile;        // |phi_{t_k}|^2_{G*} per step
  std::vector<double> truncation_profile;  // required norm^2 by retained index count K at t_0
};

}  // namespace hjm
