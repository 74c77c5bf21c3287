#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hjm/counterexample.hpp"

using namespace hjm;

TEST(CounterexampleGrid, GeometricNodes) {
  const auto nodes = counterexample_grid(100, 1e-6);
  ASSERT_EQ(nodes.size(), 102u);
  EXPECT_EQ(nodes.front(), 0.0);
  EXPECT_EQ(nodes.back(), 1.0);
  EXPECT_DOUBLE_EQ(nodes[100], 1.0 - 1e-6);
  for (std::size_t j = 1; j < nodes.size(); ++j) EXPECT_GT(nodes[j], nodes[j - 1]);
  // Constant ratio of successive gaps to the distance from 1.
  const double r0 = (nodes[1] - nodes[0]) / (1.0 - nodes[0]);
  const double r1 = (nodes[51] - nodes[50]) / (1.0 - nodes[50]);
  EXPECT_NEAR(r0, r1, 1e-9);
  EXPECT_THROW(counterexample_grid(0, 1e-6), std::invalid_argument);
  EXPECT_THROW(counterexample_grid(10, 1.0), std::invalid_argument);
}

TEST(Counterexample, ZeroNoiseIsTheDegenerateBoundary) {
  const auto nodes = counterexample_grid(50, 1e-4);
  const CounterexamplePath p = counterexample_from_increments(nodes, std::vector<double>(nodes.size() - 1, 0.0));
  EXPECT_TRUE(p.forced);
  EXPECT_EQ(p.tau, 1.0);
  EXPECT_EQ(p.log_exponent, 0.0);
  EXPECT_EQ(p.terminal, 1.0);
  EXPECT_EQ(p.energy, 0.0);
}

TEST(Counterexample, HandComputedLeftPointSums) {
  const std::vector<double> nodes{0.0, 0.5, 0.75, 1.0};
  const std::vector<double> db{0.3, 0.4, 0.0};
  const CounterexamplePath p = counterexample_from_increments(nodes, db);
  // B(0.5) = 0.3: 0.09 + 0.5 < 1; B(0.75) = 0.7: 0.49 + 0.75 >= 1 -> tau = 0.75.
  EXPECT_EQ(p.tau_index, 2);
  EXPECT_EQ(p.tau, 0.75);
  EXPECT_FALSE(p.forced);
  const double x1 = -2.0 * 0.3 / 0.25;  // X at t = 0.5; X(0) = 0
  EXPECT_NEAR(p.log_exponent, x1 * 0.4 - 0.5 * x1 * x1 * 0.25, 1e-14);
  EXPECT_NEAR(p.energy, x1 * x1 * 0.25, 1e-14);
  EXPECT_NEAR(p.terminal_b, 0.7, 1e-15);
  const double drift = 0.09 * (1.0 / std::pow(0.5, 4) - 1.0 / std::pow(0.5, 3)) * 0.25;
  EXPECT_NEAR(p.identity, -1.0 - (0.49 - 0.25) / 0.0625 - 2.0 * drift, 1e-12);
  EXPECT_THROW(counterexample_from_increments(nodes, {0.1}), std::invalid_argument);
}

TEST(Counterexample, PathwiseProperties) {
  const CounterRng rng(7);
  CounterexampleOptions opts;
  opts.steps = 10000;
  int below = 0, n = 0;
  for (std::uint64_t p = 0; p < 600; ++p) {
    const CounterexamplePath c = simulate_counterexample(rng, p, opts);
    ASSERT_TRUE(c.positive());
    EXPECT_GE(c.terminal, 0.0);
    if (c.forced) continue;
    ++n;
    EXPECT_GT(c.tau, 0.0);
    EXPECT_LT(c.tau, 1.0);
    if (c.slack() < 0.05) ++below;
  }
  EXPECT_GE(below, 0.99 * n);
}

TEST(Counterexample, IdentityErrorShrinksWithOrderOneHalf) {
  const CounterRng rng(8);
  auto median_error = [&](int steps, int refinement) {
    std::vector<double> e;
    for (std::uint64_t p = 0; p < 800; ++p) {
      CounterexampleOptions o;
      o.steps = steps;
      o.refinement = refinement;
      const CounterexamplePath c = simulate_counterexample(rng, p, o);
      if (!c.forced) e.push_back(std::abs(c.identity_error()));
    }
    std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
    return e[e.size() / 2];
  };
  const double coarse = median_error(1000, 4);
  const double fine = median_error(4000, 1);
  // Order 1/2: quadrupling the steps should roughly halve the error.
  EXPECT_GE(coarse / fine, 1.5) << coarse << " vs " << fine;
}

TEST(Counterexample, RefinementAggregatesFineDraws) {
  const CounterRng rng(9);
  CounterexampleOptions a, b;
  a.steps = 200;
  a.refinement = 3;
  b.steps = 200;
  b.refinement = 3;
  const CounterexamplePath x = simulate_counterexample(rng, 4, a);
  const CounterexamplePath y = simulate_counterexample(rng, 4, b);
  EXPECT_EQ(x.log_exponent, y.log_exponent);
  EXPECT_THROW(simulate_counterexample(rng, 0, CounterexampleOptions{100, 1e-6, 0, std::nullopt}), std::invalid_argument);
}

TEST(Counterexample, ExpectationGapBelowEInverse) {
  const CounterRng rng(10);
  std::vector<CounterexamplePath> paths;
  CounterexampleOptions o;
  o.steps = 2000;
  for (std::uint64_t p = 0; p < 2000; ++p) paths.push_back(simulate_counterexample(rng, p, o));
  const ExpectationGap g = expectation_gap(paths);
  EXPECT_GT(g.mean, 0.0);
  EXPECT_LE(g.ci_high, std::exp(-1.0) + 0.02);
  EXPECT_GE(g.sigmas_below_one, 3.0);
  EXPECT_NEAR(g.ci_high - g.ci_low, 2.0 * kZ99 * g.se, 1e-15);
}

TEST(Counterexample, ExpectationGapArithmetic) {
  std::vector<CounterexamplePath> paths(4);
  const double values[] = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) paths[i].terminal = values[i];
  paths.push_back(CounterexamplePath{});
  paths.back().forced = true;
  const ExpectationGap g = expectation_gap(paths);
  EXPECT_EQ(g.paths, 4);
  EXPECT_EQ(g.excluded, 1);
  EXPECT_NEAR(g.mean, 0.25, 1e-15);
  EXPECT_NEAR(g.se, std::sqrt(0.05 / 3.0 / 4.0), 1e-15);  // sample variance 0.05 / 3
  EXPECT_THROW(expectation_gap({}), std::invalid_argument);
}

TEST(Counterexample, BoundedControlIsAMartingale) {
  const CounterRng rng(11);
  std::vector<CounterexamplePath> control;
  CounterexampleOptions o;
  o.steps = 100;
  o.control = 1.0;
  for (std::uint64_t p = 0; p < 5000; ++p) control.push_back(simulate_counterexample(rng, p, o));
  std::vector<CounterexamplePath> fine;
  CounterexampleOptions f;
  f.steps = 1000;
  for (std::uint64_t p = 0; p < 500; ++p) fine.push_back(simulate_counterexample(rng, p, f));
  const DualRepresentationReport r = dual_representation_report(fine, fine, control);
  EXPECT_TRUE(r.control_is_martingale()) << r.control_mean << " +- " << r.control_se;
  EXPECT_EQ(r.y, 1.0);
  EXPECT_GE(r.separation, 1.0 - std::exp(-1.0) - 0.02);
  EXPECT_GT(r.separation_in_ci, 1.0);
  EXPECT_DOUBLE_EQ(r.energy_growth, 1.0);
}

TEST(Counterexample, CsvSchema) {
  const CounterRng rng(12);
  std::vector<CounterexamplePath> paths;
  CounterexampleOptions o;
  o.steps = 50;
  for (std::uint64_t p = 0; p < 3; ++p) paths.push_back(simulate_counterexample(rng, p, o));
  const auto path = std::filesystem::temp_directory_path() / "hjm_counterexample_test.csv";
  EXPECT_EQ(write_counterexample_csv(paths, path), 3u);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "path,tau,L,M1");
  std::filesystem::remove(path);
}
