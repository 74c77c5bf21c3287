#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjm/operator_lab.hpp"

using namespace hjm;

namespace {

Eigen::VectorXd sample_curve(const TimeGrid& grid, const std::function<double(double)>& fn) {
  Eigen::VectorXd v(grid.size());
  for (int l = 0; l < grid.size(); ++l) v(l) = fn(grid.node(l));
  return v;
}

Eigen::VectorXd random_vector(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

ForwardSurface sine_surface(int steps, int factors, std::uint64_t path) {
  const TimeGrid grid(1.0, steps);
  return simulate_forward_surface(make_sine_gaussian_power(factors, 1.0), grid, FactorTruncation(factors),
                                  flat_curve(grid, 0.03), PathNormals(CounterRng(99), path));
}

}  // namespace

// =============================================================================
// G metric and g_norm
// =============================================================================

TEST(GNorm, ConstantCurve) {
  const TimeGrid grid(1.0, 17);
  EXPECT_NEAR(g_norm(Eigen::VectorXd::Constant(grid.size(), 5.0), GMetric(grid)), 5.0, 1e-15);
}

TEST(GNorm, LinearCurveIsExact) {
  for (int steps : {2, 7, 100}) {
    const TimeGrid grid(1.0, steps);
    EXPECT_NEAR(g_norm(sample_curve(grid, [](double t) { return t; }), GMetric(grid)), 1.0, 1e-13);
  }
}

TEST(GNorm, QuadraticCurve) {
  const TimeGrid grid(1.0, 1000);
  EXPECT_NEAR(g_norm(sample_curve(grid, [](double t) { return t * t; }), GMetric(grid)), std::sqrt(4.0 / 3.0),
              1e-3);
}

TEST(GNorm, LengthMismatch) {
  const TimeGrid grid(1.0, 10);
  EXPECT_THROW(g_norm(Eigen::VectorXd::Zero(5), GMetric(grid)), std::invalid_argument);
}

TEST(GMetric, GramMatchesWhitenedInnerProductAndIsSpd) {
  const TimeGrid grid(2.0, 12);
  const GMetric metric(grid);
  const Eigen::MatrixXd m = metric.gram();
  EXPECT_TRUE(m.isApprox(m.transpose()));
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  ASSERT_EQ(llt.info(), Eigen::Success);
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_vector(gen, grid.size());
    const auto h = random_vector(gen, grid.size());
    EXPECT_NEAR(metric.inner(g, h), g.dot(m * h), 1e-9 * (1.0 + std::abs(g.dot(m * h))));
    EXPECT_NEAR((metric.unwhiten(metric.whiten(g)) - g).norm(), 0.0, 1e-12);
  }
}

// The bidiagonal square root and the Cholesky factor of M_G give the same
// operator singular values.
TEST(GMetric, CholeskyRouteAgrees) {
  const auto s = sine_surface(30, 5, 2);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(5, 1.0), 4);
  Eigen::LLT<Eigen::MatrixXd> llt(gamma.metric.gram());
  const Eigen::MatrixXd lt_gamma = llt.matrixU() * gamma.matrix;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(lt_gamma);
  EXPECT_LT((svd.singularValues() - spectrum(gamma).lambda).norm(), 1e-10);
}

// =============================================================================
// assemble_gamma
// =============================================================================

TEST(AssembleGamma, ConstantClosedFormLoading) {
  const TimeGrid grid(1.0, 10);
  const auto s = simulate_forward_surface(make_constant_single(0.2), grid, FactorTruncation(1),
                                          flat_curve(grid, 0.03), PathNormals(CounterRng(1), 0));
  const auto gamma = assemble_gamma(s, make_constant_single(0.2), 5);
  EXPECT_NEAR(gamma.b(10, 0), -0.1, 1e-15);
  EXPECT_NEAR(gamma.matrix(10, 0), discounted_curve(s, 5).discounted(10) * -0.1, 1e-15);
  for (int l = 0; l <= 5; ++l) EXPECT_EQ(gamma.matrix(l, 0), 0.0);
}

TEST(AssembleGamma, ZeroVolatilityGivesZeroOperator) {
  const TimeGrid grid(1.0, 10);
  const auto spec = make_sine_gaussian({0.0, 0.0, 0.0});
  const auto s = simulate_forward_surface(spec, grid, FactorTruncation(3), flat_curve(grid, 0.03),
                                          PathNormals(CounterRng(1), 0));
  EXPECT_TRUE(assemble_gamma(s, spec, 3).matrix.isZero(0.0));
}

TEST(AssembleGamma, VanishesAtZeroMaturityAndBeforeT) {
  const auto s = sine_surface(40, 6, 1);
  for (int k : {0, 10, 39}) {
    const auto gamma = assemble_gamma(s, make_sine_gaussian_power(6, 1.0), k);
    EXPECT_TRUE(gamma.b.row(0).isZero(0.0));
    for (int l = 0; l <= k; ++l) EXPECT_TRUE(gamma.matrix.row(l).isZero(0.0));
  }
}

TEST(AssembleGamma, SwitchingUsesPathState) {
  const TimeGrid grid(1.0, 30);
  const auto spec = make_sign_switching(make_harmonic_flat(1.0));
  const auto s = simulate_forward_surface(spec, grid, FactorTruncation(4), flat_curve(grid, 0.03),
                                          PathNormals(CounterRng(4), 0));
  const int k = 20;
  const auto gamma = assemble_gamma(s, spec, k);
  const auto running = s.running_at(k);
  for (int l = k + 1; l < grid.size(); ++l) {
    if (running[l] < 0.0 && running[l - 1] < 0.0 && l - 1 > k) {
      // both trapezoid ends switched off: no increment of the loading
      EXPECT_NEAR(gamma.b(l, 0), gamma.b(l - 1, 0), 1e-15);
    }
  }
}

// =============================================================================
// gamma_adjoint
// =============================================================================

TEST(GammaAdjoint, ZeroCurve) {
  const auto s = sine_surface(20, 4, 0);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(4, 1.0), 2);
  EXPECT_TRUE(gamma_adjoint(gamma, Eigen::VectorXd::Zero(21)).isZero(0.0));
}

TEST(GammaAdjoint, RankOneColumn) {
  const TimeGrid grid(1.0, 16);
  const GMetric metric(grid);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(grid.size(), 3);
  cols.col(0) = sample_curve(grid, [](double t) { return t * (1.0 - t); });
  const auto gamma = gamma_from_columns(cols, grid);
  const Eigen::VectorXd g = sample_curve(grid, [](double t) { return std::cos(t) + 2.0 * t; });
  const Eigen::VectorXd a = gamma_adjoint(gamma, g);
  EXPECT_NEAR(a(0), metric.inner(g, cols.col(0)), 1e-12);
  EXPECT_EQ(a(1), 0.0);
  EXPECT_EQ(a(2), 0.0);
}

TEST(GammaAdjoint, BilinearIdentityOnRandomProbes) {
  const auto s = sine_surface(50, 8, 3);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(8, 1.0), 7);
  std::mt19937_64 gen(20);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_vector(gen, 51);
    const auto u = random_vector(gen, 8);
    const double lhs = gamma_adjoint(gamma, g).dot(u);
    const double rhs = gamma.metric.inner(g, gamma.matrix * u);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(GammaAdjoint, QIsGammaGammaAdjoint) {
  const auto s = sine_surface(20, 3, 3);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(3, 1.0), 1);
  std::mt19937_64 gen(2);
  const auto g = random_vector(gen, 21);
  const auto h = random_vector(gen, 21);
  // <Q g, h>_G = <Gamma' g, Gamma' h>_l2
  EXPECT_NEAR(gamma.metric.inner(gamma.apply_q(g), h), gamma_adjoint(gamma, g).dot(gamma_adjoint(gamma, h)),
              1e-9 * (1.0 + std::abs(gamma_adjoint(gamma, g).dot(gamma_adjoint(gamma, h)))));
}

// =============================================================================
// hs_norm and spectrum
// =============================================================================

TEST(HsNorm, Anchors) {
  const TimeGrid grid(1.0, 9);
  EXPECT_EQ(hs_norm(gamma_from_columns(Eigen::MatrixXd::Zero(10, 4), grid)), 0.0);
  Eigen::MatrixXd one = sample_curve(grid, [](double t) { return t; });
  EXPECT_NEAR(hs_norm(gamma_from_columns(one, grid)), 1.0, 1e-13);
}

TEST(Spectrum, ZeroOperator) {
  const TimeGrid grid(1.0, 9);
  const auto sd = spectrum(gamma_from_columns(Eigen::MatrixXd::Zero(10, 4), grid));
  EXPECT_TRUE(sd.lambda.isZero(0.0));
  EXPECT_EQ(sd.rank, 0);
  EXPECT_EQ(sd.right.rows(), 4);
}

TEST(Spectrum, ScaledOrthonormalColumns) {
  const TimeGrid grid(1.0, 20);
  const GMetric metric(grid);
  std::mt19937_64 gen(4);
  Eigen::MatrixXd w(21, 3);
  for (int c = 0; c < 3; ++c) w.col(c) = random_vector(gen, 21);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(w).householderQ() * Eigen::MatrixXd::Identity(21, 3);
  Eigen::MatrixXd cols(21, 3);
  const double scale[3] = {1.0, 3.0, 2.0};
  for (int c = 0; c < 3; ++c) cols.col(c) = metric.unwhiten(q.col(c)) * scale[c];
  const auto sd = spectrum(gamma_from_columns(cols, grid));
  EXPECT_NEAR(sd.lambda(0), 3.0, 1e-12);
  EXPECT_NEAR(sd.lambda(1), 2.0, 1e-12);
  EXPECT_NEAR(sd.lambda(2), 1.0, 1e-12);
  EXPECT_EQ(sd.rank, 3);
}

TEST(Spectrum, InvariantsOnSimulatedOperator) {
  const auto s = sine_surface(80, 16, 6);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(16, 1.0), 10);
  const auto sd = spectrum(gamma);
  const Eigen::MatrixXd gtg = gamma.whitened().transpose() * gamma.whitened();
  for (int i = 0; i < 16; ++i) {
    EXPECT_LT((gtg * sd.right.col(i) - sd.lambda(i) * sd.lambda(i) * sd.right.col(i)).norm(), 1e-8);
    if (i > 0) EXPECT_LE(sd.lambda(i), sd.lambda(i - 1));
  }
  EXPECT_LT((sd.right.transpose() * sd.right - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-10);
  const double hs = hs_norm(gamma);
  EXPECT_NEAR(sd.lambda.squaredNorm(), hs * hs, 1e-8 * hs * hs);
}

TEST(Spectrum, TailSingularValueDecaysWithTruncation) {
  double previous = std::numeric_limits<double>::infinity();
  for (int n : {8, 16, 32, 64}) {
    const TimeGrid grid(1.0, 256);
    const auto spec = make_sine_gaussian_power(n, 1.0);
    const auto s = simulate_forward_surface(spec, grid, FactorTruncation(n), flat_curve(grid, 0.03),
                                            PathNormals(CounterRng(1), 0));
    const double tail = spectrum(assemble_gamma(s, spec, 0)).lambda(n - 1);
    EXPECT_LT(tail, previous) << "N=" << n;
    EXPECT_GT(tail, 0.0);
    previous = tail;
  }
}

TEST(Spectrum, RangePreimage) {
  const auto s = sine_surface(60, 10, 8);
  const auto gamma = assemble_gamma(s, make_sine_gaussian_power(10, 1.0), 5);
  const auto sd = spectrum(gamma);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd g = gamma.matrix * random_vector(gen, 10);
    const Eigen::VectorXd u = min_norm_preimage(sd, gamma.metric, g);
    EXPECT_LT((gamma.matrix * u - g).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Spectrum, RejectsNonFinite) {
  const TimeGrid grid(1.0, 4);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(5, 2);
  cols(3, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(spectrum(gamma_from_columns(cols, grid)), std::runtime_error);
}

// =============================================================================
// proposition1_report: Gamma column-norm bound
// =============================================================================

TEST(GammaColumnBound, ZeroVolatilityTrivial) {
  const TimeGrid grid(1.0, 20);
  const auto spec = make_sine_gaussian({0.0, 0.0});
  const auto s = simulate_forward_surface(spec, grid, FactorTruncation(2), flat_curve(grid, 0.03),
                                          PathNormals(CounterRng(1), 0));
  const auto r = proposition1_report(s, spec);
  EXPECT_EQ(r.violations, 0);
  EXPECT_EQ(r.hs_time_integral, 0.0);
  EXPECT_GE(r.worst_margin, 0.0);
}

TEST(GammaColumnBound, ConstantPathsHaveNoViolations) {
  const TimeGrid grid(1.0, 50);
  const auto spec = make_constant_single(0.2);
  for (int p = 0; p < 100; ++p) {
    const auto s = simulate_forward_surface(spec, grid, FactorTruncation(1), flat_curve(grid, 0.03),
                                            PathNormals(CounterRng(12), p));
    const auto r = proposition1_report(s, spec);
    EXPECT_EQ(r.violations, 0) << "path " << p << " required C " << r.required_c;
    EXPECT_TRUE(std::isfinite(r.hs_time_integral));
  }
}

TEST(GammaColumnBound, SinePathsHaveNoViolations) {
  const TimeGrid grid(1.0, 64);
  const FactorTruncation n(32);
  const auto spec = make_sine_gaussian_power(32, 1.0);
  const VolatilityCache cache(spec, grid, n);
  SimulationOptions opts;
  opts.cache = &cache;
  for (int p = 0; p < 20; ++p) {
    const auto s = simulate_forward_surface(spec, grid, n, flat_curve(grid, 0.03), PathNormals(CounterRng(13), p), opts);
    const auto r = proposition1_report(s, spec, 10.0, &cache);
    EXPECT_EQ(r.violations, 0) << "path " << p << " required C " << r.required_c;
    EXPECT_EQ(r.checks, 65 * 32);
  }
}

TEST(SpectrumCsv, Rows) {
  const auto s = sine_surface(10, 3, 0);
  std::vector<SpectralData> spectra;
  for (int k = 0; k < 3; ++k) spectra.push_back(spectrum(assemble_gamma(s, make_sine_gaussian_power(3, 1.0), k)));
  const auto path = std::filesystem::temp_directory_path() / "hjm_spectrum_test.csv";
  EXPECT_EQ(write_spectrum_csv(spectra, path), 9u);
  std::filesystem::remove(path);
}
