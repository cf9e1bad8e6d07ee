#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cbadc/errors.hpp"
#include "cbadc/model.hpp"
#include "oracles.hpp"

using namespace cbadc;

TEST(BuildChain, UniformChainMatrices) {
  const AnalogSystem sys = build_chain(uniform_chain(3, 10.0, 1.05, 0.5), Readout::last_state);
  Mat A(3, 3), B(3, 1), G(3, 3), C(1, 3);
  A << -0.5, 0, 0, 10, -0.5, 0, 0, 10, -0.5;
  B << 10, 0, 0;
  G << -10.5, 0, 0, 0, -10.5, 0, 0, 0, -10.5;
  C << 0, 0, 1;
  EXPECT_EQ(sys.A, A);
  EXPECT_EQ(sys.B, B);
  EXPECT_EQ(sys.Gamma, G);
  EXPECT_EQ(sys.CT, C);
}

TEST(BuildChain, AllStatesReadoutIsIdentity) {
  const AnalogSystem sys = build_chain(uniform_chain(4, 2.0, 1.0), Readout::all_states);
  EXPECT_EQ(sys.CT, Mat::Identity(4, 4));
  EXPECT_EQ(sys.m(), 4);
  EXPECT_EQ(sys.k(), 1);
}

TEST(BuildChain, FeedbackEntersFirstRowWithNegativeSign) {
  ChainSpec s = uniform_chain(3, 6.0, 1.0);
  s.kappa_fb = {0.25, 0.5};
  const AnalogSystem sys = build_chain(s, Readout::last_state);
  EXPECT_EQ(sys.Gamma(0, 1), -0.25);
  EXPECT_EQ(sys.Gamma(0, 2), -0.5);
  EXPECT_EQ(sys.Gamma(0, 0), -6.0);
  EXPECT_TRUE(s.has_feedback());
}

TEST(BuildChain, DeterministicBitExact) {
  ChainSpec s = uniform_chain(5, 6250.0, 1.25);
  s.kappa_fb.assign(4, 312.5);
  const AnalogSystem a = build_chain(s, Readout::all_states);
  const AnalogSystem b = build_chain(s, Readout::all_states);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.Gamma, b.Gamma);
}

TEST(BuildChain, RejectsBadSpecs) {
  ChainSpec s = uniform_chain(3, 1.0, 1.0);
  s.beta.pop_back();
  EXPECT_THROW(build_chain(s, Readout::last_state), std::invalid_argument);
  s = uniform_chain(3, 1.0, 1.0);
  s.rho[1] = -1.0;
  EXPECT_THROW(build_chain(s, Readout::last_state), std::invalid_argument);
  s = uniform_chain(3, 1.0, 1.0);
  s.kappa_fb = {1.0};
  EXPECT_THROW(build_chain(s, Readout::last_state), std::invalid_argument);
  EXPECT_THROW(uniform_chain(0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_chain(uniform_chain(2, 1.0, 1.0), Readout::last_state, 0.0), std::invalid_argument);
}

TEST(AnalogSystem, ValidateShapes) {
  AnalogSystem sys = build_chain(uniform_chain(2, 1.0, 1.0), Readout::last_state);
  sys.B = Mat::Zero(3, 1);
  EXPECT_THROW(sys.validate(), std::invalid_argument);
}

TEST(Atf, MatchesProductFormOnRandomChains) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> beta(0.5, 50.0), rho(0.0, 2.0), w(-100.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    ChainSpec s = uniform_chain(n, 1.0, 1.0);
    for (int l = 0; l < n; ++l) {
      s.beta[l] = beta(rng);
      s.rho[l] = trial % 2 ? rho(rng) : 0.0;
    }
    for (Readout r : {Readout::last_state, Readout::all_states}) {
      const AnalogSystem sys = build_chain(s, r);
      const double omega = w(rng);
      const CMat G = atf(sys, omega).G;
      const CMat ref = oracle::chain_atf_product(s, omega, r);
      ASSERT_EQ(G.rows(), ref.rows());
      for (Eigen::Index i = 0; i < G.rows(); ++i)
        EXPECT_LE(std::abs(G(i, 0) - ref(i, 0)), 1e-12 * std::abs(ref(i, 0)));
    }
  }
}

TEST(Atf, PoleAtZeroForUndampedChain) {
  const AnalogSystem sys = build_chain(uniform_chain(2, 10.0, 1.0), Readout::last_state);
  EXPECT_THROW(atf(sys, 0.0), PoleError);
  EXPECT_NO_THROW(atf(sys, 1e-9));
}

TEST(Atf, DampedChainHasNoPoleAtZero) {
  const AnalogSystem sys = build_chain(uniform_chain(2, 10.0, 1.0, 0.1), Readout::last_state);
  const CMat G = atf(sys, 0.0).G;
  EXPECT_NEAR(G(0, 0).real(), 100.0 / 0.01, 1e-6);
}

TEST(Stability, GammaMaxValues) {
  EXPECT_DOUBLE_EQ(gamma_max(1), 0.5);
  EXPECT_DOUBLE_EQ(gamma_max(2), 1.0 / 1.5);
  EXPECT_NEAR(gamma_max(16), 1.0, 1e-4);
  EXPECT_THROW(gamma_max(0), std::invalid_argument);
}

TEST(Stability, SingleBitBoundary) {
  // kappa = b = 1: T beta (kappa + 1) <= 1 is the admissible region.
  const ChainSpec ok = uniform_chain(3, 10.0, 1.0);
  EXPECT_TRUE(check_stability(ok, 0.05, 1.0).guaranteed);
  const StabilityVerdict bad = check_stability(ok, 0.051, 1.0);
  EXPECT_FALSE(bad.guaranteed);
  EXPECT_EQ(bad.failing_stages, (std::vector<int>{1, 2, 3}));
}

TEST(Stability, SectionSettingsAreAdmissible) {
  const StabilityVerdict v = check_stability(uniform_chain(5, 10.0, 1.05), 1.0 / 21.5, 1.0);
  EXPECT_TRUE(v.guaranteed);
  for (double load : v.load) EXPECT_LT(load, 1.0);
}

TEST(Stability, KappaBelowBoundFails) {
  EXPECT_FALSE(check_stability(uniform_chain(2, 1.0, 0.9), 0.01, 1.0).guaranteed);
}

TEST(Stability, FeedbackLoadsFirstStage) {
  ChainSpec s = uniform_chain(5, 10.0, 1.05);
  s.kappa_fb.assign(4, 10.0 / 20.0);
  const StabilityVerdict v = check_stability(s, 1.0 / 21.5, 1.0);
  EXPECT_FALSE(v.guaranteed);
  EXPECT_EQ(v.failing_stages, std::vector<int>{1});
}
