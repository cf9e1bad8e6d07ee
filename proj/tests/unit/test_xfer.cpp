#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cbadc/quadrature.hpp"
#include "cbadc/xfer.hpp"
#include "oracles.hpp"

using namespace cbadc;

namespace {

constexpr double kT = 1.0 / 21.5;
constexpr double kPi = std::numbers::pi;

double section_eta(int n, double osr = 32.0) { return oracle::eta_from_osr(10.0 * kT, osr, n); }

}  // namespace

TEST(Xfer, StfIsHalfAtBandEdge) {
  for (int n = 1; n <= 8; ++n)
    for (Readout r : {Readout::last_state, Readout::all_states}) {
      const AnalogSystem sys = build_chain(uniform_chain(n, 10.0, 1.05), r);
      const double eta = section_eta(n);
      const double wc = bandwidth(sys, eta * eta);
      EXPECT_NEAR(stf_scalar(sys, eta * eta, wc), 0.5, 1e-10) << "n=" << n;
      EXPECT_NEAR(atf_gain(sys, wc), eta, 1e-10 * eta);
    }
}

TEST(Xfer, BandwidthMatchesClosedForm) {
  for (int n = 1; n <= 8; ++n)
    for (double beta : {1.0, 10.0, 6250.0}) {
      const AnalogSystem sys = build_chain(uniform_chain(n, beta, 1.0), Readout::last_state);
      const double eta = 37.0;
      const double expected = beta / std::pow(eta, 1.0 / n);
      EXPECT_NEAR(bandwidth(sys, eta * eta), expected, 1e-10 * expected);
      EXPECT_NEAR(bandwidth_closed_form(beta, eta, n), expected, 1e-14 * expected);
    }
}

TEST(Xfer, EtaFromOsrMatchesOracle) {
  for (int n = 1; n <= 8; ++n)
    for (double osr : {8.0, 32.0, 128.0}) {
      const double ref = oracle::eta_from_osr(0.4, osr, n);
      EXPECT_NEAR(eta_from_osr(0.4, osr, n), ref, 1e-13 * ref);
    }
  EXPECT_THROW(eta_from_osr(0.0, 32.0, 2), std::invalid_argument);
}

TEST(Xfer, OsrRoundTripThroughBandwidth) {
  // omega_crit = beta / eta^{1/n} = pi / (T OSR), so OSR comes back.
  for (int n = 1; n <= 6; ++n) {
    const AnalogSystem sys = build_chain(uniform_chain(n, 10.0, 1.05), Readout::last_state);
    const double eta = eta_from_osr(10.0 * kT, 32.0, n);
    EXPECT_NEAR(osr_from_bandwidth(bandwidth(sys, eta * eta), kT), 32.0, 1e-9);
  }
}

TEST(Xfer, NtfMatchesDirectFormula) {
  const ChainSpec spec = uniform_chain(3, 10.0, 1.05, 0.2);
  for (Readout r : {Readout::last_state, Readout::all_states}) {
    const AnalogSystem sys = build_chain(spec, r);
    for (double w : {0.01, 0.7, 3.0, 40.0}) {
      // Reference inverse has condition ~|G|^2 / eta2, so evaluate it in long double.
      using CL = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;
      const CL G = oracle::chain_atf_product(spec, w, r).cast<std::complex<long double>>();
      const double eta2 = 50.0;
      const auto m = G.rows();
      const CL refl = G.adjoint() * (G * G.adjoint() + static_cast<long double>(eta2) * CL::Identity(m, m)).inverse();
      const CMat ref = refl.cast<std::complex<double>>();
      const CMat H = ntf(sys, eta2, w);
      EXPECT_LE((H - ref).norm(), 1e-11 * ref.norm()) << "w=" << w;
      const CMat S = stf(sys, eta2, w);
      EXPECT_NEAR(S(0, 0).imag(), 0.0, 1e-15);
      EXPECT_NEAR(S(0, 0).real(), stf_scalar(sys, eta2, w), 1e-14);
    }
  }
}

TEST(Xfer, NtfForTwoInputSystem) {
  AnalogSystem sys;
  sys.A = Mat::Zero(2, 2);
  sys.A(1, 0) = 3.0;
  sys.A(0, 0) = -0.5;
  sys.A(1, 1) = -0.25;
  sys.B = Mat::Identity(2, 2);
  sys.Gamma = -Mat::Identity(2, 2);
  sys.CT = Mat::Identity(2, 2);
  const double w = 1.3, eta2 = 4.0;
  const CMat R = (cplx(0.0, w) * CMat::Identity(2, 2) - sys.A.cast<cplx>()).inverse();
  const CMat G = R;
  const CMat ref = G.adjoint() * (G * G.adjoint() + eta2 * CMat::Identity(2, 2)).inverse();
  EXPECT_LE((ntf(sys, eta2, w) - ref).norm(), 1e-13);
  EXPECT_THROW(stf_scalar(sys, eta2, w), std::invalid_argument);
}

TEST(Xfer, StfIsMonotoneLowpass) {
  const AnalogSystem sys = build_chain(uniform_chain(4, 10.0, 1.05), Readout::last_state);
  const double eta2 = std::pow(section_eta(4), 2);
  double prev = 1.0;
  for (double w = 0.01; w < 100.0; w *= 1.3) {
    const double s = stf_scalar(sys, eta2, w);
    EXPECT_LE(s, prev + 1e-15);
    prev = s;
  }
}

TEST(Xfer, ConversionNoiseMatchesClosedForm) {
  for (int n = 1; n <= 6; ++n) {
    const ChainSpec spec = uniform_chain(n, 10.0, 1.05);
    const AnalogSystem sys = build_chain(spec, Readout::last_state);
    const double eta2 = std::pow(section_eta(n), 2);
    const double wc = bandwidth(sys, eta2);
    const double s2 = sigma2_y_band(1.0, kT, 1.0);
    const NoisePrediction p = predict_conversion_noise(sys, eta2, wc, s2, &spec);
    EXPECT_GT(p.S_N_closed, 0.0);
    EXPECT_NEAR(p.S_N, p.S_N_closed, 1e-6 * p.S_N_closed);
    // sigma^2 / pi * w^{2n+1} / ((2n+1) beta^{2n})
    const double ref = s2 / kPi * std::pow(wc, 2 * n + 1) / ((2 * n + 1) * std::pow(10.0, 2 * n));
    EXPECT_NEAR(p.S_N_closed, ref, 1e-12 * ref);
    EXPECT_FALSE(p.band_warning);
  }
}

TEST(Xfer, ConversionNoiseAllStatesMatchesSimpson) {
  const ChainSpec spec = uniform_chain(3, 10.0, 1.05);
  const AnalogSystem sys = build_chain(spec, Readout::all_states);
  const double eta2 = std::pow(section_eta(3), 2);
  const double wc = bandwidth(sys, eta2);
  const NoisePrediction p = predict_conversion_noise(sys, eta2, wc, 1.0, &spec);
  EXPECT_LT(p.S_N_closed, 0.0);
  const auto f = [&](double w) {
    return w == 0.0 ? 0.0 : 1.0 / oracle::chain_atf_product(spec, w, Readout::all_states).squaredNorm();
  };
  const double ref = oracle::simpson(f, 0.0, wc, 20000) / kPi;
  EXPECT_NEAR(p.S_N, ref, 1e-8 * ref);
}

TEST(Xfer, PredictSnrFormula) {
  // 10 log10( (3 A^2 / 2 b^2) (2n+1) (gamma/pi)^{2n} OSR^{2n+1} / alpha )
  const double A = 0.5, b = 1.0, gamma = 10.0 * kT, osr = 32.0;
  for (int n = 1; n <= 6; ++n) {
    long double v = 1.5L * A * A / (b * b) * (2 * n + 1);
    for (int i = 0; i < 2 * n; ++i) v *= gamma / kPi;
    for (int i = 0; i < 2 * n + 1; ++i) v *= osr;
    const double ref = 10.0 * std::log10(static_cast<double>(v));
    EXPECT_NEAR(predict_snr(A, b, n, gamma, osr), ref, 1e-10);
    EXPECT_NEAR(predict_snr(A, b, n, gamma, osr, 0.1), ref + 10.0, 1e-10);
    // Doubling OSR buys (2n+1) 3.01 dB.
    EXPECT_NEAR(predict_snr(A, b, n, gamma, 2 * osr) - predict_snr(A, b, n, gamma, osr),
                (2 * n + 1) * 10.0 * std::log10(2.0), 1e-10);
  }
}

TEST(Xfer, Sigma2YBand) {
  EXPECT_DOUBLE_EQ(sigma2_y_band(1.0, 0.5, 1.0), 0.5 * 4.0 / 12.0);
  EXPECT_DOUBLE_EQ(sigma2_y_band(0.5, 1.0, 2.0), 0.5 * 16.0 / 12.0);
}

TEST(Xfer, ThermalNoiseAtFirstStageIsStfSquared) {
  const ChainSpec spec = uniform_chain(3, 10.0, 1.05);
  const AnalogSystem sys = build_chain(spec, Readout::last_state);
  const double eta2 = std::pow(section_eta(3), 2);
  const double wc = bandwidth(sys, eta2);
  const NoisePrediction p =
      predict_thermal_noise(sys, eta2, {chain_noise_source(spec, 1, 1.0, 2.0)}, wc);
  const auto f = [&](double w) {
    if (w == 0.0) return 1.0;
    const double g2 = oracle::chain_atf_product(spec, w, Readout::last_state).squaredNorm();
    const double s = g2 / (g2 + eta2);
    return s * s;
  };
  const double ref = 2.0 * oracle::simpson(f, 0.0, wc, 4000) / kPi;
  EXPECT_NEAR(p.S_N, ref, 1e-8 * ref);
  ASSERT_EQ(p.contributions.size(), 1u);
}

TEST(Xfer, ThermalNoiseLaterStagesAreSuppressed) {
  const ChainSpec spec = uniform_chain(4, 10.0, 1.05);
  const AnalogSystem sys = build_chain(spec, Readout::last_state);
  const double eta2 = std::pow(section_eta(4), 2);
  const double wc = bandwidth(sys, eta2);
  std::vector<NoiseSource> src;
  for (int l = 1; l <= 4; ++l) src.push_back(chain_noise_source(spec, l, 1.0, 1.0));
  const NoisePrediction p = predict_thermal_noise(sys, eta2, src, wc);
  for (int l = 1; l < 4; ++l) EXPECT_LT(p.contributions[l], p.contributions[l - 1]);
}

TEST(Xfer, MismatchNoise) {
  const ChainSpec nominal = uniform_chain(3, 10.0, 1.05);
  const AnalogSystem sn = build_chain(nominal, Readout::last_state);
  const double eta2 = std::pow(section_eta(3), 2);
  const double wc = bandwidth(sn, eta2);
  const MismatchPrediction zero = predict_mismatch_noise(sn, sn, eta2, wc, 1.0, 1.0);
  EXPECT_EQ(zero.eps_g, 0.0);
  EXPECT_EQ(zero.eps_q, 0.0);

  ChainSpec actual = nominal;
  actual.beta[1] *= 1.02;
  const AnalogSystem sa = build_chain(actual, Readout::last_state);
  const MismatchPrediction mp = predict_mismatch_noise(sn, sa, eta2, wc, 1.0, 1.0);
  const auto f = [&](double w) {
    const CMat Gn = oracle::chain_atf_product(nominal, w, Readout::last_state);
    const CMat Ga = oracle::chain_atf_product(actual, w, Readout::last_state);
    const double g2 = Gn.squaredNorm();
    return (Gn.adjoint() * (Ga - Gn)).squaredNorm() / std::pow(g2 + eta2, 2);
  };
  const double ref = oracle::simpson(f, 1e-12, wc, 4000) / kPi;
  EXPECT_NEAR(mp.eps_g, ref, 1e-6 * ref);
  EXPECT_GT(mp.eps_q, 0.0);
}

TEST(Quadrature, AdaptiveSimpsonPolynomialsAndDecades) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return x * x * x * x * x; }, 0.0, 1.0, 1e-14), 1.0 / 6.0, 1e-13);
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, kPi, 1e-12), 2.0, 1e-11);
  // \int_0^w x^{10} dx spans many decades near zero.
  const double w = 7.0;
  const double ref = std::pow(w, 11) / 11.0;
  EXPECT_NEAR(integrate_band([](double x) { return std::pow(x, 10); }, w), ref, 1e-8 * ref);
  EXPECT_NEAR(integrate_band([](double x) { return std::exp(-x); }, 30.0), 1.0 - std::exp(-30.0), 1e-9);
}
