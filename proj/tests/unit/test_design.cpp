#include <gtest/gtest.h>

#include <cmath>

#include "cbadc/design.hpp"
#include "cbadc/errors.hpp"
#include "cbadc/xfer.hpp"
#include "oracles.hpp"

using namespace cbadc;

namespace {

constexpr double kT = 1.0 / 21.5;

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

double section_eta(int n) { return oracle::eta_from_osr(10.0 * kT, 32.0, n); }

}  // namespace

TEST(Care, ClosedFormN2) {
  for (double beta : {1.0, 10.0, 6250.0})
    for (double eta : {2.0, 10.21, 100.0}) {
      const AnalogSystem sys = build_chain(uniform_chain(2, beta, 1.0), Readout::last_state);
      const auto ref = oracle::n2_closed_form(beta, eta);
      const FilterCoefficients c = design_filter(sys, eta * eta, 1.0 / (4.0 * beta));
      EXPECT_LE(rel(c.Vf, ref.Vf), 1e-9) << "beta=" << beta << " eta=" << eta;
      EXPECT_LE(rel(c.Vb, ref.Vb), 1e-9);
      EXPECT_LE(rel(c.W, ref.W), 1e-9);
    }
}

TEST(Care, MatchesHamiltonianOracle) {
  for (int n = 1; n <= 8; ++n) {
    const AnalogSystem sys = build_chain(uniform_chain(n, 10.0, 1.05), Readout::last_state);
    const double eta2 = std::pow(section_eta(n), 2);
    const Mat C = sys.CT.transpose();
    for (Direction d : {Direction::forward, Direction::backward}) {
      const CareResult r = care_solve(sys.A, sys.B, C, eta2, d);
      EXPECT_TRUE(r.converged);
      EXPECT_LE(r.relative_residual, 1e-10);
      const Mat ref = oracle::hamiltonian_care(sys.A, sys.B, C, eta2, d == Direction::backward);
      EXPECT_LE(rel(r.V, ref), 1e-8) << "n=" << n;
      EXPECT_EQ(r.V, r.V.transpose());
    }
  }
}

TEST(Care, AllStatesReadoutMatchesHamiltonian) {
  const AnalogSystem sys = build_chain(uniform_chain(4, 10.0, 1.05, 0.3), Readout::all_states);
  const Mat C = sys.CT.transpose();
  const CareResult r = care_solve(sys.A, sys.B, C, 900.0, Direction::forward);
  EXPECT_LE(rel(r.V, oracle::hamiltonian_care(sys.A, sys.B, C, 900.0, false)), 1e-10);
}

TEST(Care, SolutionIsPositiveSemidefinite) {
  const AnalogSystem sys = build_chain(uniform_chain(5, 10.0, 1.05), Readout::last_state);
  const double eta2 = std::pow(section_eta(5), 2);
  for (Direction d : {Direction::forward, Direction::backward}) {
    const CareResult r = care_solve(sys.A, sys.B, sys.CT.transpose(), eta2, d);
    Eigen::SelfAdjointEigenSolver<Mat> es(r.V);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
  }
}

TEST(Care, ResidualDefinition) {
  const Mat A = (Mat(2, 2) << 0, 0, 1, 0).finished();
  const Mat B = (Mat(2, 1) << 1, 0).finished();
  const Mat C = (Mat(2, 1) << 0, 1).finished();
  const Mat V = (Mat(2, 2) << 2, 1, 1, 3).finished();
  const Mat R = care_residual(A, B, C, 4.0, V, Direction::forward);
  const Mat ref = A * V + V * A.transpose() + B * B.transpose() - V * C * C.transpose() * V / 4.0;
  EXPECT_LE((R - ref).norm(), 1e-15);
  const Mat Rb = care_residual(A, B, C, 4.0, V, Direction::backward);
  const Mat refb = -A * V - V * A.transpose() + B * B.transpose() - V * C * C.transpose() * V / 4.0;
  EXPECT_LE((Rb - refb).norm(), 1e-15);
  EXPECT_THROW(care_solve(A, B, C, 0.0, Direction::forward), std::invalid_argument);
}

TEST(Discretize, MatchesTaylorAndSimpsonOracle) {
  const AnalogSystem sys = build_chain(uniform_chain(3, 10.0, 1.05), Readout::last_state);
  const Mat Acl = sys.A - Mat::Identity(3, 3) * 2.0;
  const auto [F, G] = discretize(Acl, sys.Gamma, kT);
  EXPECT_LE(rel(F, oracle::expm_taylor(Acl * kT)), 1e-13);
  // \int_0^T e^{A(T - t)} Gamma dt by composite Simpson per entry.
  Mat ref = Mat::Zero(3, 3);
  const int panels = 200;
  const double h = kT / (2 * panels);
  for (int i = 0; i <= 2 * panels; ++i) {
    const double wgt = (i == 0 || i == 2 * panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    ref += wgt * oracle::expm_taylor(Acl * (kT - i * h)) * sys.Gamma;
  }
  ref *= h / 3.0;
  EXPECT_LE(rel(G, ref), 1e-10);
}

TEST(DesignFilter, GatesAndStability) {
  for (int n = 1; n <= 6; ++n) {
    const AnalogSystem sys = build_chain(uniform_chain(n, 10.0, 1.05), Readout::all_states);
    const double eta2 = std::pow(section_eta(n), 2);
    DesignReport rep;
    const FilterCoefficients c = design_filter(sys, eta2, kT, &rep);
    EXPECT_TRUE(rep.ok);
    EXPECT_LT(rep.rho_f, 1.0);
    EXPECT_LT(rep.rho_b, 1.0);
    EXPECT_LE(rep.w_backward_error, 1e-12);
    EXPECT_EQ(c.n(), n);
    EXPECT_EQ(c.k(), 1);
    EXPECT_EQ(c.Bf.cols(), n);
  }
}

TEST(DesignFilter, BackwardMatricesUseNegatedDynamics) {
  const AnalogSystem sys = build_chain(uniform_chain(2, 10.0, 1.05), Readout::last_state);
  const double eta2 = 104.2441;
  const FilterCoefficients c = design_filter(sys, eta2, kT);
  const Mat CC = sys.CT.transpose() * sys.CT / eta2;
  EXPECT_LE(rel(c.Af, oracle::expm_taylor((sys.A - c.Vf * CC) * kT)), 1e-12);
  EXPECT_LE(rel(c.Ab, oracle::expm_taylor(-(sys.A + c.Vb * CC) * kT)), 1e-12);
}

TEST(DesignFilter, SubsampledEstimatePeriod) {
  const AnalogSystem sys = build_chain(uniform_chain(3, 10.0, 1.05), Readout::last_state);
  const double eta2 = std::pow(section_eta(3), 2);
  const FilterCoefficients full = design_filter(sys, eta2, kT);
  const FilterCoefficients half = design_filter(sys, eta2, kT / 2);
  EXPECT_LE(rel(half.Af * half.Af, full.Af), 1e-12);
  EXPECT_LE(rel(half.Af * half.Bf + half.Bf, full.Bf), 1e-12);
}

TEST(DesignFilter, RejectsBadArguments) {
  const AnalogSystem sys = build_chain(uniform_chain(2, 10.0, 1.05), Readout::last_state);
  EXPECT_THROW(design_filter(sys, -1.0, kT), std::invalid_argument);
  EXPECT_THROW(design_filter(sys, 1.0, 0.0), std::invalid_argument);
}

TEST(SolveW, BackwardErrorDefinition) {
  const Mat S = (Mat(2, 2) << 4, 1, 1, 3).finished();
  const Mat B = (Mat(2, 1) << 1, 2).finished();
  const Mat W = solve_w(S, Mat::Zero(2, 2), B);
  EXPECT_LE((S * W - B).norm(), 1e-15);
  EXPECT_LE(w_backward_error(S, W, B), 1e-15);
  const Mat Wbad = W + Mat::Constant(2, 1, 0.01);
  const Mat num = (S * Wbad - B).cwiseAbs();
  const Mat den = S.cwiseAbs() * Wbad.cwiseAbs() + B.cwiseAbs();
  EXPECT_NEAR(w_backward_error(S, Wbad, B), num.cwiseQuotient(den).maxCoeff(), 1e-15);
}

TEST(Parallelize, ReconstructsRecursionMatrices) {
  const AnalogSystem sys = build_chain(uniform_chain(4, 10.0, 1.05), Readout::all_states);
  const FilterCoefficients c = design_filter(sys, std::pow(section_eta(4), 2), kT);
  const ParallelForm pf = parallelize(c);
  EXPECT_EQ(pf.n(), 4);
  EXPECT_TRUE(pf.has_lut());
  EXPECT_EQ(pf.lut_f.size(), 16u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT(std::abs(pf.lambda_f(i)), 1.0);
    EXPECT_LT(std::abs(pf.lambda_b(i)), 1.0);
  }
  Eigen::EigenSolver<Mat> es(c.Af);
  CVec ev = es.eigenvalues();
  double prod_ref = 1.0, prod = 1.0;
  for (int i = 0; i < 4; ++i) {
    prod_ref *= std::abs(ev(i));
    prod *= std::abs(pf.lambda_f(i));
  }
  EXPECT_NEAR(prod, prod_ref, 1e-12);
  EXPECT_NEAR(prod, c.Af.determinant(), 1e-12);
}
