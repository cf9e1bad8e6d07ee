#include "oracles.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace oracle {

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LCMat = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;

Mat hamiltonian_care(const Mat& A, const Mat& B, const Mat& C, double eta2, bool backward) {
  const auto n = A.rows();
  const LMat Al = (backward ? Mat(-A) : A).cast<long double>();
  const LMat Bl = B.cast<long double>();
  const LMat Cl = C.cast<long double>();
  const LMat G = Cl * Cl.transpose() / static_cast<long double>(eta2);
  const LMat Q = Bl * Bl.transpose();
  LMat H(2 * n, 2 * n);
  H << Al.transpose(), -G, -Q, -Al;
  Eigen::EigenSolver<LMat> es(H);
  if (es.info() != Eigen::Success) throw std::runtime_error("hamiltonian_care: eigensolver failed");
  LCMat U(2 * n, n);
  Eigen::Index cols = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    if (es.eigenvalues()(i).real() < 0 && cols < n) U.col(cols++) = es.eigenvectors().col(i);
  if (cols != n) throw std::runtime_error("hamiltonian_care: no n-dimensional stable subspace");
  const LCMat U1 = U.topRows(n);
  const LCMat U2 = U.bottomRows(n);
  const LCMat V = U1.transpose().fullPivLu().solve(U2.transpose()).transpose();
  const LMat Vr = V.real();
  return (0.5L * (Vr + Vr.transpose())).cast<double>();
}

N2ClosedForm n2_closed_form(double beta, double eta) {
  const double s = std::sqrt(2.0 * eta);
  N2ClosedForm c;
  c.Vf.resize(2, 2);
  c.Vf << beta * s, beta * eta, beta * eta, beta * eta * s;
  c.Vb.resize(2, 2);
  c.Vb << beta * s, -beta * eta, -beta * eta, beta * eta * s;
  c.W.resize(2, 1);
  c.W << 1.0 / (2.0 * s), 0.0;
  return c;
}

CMat chain_atf_product(const cbadc::ChainSpec& spec, double omega, cbadc::Readout readout) {
  const int n = spec.n;
  CMat all(n, 1);
  std::complex<double> g(1.0, 0.0);
  for (int l = 0; l < n; ++l) {
    g *= spec.beta[l] / std::complex<double>(spec.rho[l], omega);
    all(l, 0) = g;
  }
  if (readout == cbadc::Readout::all_states) return all;
  CMat last(1, 1);
  last(0, 0) = all(n - 1, 0);
  return last;
}

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const int m = 2 * panels;
  const double h = (b - a) / m;
  double sum = f(a) + f(b);
  for (int i = 1; i < m; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

Mat expm_taylor(const Mat& M) {
  const LMat Ml = M.cast<long double>();
  const long double norm = Ml.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (std::ldexp(norm, -s) > 0.25L) ++s;
  const LMat X = Ml * std::ldexp(1.0L, -s);
  LMat term = LMat::Identity(M.rows(), M.cols());
  LMat sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * X / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum.cast<double>();
}

Vec rk4_period(const cbadc::AnalogSystem& sys, const Vec& x0, const Vec& s, const cbadc::InputSignal& u,
               double t0, double T, int steps) {
  const Vec drive = sys.Gamma * s;
  const auto f = [&](double t, const Vec& x) -> Vec { return sys.A * x + sys.B.col(0) * u(t) + drive; };
  const double h = T / steps;
  Vec x = x0;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const Vec k1 = f(t, x);
    const Vec k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vec k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vec k4 = f(t + h, x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Mat naive_smoother(const cbadc::FilterCoefficients& c, const Mat& controls, int substeps) {
  const long long N = controls.cols() * substeps;
  const auto n = c.Af.rows();
  Mat mf(n, N), mb(n, N);
  Vec m = Vec::Zero(n);
  for (long long j = 0; j < N; ++j) {
    mf.col(j) = m;
    m = c.Af * m + c.Bf * controls.col(j / substeps);
  }
  m.setZero();
  for (long long j = N - 1; j >= 0; --j) {
    m = c.Ab * m + c.Bb * controls.col(j / substeps);
    mb.col(j) = m;
  }
  return c.W.transpose() * (mb - mf);
}

Mat naive_mixed(const cbadc::FilterCoefficients& c, const Mat& controls, int latency) {
  const long long M = controls.cols();
  const auto n = c.Af.rows();
  Mat out(c.W.cols(), std::max<long long>(0, M - latency));
  Vec mf = Vec::Zero(n);
  for (long long k = 0; k + latency < M; ++k) {
    Vec acc = -c.W.transpose() * mf;
    Mat P = Mat::Identity(n, n);
    for (int l = 0; l <= latency; ++l) {
      acc += c.W.transpose() * P * c.Bb * controls.col(k + l);
      P = P * c.Ab;
    }
    out.col(k) = acc;
    mf = c.Af * mf + c.Bf * controls.col(k);
  }
  return out;
}

std::vector<double> dft_welch(const Vec& x, double fs, long long segment, double overlap) {
  const long long L = segment;
  const long long step = std::max<long long>(1, L - std::llround(overlap * static_cast<double>(L)));
  const long long segments = 1 + (x.size() - L) / step;
  const long long K = L / 2 + 1;
  const long double pi = 3.141592653589793238462643383279502884L;
  std::vector<long double> w(L);
  long double w2 = 0;
  for (long long i = 0; i < L; ++i) {
    w[i] = 0.5L - 0.5L * std::cos(2 * pi * i / L);
    w2 += w[i] * w[i];
  }
  std::vector<long double> acc(K, 0.0L);
  for (long long s = 0; s < segments; ++s) {
    const long long a = s * step;
    long double mean = 0;
    for (long long i = 0; i < L; ++i) mean += x(a + i);
    mean /= L;
    for (long long k = 0; k < K; ++k) {
      std::complex<long double> X = 0;
      for (long long i = 0; i < L; ++i)
        X += (x(a + i) - mean) * w[i] * std::polar(1.0L, -2 * pi * ((k * i) % L) / L);
      acc[k] += std::norm(X);
    }
  }
  std::vector<double> out(K);
  for (long long k = 0; k < K; ++k) {
    const long double edge = (k == 0 || k == L / 2) ? 1.0L : 2.0L;
    out[k] = static_cast<double>(acc[k] * edge / (fs * w2 * segments));
  }
  return out;
}

double eta_from_osr(double gamma, double osr, int n) {
  const long double pi = 3.141592653589793238462643383279502884L;
  return static_cast<double>(std::pow(static_cast<long double>(gamma) / pi * osr, n));
}

}  // namespace oracle
