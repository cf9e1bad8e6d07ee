#include "cbadc/xfer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cbadc/errors.hpp"
#include "cbadc/quadrature.hpp"

namespace cbadc {

namespace {

void require_scalar_input(const AnalogSystem& sys, const char* who) {
  if (sys.k() != 1) throw std::invalid_argument(std::string(who) + ": requires k = 1");
}

void require_eta2(double eta2, const char* who) {
  if (!(eta2 > 0.0)) throw std::invalid_argument(std::string(who) + ": eta2 must be > 0");
}

// G^H / (||G||^2 + eta2) evaluated as u^H / (s + eta2 / s) with G = s u, so
// that huge low-frequency gains do not overflow.
CMat scalar_input_ntf(const CMat& G, double eta2) {
  const double s = G.norm();
  if (s == 0.0) return CMat::Zero(G.cols(), G.rows());
  return (G / s).adjoint() / (s + eta2 / s);
}

}  // namespace

CMat ntf(const AnalogSystem& sys, double eta2, double omega) {
  require_eta2(eta2, "ntf");
  const CMat G = atf(sys, omega).G;
  if (sys.k() == 1) return scalar_input_ntf(G, eta2);
  const int m = sys.m();
  const CMat S = G * G.adjoint() + eta2 * CMat::Identity(m, m);
  // H = G^H S^{-1}  <=>  S^H H^H = G, and S is Hermitian.
  return S.ldlt().solve(G).adjoint();
}

CMat stf(const AnalogSystem& sys, double eta2, double omega) {
  return ntf(sys, eta2, omega) * atf(sys, omega).G;
}

double atf_gain(const AnalogSystem& sys, double omega) {
  const CMat G = atf(sys, omega).G;
  if (G.cols() == 1) return G.norm();
  Eigen::JacobiSVD<CMat> svd(G);
  return svd.singularValues()(0);
}

double stf_scalar(const AnalogSystem& sys, double eta2, double omega) {
  require_scalar_input(sys, "stf_scalar");
  require_eta2(eta2, "stf_scalar");
  const double g2 = atf(sys, omega).G.squaredNorm();
  if (std::isinf(g2)) return 1.0;
  return g2 / (g2 + eta2);
}

TransferPoint transfer_point(const AnalogSystem& sys, double eta2, double omega) {
  TransferPoint p;
  p.omega = omega;
  p.eta2 = eta2;
  p.ntf = ntf(sys, eta2, omega);
  p.stf = p.ntf * atf(sys, omega).G;
  return p;
}

double bandwidth(const AnalogSystem& sys, double eta2) {
  require_eta2(eta2, "bandwidth");
  const double scale = std::max(sys.A.cwiseAbs().maxCoeff(), sys.B.cwiseAbs().maxCoeff());
  if (!(scale > 0.0)) throw std::invalid_argument("bandwidth: zero system");
  const double eta = std::sqrt(eta2);
  double lo = std::log(scale * 1e-6);
  double hi = std::log(scale * 1e3);
  const auto excess = [&](double logw) { return atf_gain(sys, std::exp(logw)) - eta; };
  if (!(excess(lo) > 0.0) || !(excess(hi) < 0.0))
    throw ConvergenceError("bandwidth: ||G|| = eta not bracketed", 0.0);
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double bandwidth_closed_form(double beta, double eta, int n) {
  if (n < 1 || !(eta > 0.0)) throw std::invalid_argument("bandwidth_closed_form: bad arguments");
  return std::abs(beta) / std::pow(eta, 1.0 / n);
}

double eta_from_osr(double gamma, double osr, int n) {
  if (!(gamma > 0.0) || !(osr > 0.0) || n < 1)
    throw std::invalid_argument("eta_from_osr: gamma, osr > 0 and n >= 1 required");
  return std::pow(gamma / std::numbers::pi * osr, n);
}

double osr_from_bandwidth(double omega_crit, double T) {
  const double f_crit = omega_crit / (2.0 * std::numbers::pi);
  return (1.0 / T) / (2.0 * f_crit);
}

double sigma2_y_band(double alpha, double T, double b) {
  return alpha * T * (2.0 * b) * (2.0 * b) / 12.0;
}

double conversion_noise_closed_form(const ChainSpec& chain, double omega_hi, double sigma2_y_B) {
  chain.validate();
  double prod_beta2 = 1.0;
  for (double b : chain.beta) prod_beta2 *= b * b;
  const int n = chain.n;
  return sigma2_y_B / std::numbers::pi * std::pow(omega_hi, 2 * n + 1) /
         ((2.0 * n + 1.0) * prod_beta2);
}

NoisePrediction predict_conversion_noise(const AnalogSystem& sys, double eta2, double omega_hi,
                                         double sigma2_y_B, const ChainSpec* chain, double alpha) {
  require_eta2(eta2, "predict_conversion_noise");
  if (!(omega_hi > 0.0)) throw std::invalid_argument("predict_conversion_noise: omega_hi > 0");
  NoisePrediction p;
  p.omega_lo = -omega_hi;
  p.omega_hi = omega_hi;
  p.sigma2_y_B = sigma2_y_B;
  p.alpha = alpha;
  p.band_warning = atf_gain(sys, omega_hi) < std::sqrt(eta2) * (1.0 - 1e-9);
  const auto integrand = [&](double w) {
    if (w == 0.0) return 0.0;
    const double g = atf_gain(sys, w);
    return 1.0 / (g * g);
  };
  // The band is symmetric, the integrand even.
  p.S_N = sigma2_y_B / (2.0 * std::numbers::pi) * 2.0 * integrate_band(integrand, omega_hi);
  p.contributions.push_back(p.S_N);
  if (chain != nullptr) {
    bool undamped = true;
    for (double r : chain->rho) undamped = undamped && r == 0.0;
    if (undamped && sys.m() == 1)
      p.S_N_closed = conversion_noise_closed_form(*chain, omega_hi, sigma2_y_B);
  }
  return p;
}

double predict_snr(double amplitude, double b, int n, double gamma, double osr, double alpha) {
  if (!(alpha > 0.0) || !(b > 0.0)) throw std::invalid_argument("predict_snr: alpha, b > 0");
  const double pi = std::numbers::pi;
  const double snr = (1.0 / alpha) * (3.0 * amplitude * amplitude / (2.0 * b * b)) *
                     (2.0 * n + 1.0) * std::pow(gamma / pi, 2 * n) * std::pow(osr, 2 * n + 1);
  return 10.0 * std::log10(snr);
}

NoiseSource chain_noise_source(const ChainSpec& chain, int stage, double lambda, double sigma2) {
  chain.validate();
  if (stage < 1 || stage > chain.n)
    throw std::invalid_argument("chain_noise_source: stage out of range");
  NoiseSource s;
  s.input = Vec::Zero(chain.n);
  s.input(stage - 1) = lambda * chain.beta[stage - 1];
  s.sigma2 = sigma2;
  return s;
}

NoisePrediction predict_thermal_noise(const AnalogSystem& sys, double eta2,
                                      const std::vector<NoiseSource>& sources, double omega_hi) {
  require_scalar_input(sys, "predict_thermal_noise");
  require_eta2(eta2, "predict_thermal_noise");
  NoisePrediction p;
  p.omega_lo = -omega_hi;
  p.omega_hi = omega_hi;
  p.band_warning = atf_gain(sys, omega_hi) < std::sqrt(eta2) * (1.0 - 1e-9);
  for (const auto& src : sources) {
    if (src.input.size() != sys.n())
      throw std::invalid_argument("predict_thermal_noise: source dimension mismatch");
    if (src.input.isZero(0.0) || src.sigma2 == 0.0) {
      p.contributions.push_back(0.0);
      continue;
    }
    const auto integrand = [&](double w) {
      if (w == 0.0) return 0.0;
      const CMat Gz = transfer(sys, src.input, w);
      return (scalar_input_ntf(atf(sys, w).G, eta2) * Gz).squaredNorm();
    };
    const double power =
        src.sigma2 / (2.0 * std::numbers::pi) * 2.0 * integrate_band(integrand, omega_hi);
    p.contributions.push_back(power);
    p.S_N += power;
  }
  return p;
}

MismatchPrediction predict_mismatch_noise(const AnalogSystem& nominal, const AnalogSystem& actual,
                                          double eta2, double omega_hi, double sigma2_u,
                                          double sigma2_s) {
  require_scalar_input(nominal, "predict_mismatch_noise");
  require_eta2(eta2, "predict_mismatch_noise");
  if (nominal.n() != actual.n() || nominal.k() != actual.k() || nominal.m() != actual.m())
    throw std::invalid_argument("predict_mismatch_noise: systems differ in dimensions");
  const int n = nominal.n();

  const auto h_nominal = [&](double w) { return scalar_input_ntf(atf(nominal, w).G, eta2); };
  const auto g_term = [&](double w) {
    if (w == 0.0) return 0.0;
    const CMat d = atf(actual, w).G - atf(nominal, w).G;
    return (h_nominal(w) * d).squaredNorm();
  };
  const auto q_term = [&](double w) {
    if (w == 0.0) return 0.0;
    const CMat Gq_nom = transfer(nominal, nominal.Gamma, w);
    const CMat Gq_act = transfer(actual, actual.Gamma, w);
    const CMat H = h_nominal(w);
    double acc = 0.0;
    for (int l = 0; l < n; ++l) acc += (H * (Gq_nom.col(l) - Gq_act.col(l))).squaredNorm();
    return acc;
  };

  MismatchPrediction out;
  const double two_sided = 2.0 / (2.0 * std::numbers::pi);
  const bool same_g = (nominal.A - actual.A).isZero(0.0) && (nominal.B - actual.B).isZero(0.0) &&
                      (nominal.CT - actual.CT).isZero(0.0);
  const bool same_q = same_g && (nominal.Gamma - actual.Gamma).isZero(0.0);
  out.eps_g = same_g ? 0.0 : sigma2_u * two_sided * integrate_band(g_term, omega_hi);
  out.eps_q = same_q ? 0.0 : sigma2_s * two_sided * integrate_band(q_term, omega_hi);
  return out;
}

}  // namespace cbadc
