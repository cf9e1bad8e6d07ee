#pragma once

#include <vector>

#include "cbadc/model.hpp"

namespace cbadc {

/// H(omega) = G^H (G G^H + eta2 I)^{-1}, k x m.
CMat ntf(const AnalogSystem& sys, double eta2, double omega);

/// H(omega) G(omega), k x k.
CMat stf(const AnalogSystem& sys, double eta2, double omega);

/// Scalar-input STF ||G||^2 / (||G||^2 + eta2). Requires k = 1.
double stf_scalar(const AnalogSystem& sys, double eta2, double omega);

/// Largest singular value of G(omega); the vector norm when k = 1.
double atf_gain(const AnalogSystem& sys, double omega);

struct TransferPoint {
  double omega;
  CMat stf;
  CMat ntf;
  double eta2;
};

TransferPoint transfer_point(const AnalogSystem& sys, double eta2, double omega);

/// Solves ||G(omega_crit)|| = eta by bisection on log(omega) over
/// [scale 1e-6, scale 1e3] where scale is max |A_ij|, |B_ij|.
/// Relative tolerance 1e-13.
double bandwidth(const AnalogSystem& sys, double eta2);

/// |beta| / eta^{1/n}, for undamped uniform chains with last-state readout.
double bandwidth_closed_form(double beta, double eta, int n);

/// eta = ((gamma / pi) OSR)^n.
double eta_from_osr(double gamma, double osr, int n);

/// OSR = (1/T) / (2 f_crit).
double osr_from_bandwidth(double omega_crit, double T);

/// sigma^2_{y|B} = alpha T (2b)^2 / 12.
double sigma2_y_band(double alpha, double T, double b);

struct NoisePrediction {
  double omega_lo = 0.0;  ///< band is [-omega_hi, omega_hi]; omega_lo = -omega_hi
  double omega_hi = 0.0;
  double S_N = 0.0;
  double S_N_closed = -1.0;  ///< negative when no closed form applies
  double sigma2_y_B = 0.0;
  double alpha = 1.0;
  std::vector<double> contributions;
  bool band_warning = false;  ///< ||G|| < eta somewhere in the band
};

/// S_N = (sigma2 / 2 pi) \int_{-w}^{w} d omega / ||G||^2 by quadrature.
/// When `chain` is non-null (undamped, last-state readout) the closed form
/// is filled in as well.
NoisePrediction predict_conversion_noise(const AnalogSystem& sys, double eta2, double omega_hi,
                                         double sigma2_y_B, const ChainSpec* chain = nullptr,
                                         double alpha = 1.0);

/// (sigma2 / pi) w^{2n+1} / ((2n+1) prod beta^2).
double conversion_noise_closed_form(const ChainSpec& chain, double omega_hi, double sigma2_y_B);

/// SNR [dB] = 10 log10( alpha^{-1} (3 A^2 / 2 b^2) (2n+1) (gamma/pi)^{2n} OSR^{2n+1} ).
double predict_snr(double amplitude, double b, int n, double gamma, double osr, double alpha = 1.0);

/// A noise source entering the analog state through the n-vector `input`.
struct NoiseSource {
  Vec input;
  double sigma2 = 0.0;  ///< in-band PSD level sigma^2_{z|B}
};

/// Noise source entering stage `stage` (1-based) with coupling lambda:
/// input = lambda beta_stage e_stage.
NoiseSource chain_noise_source(const ChainSpec& chain, int stage, double lambda, double sigma2);

/// Sum over sources of (sigma2 / 2 pi) \int |G^H G_z|^2 / (||G||^2 + eta2)^2.
/// Requires k = 1. Per-source powers go to `contributions`.
NoisePrediction predict_thermal_noise(const AnalogSystem& sys, double eta2,
                                      const std::vector<NoiseSource>& sources, double omega_hi);

struct MismatchPrediction {
  double eps_g = 0.0;  ///< STF modification term, white input of PSD sigma2_u
  double eps_q = 0.0;  ///< control-path term, white controls of PSD sigma2_s
};

/// Both terms use the nominal filter: H~ built from `nominal`, G and G_q
/// from `actual`.
MismatchPrediction predict_mismatch_noise(const AnalogSystem& nominal, const AnalogSystem& actual,
                                          double eta2, double omega_hi, double sigma2_u,
                                          double sigma2_s);

}  // namespace cbadc
