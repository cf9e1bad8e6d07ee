#pragma once

#include <optional>
#include <vector>

#include "cbadc/estimate.hpp"

namespace cbadc {

struct WelchOptions {
  long long segment = 1LL << 14;  ///< power of two
  double overlap = 0.5;           ///< fraction in [0, 1)
};

/// One-sided power spectral density on the grid f_k = k fs / segment.
struct Spectrum {
  double fs = 0.0;
  long long segment = 0;
  std::vector<double> freqs;
  std::vector<double> psd;  ///< units^2 / Hz
  double df() const { return fs / static_cast<double>(segment); }
  /// Sum of psd df over bins with f in [f_lo, f_hi].
  double power(double f_lo, double f_hi) const;
};

/// Welch estimate: Hann window, per-segment mean removal, averaged
/// periodograms scaled so that sum(psd) df equals the variance.
/// Throws std::invalid_argument if the segment is not a power of two or
/// exceeds the sample count.
Spectrum psd(const Vec& samples, double fs, const WelchOptions& opts = {});

struct ToneOptions {
  int guard_bins = 3;
  int harmonics = 6;           ///< harmonics 2..harmonics+1 counted as distortion
  bool require_tone = true;
  double detect_db = 20.0;     ///< peak over in-band median needed to call it a tone
};

struct SpectrumReport {
  double band_lo = 0.0;
  double band_hi = 0.0;
  bool tone_found = false;
  double tone_hz = 0.0;
  double tone_amp = 0.0;
  double signal_power = 0.0;
  double noise_power = 0.0;        ///< excluding tone, harmonics and DC bins
  double noise_dist_power = 0.0;   ///< excluding tone and DC bins
  double snr_db = 0.0;
  double sndr_db = 0.0;
  double sfdr_db = 0.0;
};

/// Tone detection (parabolic interpolation on the log PSD around the largest
/// in-band bin) and SNR / SNDR / SFDR over [band_lo, band_hi]. Bins up to
/// guard_bins above DC are not counted. Without a tone, only the noise
/// powers are filled and the dB figures are NaN; with require_tone that
/// case throws std::runtime_error. SNR / SNDR are NaN when no noise bins
/// remain in the band.
SpectrumReport snr_in_band(const Spectrum& spec, double band_lo, double band_hi,
                           const ToneOptions& opts = {});

/// Largest 10 log10(psd / rolling median) over bins in [f_lo, f_hi],
/// median over `window` bins centred on each bin.
struct PeakInfo {
  double prominence_db = 0.0;
  double freq = 0.0;
};
PeakInfo largest_peak(const Spectrum& spec, double f_lo, double f_hi, int window = 51);

/// Least-squares slope of 10 log10(psd) against log10(f) over bins in
/// [f_lo, f_hi], in dB per decade.
double psd_slope_db_per_decade(const Spectrum& spec, double f_lo, double f_hi);

/// Simulation + design + estimation settings shared by the sweep helpers.
struct ExperimentConfig {
  ChainSpec spec;
  double T = 1.0;
  double b = 1.0;
  double b_u = 1.0;
  double osr = 32.0;
  Readout readout = Readout::all_states;
  long long periods = 1LL << 18;
  std::uint64_t seed = 1;
  SimOptions sim;
  WelchOptions welch;
  ToneOptions tone;
};

/// eta from eta_from_osr(T |beta_1|, osr, n).
double experiment_eta(const ExperimentConfig& cfg);

/// Clock-rate estimate u_hat over its valid range for a given input.
/// `mismatch` alters the simulated system only; the filter is designed from
/// the nominal one.
Vec run_estimate(const ExperimentConfig& cfg, const InputSignal& input,
                 const std::optional<Mismatch>& mismatch = std::nullopt);

struct SweepPoint {
  double amplitude = 0.0;
  double snr_db = 0.0;        ///< measured; NaN when no tone is present
  double predicted_db = 0.0;  ///< predict_snr with alpha = 1
  double noise_power = 0.0;   ///< in-band
};

/// Sine input at f0 for each amplitude (ascending), SNR over [0, f_crit]
/// with f_crit = 1 / (2 T osr).
std::vector<SweepPoint> snr_sweep(const ExperimentConfig& cfg, const std::vector<double>& amplitudes,
                                  double f0);

struct LimitCycleResult {
  PeakInfo plain;
  PeakInfo feedback;
};

/// Constant input u on `plain` and `feedback` (same cfg otherwise); peak
/// prominence of each u_hat PSD over (guard, f_crit].
LimitCycleResult limit_cycle_check(const ExperimentConfig& plain, const ExperimentConfig& feedback,
                                   double u);

}  // namespace cbadc
