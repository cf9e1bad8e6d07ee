#include "cbadc/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "cbadc/xfer.hpp"

namespace cbadc {

double Spectrum::power(double f_lo, double f_hi) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    if (freqs[k] >= f_lo && freqs[k] <= f_hi) sum += psd[k];
  return sum * df();
}

Spectrum psd(const Vec& samples, double fs, const WelchOptions& opts) {
  const long long L = opts.segment;
  const long long N = samples.size();
  if (L < 4 || (L & (L - 1)) != 0) throw std::invalid_argument("psd: segment must be a power of two >= 4");
  if (L > N) throw std::invalid_argument("psd: fewer samples than one segment");
  if (!(fs > 0.0)) throw std::invalid_argument("psd: sample rate must be > 0");
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) throw std::invalid_argument("psd: overlap must be in [0, 1)");
  const long long step = std::max<long long>(1, L - std::llround(opts.overlap * static_cast<double>(L)));
  const long long segments = 1 + (N - L) / step;

  std::vector<double> w(static_cast<std::size_t>(L));
  double wsum2 = 0.0;
  for (long long i = 0; i < L; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
    wsum2 += w[i] * w[i];
  }

  Spectrum out;
  out.fs = fs;
  out.segment = L;
  const long long K = L / 2 + 1;
  out.psd.assign(static_cast<std::size_t>(K), 0.0);
  out.freqs.resize(static_cast<std::size_t>(K));
  for (long long k = 0; k < K; ++k) out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(L);

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(L));
  std::vector<std::complex<double>> X;
  for (long long s = 0; s < segments; ++s) {
    const long long a = s * step;
    const double mean = samples.segment(a, L).mean();
    for (long long i = 0; i < L; ++i) buf[i] = (samples(a + i) - mean) * w[i];
    fft.fwd(X, buf);
    for (long long k = 0; k < K; ++k) out.psd[k] += std::norm(X[k]);
  }
  const double scale = 1.0 / (fs * wsum2 * static_cast<double>(segments));
  for (long long k = 0; k < K; ++k) {
    const bool edge = k == 0 || k == L / 2;
    out.psd[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

namespace {

struct BinRange {
  long long lo = 0;
  long long hi = -1;  // inclusive
};

BinRange band_bins(const Spectrum& spec, double f_lo, double f_hi, long long min_bin) {
  const double df = spec.df();
  const auto last = static_cast<long long>(spec.psd.size()) - 1;
  BinRange r;
  r.lo = std::max(min_bin, static_cast<long long>(std::ceil(f_lo / df - 1e-9)));
  r.hi = std::min(last, static_cast<long long>(std::floor(f_hi / df + 1e-9)));
  return r;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double db(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace

SpectrumReport snr_in_band(const Spectrum& spec, double band_lo, double band_hi,
                           const ToneOptions& opts) {
  if (opts.guard_bins < 0 || opts.harmonics < 0) throw std::invalid_argument("snr_in_band: bad options");
  const BinRange r = band_bins(spec, band_lo, band_hi, opts.guard_bins + 1);
  if (r.hi < r.lo) throw std::invalid_argument("snr_in_band: band holds no bins");
  const double df = spec.df();
  const long long g = opts.guard_bins;
  const auto last = static_cast<long long>(spec.psd.size()) - 1;

  SpectrumReport rep;
  rep.band_lo = band_lo;
  rep.band_hi = band_hi;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.snr_db = rep.sndr_db = rep.sfdr_db = nan;

  long long k0 = r.lo;
  for (long long k = r.lo; k <= r.hi; ++k)
    if (spec.psd[k] > spec.psd[k0]) k0 = k;
  const double floor_med =
      median_of(std::vector<double>(spec.psd.begin() + r.lo, spec.psd.begin() + r.hi + 1));
  rep.tone_found = spec.psd[k0] > 0.0 &&
                   (floor_med <= 0.0 || db(spec.psd[k0] / floor_med) >= opts.detect_db);

  // 0 = noise, 1 = tone, 2 = harmonic
  std::vector<int> kind(spec.psd.size(), 0);
  if (rep.tone_found) {
    double delta = 0.0;
    if (k0 > 0 && k0 < last) {
      const double a = std::log(std::max(spec.psd[k0 - 1], 1e-300));
      const double b = std::log(spec.psd[k0]);
      const double c = std::log(std::max(spec.psd[k0 + 1], 1e-300));
      const double den = a - 2.0 * b + c;
      if (den < 0.0) delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
    }
    rep.tone_hz = (static_cast<double>(k0) + delta) * df;
    for (long long k = std::max(0LL, k0 - g); k <= std::min(last, k0 + g); ++k) {
      kind[k] = 1;
      rep.signal_power += spec.psd[k];
    }
    rep.signal_power *= df;
    rep.tone_amp = std::sqrt(2.0 * rep.signal_power);
    for (int h = 2; h <= opts.harmonics + 1; ++h) {
      const double fh = h * rep.tone_hz;
      if (fh > band_hi) break;
      const auto kh = std::llround(fh / df);
      for (long long k = std::max(0LL, kh - g); k <= std::min(last, kh + g); ++k)
        if (kind[k] == 0) kind[k] = 2;
    }
  } else if (opts.require_tone) {
    throw std::runtime_error("snr_in_band: no tone detected in band");
  }

  for (long long k = r.lo; k <= r.hi; ++k) {
    if (kind[k] == 0) rep.noise_power += spec.psd[k];
    if (kind[k] != 1) rep.noise_dist_power += spec.psd[k];
  }
  rep.noise_power *= df;
  rep.noise_dist_power *= df;
  if (!rep.tone_found) return rep;

  // No noise bins left (short segment): the ratios are undefined.
  if (rep.noise_power > 0.0) rep.snr_db = db(rep.signal_power / rep.noise_power);
  if (rep.noise_dist_power > 0.0) rep.sndr_db = db(rep.signal_power / rep.noise_dist_power);
  long long ks = -1;
  for (long long k = r.lo; k <= r.hi; ++k)
    if (kind[k] != 1 && (ks < 0 || spec.psd[k] > spec.psd[ks])) ks = k;
  if (ks >= 0) {
    double spur = 0.0;
    for (long long k = std::max(r.lo, ks - g); k <= std::min(r.hi, ks + g); ++k)
      if (kind[k] != 1) spur += spec.psd[k];
    rep.sfdr_db = db(rep.signal_power / (spur * df));
  }
  return rep;
}

PeakInfo largest_peak(const Spectrum& spec, double f_lo, double f_hi, int window) {
  if (window < 3) throw std::invalid_argument("largest_peak: window must be >= 3");
  const BinRange r = band_bins(spec, f_lo, f_hi, 1);
  if (r.hi < r.lo) throw std::invalid_argument("largest_peak: range holds no bins");
  const auto K = static_cast<long long>(spec.psd.size());
  const long long half = window / 2;
  PeakInfo best;
  best.prominence_db = -std::numeric_limits<double>::infinity();
  std::vector<double> buf;
  for (long long k = r.lo; k <= r.hi; ++k) {
    const long long a = std::max(1LL, std::min(k - half, K - window));
    const long long b = std::min(K, a + window);
    buf.assign(spec.psd.begin() + a, spec.psd.begin() + b);
    const double med = median_of(buf);
    if (!(med > 0.0)) continue;
    const double p = db(spec.psd[k] / med);
    if (p > best.prominence_db) {
      best.prominence_db = p;
      best.freq = spec.freqs[k];
    }
  }
  return best;
}

double psd_slope_db_per_decade(const Spectrum& spec, double f_lo, double f_hi) {
  const BinRange r = band_bins(spec, f_lo, f_hi, 1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long long count = 0;
  for (long long k = r.lo; k <= r.hi; ++k) {
    if (!(spec.psd[k] > 0.0)) continue;
    const double x = std::log10(spec.freqs[k]);
    const double y = db(spec.psd[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("psd_slope_db_per_decade: fewer than two bins");
  const double c = static_cast<double>(count);
  return (c * sxy - sx * sy) / (c * sxx - sx * sx);
}

double experiment_eta(const ExperimentConfig& cfg) {
  return eta_from_osr(cfg.T * std::abs(cfg.spec.beta.at(0)), cfg.osr, cfg.spec.n);
}

namespace {

FilterCoefficients experiment_filter(const ExperimentConfig& cfg) {
  const AnalogSystem sys = build_chain(cfg.spec, cfg.readout, cfg.b, cfg.b_u);
  const double eta = experiment_eta(cfg);
  return design_filter(sys, eta * eta, cfg.T);
}

Vec estimate_with(const ExperimentConfig& cfg, const FilterCoefficients& coeffs,
                  const InputSignal& input, const std::optional<Mismatch>& mismatch,
                  std::uint64_t seed) {
  SimConfig sc;
  sc.spec = cfg.spec;
  sc.T = cfg.T;
  sc.b = cfg.b;
  sc.b_u = cfg.b_u;
  sc.input = input;
  sc.periods = cfg.periods;
  sc.seed = seed;
  sc.mismatch = mismatch;
  sc.options = cfg.sim;
  const SimResult sim = simulate(sc);
  return estimate_batch(coeffs, sim.trace).valid(0);
}

double f_crit_of(const ExperimentConfig& cfg) { return 1.0 / (2.0 * cfg.T * cfg.osr); }

}  // namespace

Vec run_estimate(const ExperimentConfig& cfg, const InputSignal& input,
                 const std::optional<Mismatch>& mismatch) {
  return estimate_with(cfg, experiment_filter(cfg), input, mismatch, cfg.seed);
}

std::vector<SweepPoint> snr_sweep(const ExperimentConfig& cfg, const std::vector<double>& amplitudes,
                                  double f0) {
  if (!std::is_sorted(amplitudes.begin(), amplitudes.end()))
    throw std::invalid_argument("snr_sweep: amplitudes must be ascending");
  const FilterCoefficients coeffs = experiment_filter(cfg);
  const double fs = 1.0 / cfg.T;
  const double df = fs / static_cast<double>(cfg.welch.segment);
  const double tone = std::max(1.0, std::round(f0 / df)) * df;
  const double fc = f_crit_of(cfg);
  const double gamma = cfg.T * std::abs(cfg.spec.beta.at(0));

  std::vector<SweepPoint> curve;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double A = amplitudes[i];
    const InputSignal input = A > 0.0 ? InputSignal::sine(A, tone) : InputSignal::zero();
    const Vec u = estimate_with(cfg, coeffs, input, std::nullopt, cfg.seed + i);
    ToneOptions topts = cfg.tone;
    topts.require_tone = A > 0.0;
    const SpectrumReport rep = snr_in_band(psd(u, fs, cfg.welch), 0.0, fc, topts);
    SweepPoint p;
    p.amplitude = A;
    p.snr_db = rep.snr_db;
    p.noise_power = rep.noise_power;
    p.predicted_db = predict_snr(A, cfg.b, cfg.spec.n, gamma, cfg.osr, 1.0);
    curve.push_back(p);
  }
  return curve;
}

LimitCycleResult limit_cycle_check(const ExperimentConfig& plain, const ExperimentConfig& feedback,
                                   double u) {
  const auto peak = [u](const ExperimentConfig& cfg) {
    const Vec est = run_estimate(cfg, InputSignal::constant(u));
    const Spectrum s = psd(est, 1.0 / cfg.T, cfg.welch);
    return largest_peak(s, (cfg.tone.guard_bins + 1) * s.df(), f_crit_of(cfg));
  };
  return {peak(plain), peak(feedback)};
}

}  // namespace cbadc
