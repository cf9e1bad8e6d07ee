#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbadc/model.hpp"

namespace cbadc {

struct InputSignal {
  enum class Kind { zero, constant, sine };
  Kind kind = Kind::zero;
  double value = 0.0;      ///< constant level
  double amplitude = 0.0;  ///< sine amplitude
  double frequency = 0.0;  ///< sine frequency [Hz]
  double phase = 0.0;      ///< sine phase [rad]

  static InputSignal zero() { return {}; }
  static InputSignal constant(double c);
  static InputSignal sine(double amplitude, double frequency_hz, double phase = 0.0);

  double operator()(double t) const;
  /// Largest |u(t)| over all t.
  double peak() const;
};

/// Control samples stored as quantizer level indices in [0, levels - 1];
/// index j stands for -1 + 2 j / (levels - 1).
struct ControlTrace {
  double T = 0.0;
  int n = 0;
  int levels = 2;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::uint16_t> codes;  ///< period-major, n codes per period

  long long length() const { return n > 0 ? static_cast<long long>(codes.size()) / n : 0; }
  double value(long long k, int l) const;
  /// n x length matrix of control values.
  Mat to_matrix() const;
};

/// White noise entering stage `stage` (1-based) through that stage's gain:
/// dx_stage/dt gains beta_stage z(t), with two-sided PSD sigma2.
struct NoiseInjection {
  int stage = 1;
  double sigma2 = 0.0;
};

/// Multiplicative component errors: actual = nominal * scale.
struct Mismatch {
  std::vector<double> beta_scale;
  std::vector<double> kappa_scale;

  /// Same relative error on every stage.
  static Mismatch fixed(int n, double beta_rel, double kappa_rel);
  /// Independent uniform draws per stage: beta within +-beta_percent %,
  /// kappa within +-kappa_percent %.
  static Mismatch sampled(int n, double beta_percent, double kappa_percent, std::uint64_t seed);
  ChainSpec apply(const ChainSpec& nominal) const;
};

inline constexpr std::size_t kMaxSnapshots = std::size_t{1} << 16;

struct SimOptions {
  int substeps = 64;             ///< monitoring / noise resolution per period
  bool allow_unstable = false;   ///< run even if check_stability fails
  std::size_t max_snapshots = 0; ///< decimated trajectory length, 0 = none, capped at kMaxSnapshots
  double overflow_factor = 10.0; ///< abort once |x_l| > overflow_factor * b
};

struct SimConfig {
  ChainSpec spec;
  double T = 1.0;
  double b = 1.0;
  double b_u = 1.0;
  InputSignal input;
  long long periods = 0;
  std::uint64_t seed = 0;
  std::vector<NoiseInjection> noise;
  std::optional<Mismatch> mismatch;
  SimOptions options;
  std::string config_hash;
};

struct SimReport {
  std::vector<double> max_abs_state;
  long long bound_violations = 0;
  StabilityVerdict stability;
  Mat snapshots;                       ///< n x K states at clock instants
  std::vector<long long> snapshot_periods;
};

struct SimResult {
  ControlTrace trace;
  SimReport report;
};

/// Clocked simulation: at t = kT the controls are quantized from x(kT)
/// (plus threshold dither), then held while the state is propagated
/// exactly over the period. Throws SimulationDiverged on overflow and
/// std::invalid_argument on bad configs or (without allow_unstable) a
/// failed stability check.
SimResult simulate(const SimConfig& cfg);

/// Quantizer level index for state x with bound b.
int quantize_level(double x, double b, int levels);

/// Threshold dither in [-1, 1) for (seed, stage, period); scale by d b.
double dither_unit(std::uint64_t seed, int stage, long long period);

/// kappa_{1,l} = beta / (n (n - 1)) for l = 2..n, beta taken from stage 1.
/// Entries already present in spec.kappa_fb are kept.
ChainSpec dither_feedback_augment(const ChainSpec& spec);

}  // namespace cbadc
