#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbadc/analyze.hpp"

namespace cbadc {

enum class EstimateForm { batch, mixed, parallel };

struct PipelineConfig {
  // system: a chain, or raw matrices (design / predict only)
  std::optional<ChainSpec> chain;
  std::optional<AnalogSystem> matrices;
  Readout readout = Readout::all_states;
  double b = 1.0;
  double b_u = 1.0;
  // control
  double T = 1.0;
  // design: exactly one of eta2 / osr
  std::optional<double> eta2;
  std::optional<double> osr;
  // input
  InputSignal input;
  std::optional<Mismatch> mismatch;
  std::vector<NoiseInjection> noise;
  // run
  long long periods = 1LL << 16;
  std::uint64_t seed = 1;
  std::optional<double> T_u;  ///< defaults to T
  SimOptions sim;
  // estimate
  EstimateForm form = EstimateForm::batch;
  int latency = 0;  ///< 0 = settle length
  // analysis
  WelchOptions welch;
  std::optional<double> band_hi;  ///< Hz, defaults to 1 / (2 T OSR)
  // paths (relative ones resolve against the output directory)
  std::string trace_path = "trace.cbt";
  std::string coeffs_path = "coefficients.json";
  std::string estimate_path = "estimates.csv";
  std::string psd_path = "psd.csv";
  std::string report_path = "report.json";

  /// Analog system used by design and estimation (nominal, no mismatch).
  AnalogSystem system() const;
  /// T_u if set, else T.
  double estimate_period() const;
  /// eta2, or eta_from_osr(T |beta_1|, osr, n)^2 for chains. Throws
  /// std::invalid_argument when neither (or both) is given, or osr with raw
  /// matrices.
  double resolved_eta2() const;
  /// OSR for reporting: the configured one, else derived from omega_crit.
  double resolved_osr() const;
  /// Upper band edge [Hz] for SNR and noise power.
  double resolved_band_hi() const;
  /// Throws std::invalid_argument on missing or inconsistent sections.
  void validate() const;
};

/// JSON text <-> config. Unknown keys are rejected.
PipelineConfig parse_config(const std::string& json_text);
std::string serialize_config(const PipelineConfig& cfg);

PipelineConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

/// Built-in presets: fig5, fig7, hw-nominal, limit-cycle, n2.
std::vector<std::string> preset_names();
PipelineConfig preset(const std::string& name);

/// "zero", "const:c" or "sine:A,f[,phase]".
InputSignal parse_input(const std::string& text);

}  // namespace cbadc
