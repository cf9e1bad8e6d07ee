#pragma once

#include <string>
#include <vector>

#include "cbadc/analyze.hpp"
#include "cbadc/design.hpp"
#include "cbadc/estimate.hpp"
#include "cbadc/sim.hpp"

namespace cbadc {

/// Provenance written into every output header.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

const char* tool_version();

enum class TraceEncoding { text, binary };

/// .cbt: one JSON header line {format, version, T_seconds, n, levels,
/// length, seed, config_hash, encoding}, then the body. Text body: one line
/// per period with n space-separated level indices. Binary body (single-bit
/// only): n bits per period, packed little-endian within bytes.
void write_trace(const std::string& path, const ControlTrace& trace,
                 TraceEncoding encoding = TraceEncoding::text);
ControlTrace read_trace(const std::string& path);

/// Coefficients as JSON: base64 of row-major little-endian binary64 per
/// matrix plus a decimal mirror that is ignored on read.
void write_coefficients(const std::string& path, const FilterCoefficients& coeffs,
                        const Provenance& prov);
/// `prov`, when given, receives the header provenance.
FilterCoefficients read_coefficients(const std::string& path, Provenance* prov = nullptr);

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

enum class EstimateEncoding { csv, binary };

/// CSV: "# {json header}" line, column header "t_seconds,u_hat_1,...", one
/// row per sample. Binary: JSON header line, then k binary64 values per
/// sample, little-endian. Only the valid range is written.
void write_estimates(const std::string& path, const EstimateTrace& est, const Provenance& prov,
                     EstimateEncoding encoding = EstimateEncoding::csv);
EstimateTrace read_estimates(const std::string& path, Provenance* prov = nullptr);

/// "# {json header}" line, "f_hz,psd", rows.
void write_psd_csv(const std::string& path, const Spectrum& spec, const Provenance& prov);

/// JSON {snr_db, sndr_db, sfdr_db, tone_hz, tone_amp, band, ...}.
void write_report_json(const std::string& path, const SpectrumReport& rep, const Provenance& prov);

/// "# {json header}" line, "omega_rad_s,stf_mag,ntf_mag_1..m", rows.
void write_predict_csv(const std::string& path, const AnalogSystem& sys, double eta2,
                       const std::vector<double>& omegas, const Provenance& prov);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

}  // namespace cbadc
