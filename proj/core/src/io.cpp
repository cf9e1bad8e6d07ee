#include "cbadc/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cbadc/version.hpp"
#include "cbadc/xfer.hpp"

namespace cbadc {

using nlohmann::json;

const char* tool_version() { return CBADC_VERSION_STRING; }

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

json header(const char* format, const Provenance& prov) {
  return {{"format", format}, {"version", tool_version()}, {"config_hash", prov.config_hash}, {"seed", prov.seed}};
}

json read_header_line(std::istream& in, const std::string& path, bool commented) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
  if (commented) {
    if (line.rfind("# ", 0) != 0) throw std::runtime_error(path + ": missing '# ' header line");
    line = line.substr(2);
  }
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad header: " + e.what());
  }
}

void put_f64(std::vector<unsigned char>& out, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

double get_f64(const unsigned char* p) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double x;
  std::memcpy(&x, &u, sizeof x);
  return x;
}

json matrix_entry(const Mat& M) {
  std::vector<unsigned char> bytes;
  json decimal = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      put_f64(bytes, M(i, j));
      row.push_back(format_double(M(i, j)));
    }
    decimal.push_back(row);
  }
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"base64", base64_encode(bytes)}, {"decimal", decimal}};
}

Mat matrix_from(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto bytes = base64_decode(j.at("base64").get<std::string>());
  if (rows < 0 || cols < 0 || bytes.size() != static_cast<std::size_t>(rows * cols * 8))
    throw std::runtime_error("coefficients: matrix " + name + " has the wrong size");
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = get_f64(bytes.data() + 8 * (i * cols + k));
  return M;
}

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[v >> 18];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kB64[v >> 18];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::runtime_error("base64: length is not a multiple of 4");
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int k = 0; k < 64; ++k) lut[static_cast<unsigned char>(kB64[k])] = k;
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      int d = 0;
      if (ch == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        d = lut[static_cast<unsigned char>(ch)];
        if (d < 0 || pad > 0) throw std::runtime_error("base64: invalid character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<unsigned char>(v >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 255));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 255));
  }
  return out;
}

void write_trace(const std::string& path, const ControlTrace& trace, TraceEncoding encoding) {
  if (trace.n < 1 || trace.levels < 2) throw std::invalid_argument("write_trace: bad trace shape");
  const bool binary = encoding == TraceEncoding::binary;
  if (binary && trace.levels != 2)
    throw std::invalid_argument("write_trace: binary encoding needs single-bit controls");
  json h = header("cbt", {trace.config_hash, trace.seed});
  h["T_seconds"] = trace.T;
  h["n"] = trace.n;
  h["levels"] = trace.levels;
  h["length"] = trace.length();
  h["encoding"] = binary ? "binary" : "text";
  auto out = open_out(path, binary);
  out << h.dump() << '\n';
  const long long M = trace.length();
  if (binary) {
    std::vector<unsigned char> bytes((static_cast<std::size_t>(M) * trace.n + 7) / 8, 0);
    for (std::size_t i = 0; i < trace.codes.size(); ++i)
      if (trace.codes[i]) bytes[i / 8] |= static_cast<unsigned char>(1U << (i % 8));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    std::string line;
    for (long long k = 0; k < M; ++k) {
      line.clear();
      for (int l = 0; l < trace.n; ++l) {
        if (l) line += ' ';
        line += std::to_string(trace.codes[static_cast<std::size_t>(k) * trace.n + l]);
      }
      line += '\n';
      out << line;
    }
  }
  if (!out) throw std::runtime_error("write_trace: write to " + path + " failed");
}

ControlTrace read_trace(const std::string& path) {
  auto in = open_in(path);
  const json h = read_header_line(in, path, false);
  ControlTrace t;
  try {
    if (h.at("format").get<std::string>() != "cbt") throw std::runtime_error(path + ": not a .cbt file");
    t.T = h.at("T_seconds").get<double>();
    t.n = h.at("n").get<int>();
    t.levels = h.at("levels").get<int>();
    t.seed = h.at("seed").get<std::uint64_t>();
    t.config_hash = h.at("config_hash").get<std::string>();
    const auto M = h.at("length").get<long long>();
    const auto enc = h.at("encoding").get<std::string>();
    if (t.n < 1 || t.levels < 2 || t.levels > 65536 || M < 0)
      throw std::runtime_error(path + ": bad trace dimensions");
    const auto count = static_cast<std::size_t>(M) * static_cast<std::size_t>(t.n);
    t.codes.resize(count);
    if (enc == "binary") {
      if (t.levels != 2) throw std::runtime_error(path + ": binary body needs levels = 2");
      std::vector<unsigned char> bytes((count + 7) / 8);
      in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw std::runtime_error(path + ": truncated binary body");
      for (std::size_t i = 0; i < count; ++i) t.codes[i] = (bytes[i / 8] >> (i % 8)) & 1U;
    } else if (enc == "text") {
      for (std::size_t i = 0; i < count; ++i) {
        long v = -1;
        if (!(in >> v)) throw std::runtime_error(path + ": truncated text body");
        if (v < 0 || v >= t.levels) throw std::runtime_error(path + ": control code out of range");
        t.codes[i] = static_cast<std::uint16_t>(v);
      }
    } else {
      throw std::runtime_error(path + ": unknown encoding " + enc);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad header: " + e.what());
  }
  return t;
}

void write_coefficients(const std::string& path, const FilterCoefficients& c, const Provenance& prov) {
  json j = header("cbadc-coefficients", prov);
  j["T_u"] = c.T_u;
  j["eta2"] = c.eta2;
  j["residual_f"] = c.residual_f;
  j["residual_b"] = c.residual_b;
  j["matrices"] = {{"Af", matrix_entry(c.Af)}, {"Ab", matrix_entry(c.Ab)}, {"Bf", matrix_entry(c.Bf)},
                   {"Bb", matrix_entry(c.Bb)}, {"W", matrix_entry(c.W)},   {"Vf", matrix_entry(c.Vf)},
                   {"Vb", matrix_entry(c.Vb)}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_coefficients: write to " + path + " failed");
}

FilterCoefficients read_coefficients(const std::string& path, Provenance* prov) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
    if (j.at("format").get<std::string>() != "cbadc-coefficients")
      throw std::runtime_error(path + ": not a coefficients file");
    FilterCoefficients c;
    c.T_u = j.at("T_u").get<double>();
    c.eta2 = j.at("eta2").get<double>();
    if (prov) *prov = {j.value("config_hash", std::string()), j.value("seed", std::uint64_t{0})};
    c.residual_f = j.value("residual_f", 0.0);
    c.residual_b = j.value("residual_b", 0.0);
    const json& m = j.at("matrices");
    c.Af = matrix_from(m.at("Af"), "Af");
    c.Ab = matrix_from(m.at("Ab"), "Ab");
    c.Bf = matrix_from(m.at("Bf"), "Bf");
    c.Bb = matrix_from(m.at("Bb"), "Bb");
    c.W = matrix_from(m.at("W"), "W");
    c.Vf = matrix_from(m.at("Vf"), "Vf");
    c.Vb = matrix_from(m.at("Vb"), "Vb");
    const auto n = c.Af.rows();
    if (c.Af.cols() != n || c.Ab.rows() != n || c.Ab.cols() != n || c.Bf.rows() != n ||
        c.Bb.rows() != n || c.Bb.cols() != c.Bf.cols() || c.W.rows() != n)
      throw std::runtime_error(path + ": inconsistent matrix shapes");
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_estimates(const std::string& path, const EstimateTrace& est, const Provenance& prov,
                     EstimateEncoding encoding) {
  const long long a = est.valid_begin;
  const long long b = est.valid_end;
  json h = header("cbadc-estimates", prov);
  h["T_u"] = est.T_u;
  h["k"] = est.samples.rows();
  h["length"] = b - a;
  h["first_index"] = a;
  const bool binary = encoding == EstimateEncoding::binary;
  h["encoding"] = binary ? "binary64" : "csv";
  auto out = open_out(path, binary);
  if (binary) {
    out << h.dump() << '\n';
    std::vector<unsigned char> bytes;
    bytes.reserve(static_cast<std::size_t>((b - a) * est.samples.rows() * 8));
    for (long long j = a; j < b; ++j)
      for (Eigen::Index r = 0; r < est.samples.rows(); ++r) put_f64(bytes, est.samples(r, j));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    out << "# " << h.dump() << '\n' << "t_seconds";
    for (Eigen::Index r = 0; r < est.samples.rows(); ++r) out << ",u_hat_" << r + 1;
    out << '\n';
    std::string line;
    for (long long j = a; j < b; ++j) {
      line = format_double(static_cast<double>(j) * est.T_u);
      for (Eigen::Index r = 0; r < est.samples.rows(); ++r) {
        line += ',';
        line += format_double(est.samples(r, j));
      }
      line += '\n';
      out << line;
    }
  }
  if (!out) throw std::runtime_error("write_estimates: write to " + path + " failed");
}

EstimateTrace read_estimates(const std::string& path, Provenance* prov) {
  auto in = open_in(path);
  const int first = in.peek();
  const bool csv = first == '#';
  const json h = read_header_line(in, path, csv);
  EstimateTrace est;
  try {
    if (h.at("format").get<std::string>() != "cbadc-estimates")
      throw std::runtime_error(path + ": not an estimates file");
    est.T_u = h.at("T_u").get<double>();
    if (prov) *prov = {h.value("config_hash", std::string()), h.value("seed", std::uint64_t{0})};
    const auto k = h.at("k").get<Eigen::Index>();
    const auto N = h.at("length").get<long long>();
    if (k < 1 || N < 0) throw std::runtime_error(path + ": bad dimensions");
    est.samples.resize(k, N);
    if (csv) {
      std::string line;
      std::getline(in, line);  // column names
      for (long long j = 0; j < N; ++j) {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated csv body");
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // time
        for (Eigen::Index r = 0; r < k; ++r) {
          if (!std::getline(ss, cell, ',')) throw std::runtime_error(path + ": short csv row");
          double v = 0.0;
          const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          if (res.ec != std::errc()) throw std::runtime_error(path + ": bad number '" + cell + "'");
          est.samples(r, j) = v;
        }
      }
    } else {
      std::vector<unsigned char> bytes(static_cast<std::size_t>(N * k * 8));
      in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw std::runtime_error(path + ": truncated binary body");
      for (long long j = 0; j < N; ++j)
        for (Eigen::Index r = 0; r < k; ++r) est.samples(r, j) = get_f64(bytes.data() + 8 * (j * k + r));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad header: " + e.what());
  }
  est.valid_begin = 0;
  est.valid_end = est.size();
  return est;
}

void write_psd_csv(const std::string& path, const Spectrum& spec, const Provenance& prov) {
  json h = header("cbadc-psd", prov);
  h["fs"] = spec.fs;
  h["segment"] = spec.segment;
  auto out = open_out(path);
  out << "# " << h.dump() << '\n' << "f_hz,psd\n";
  for (std::size_t k = 0; k < spec.psd.size(); ++k)
    out << format_double(spec.freqs[k]) << ',' << format_double(spec.psd[k]) << '\n';
  if (!out) throw std::runtime_error("write_psd_csv: write to " + path + " failed");
}

void write_report_json(const std::string& path, const SpectrumReport& rep, const Provenance& prov) {
  json j = header("cbadc-report", prov);
  const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  j["snr_db"] = num(rep.snr_db);
  j["sndr_db"] = num(rep.sndr_db);
  j["sfdr_db"] = num(rep.sfdr_db);
  j["tone_found"] = rep.tone_found;
  j["tone_hz"] = rep.tone_hz;
  j["tone_amp"] = rep.tone_amp;
  j["signal_power"] = rep.signal_power;
  j["noise_power"] = rep.noise_power;
  j["band"] = {rep.band_lo, rep.band_hi};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_report_json: write to " + path + " failed");
}

void write_predict_csv(const std::string& path, const AnalogSystem& sys, double eta2,
                       const std::vector<double>& omegas, const Provenance& prov) {
  json h = header("cbadc-predict", prov);
  h["eta2"] = eta2;
  auto out = open_out(path);
  out << "# " << h.dump() << '\n' << "omega_rad_s,stf_mag";
  for (int i = 0; i < sys.m(); ++i) out << ",ntf_mag_" << i + 1;
  out << '\n';
  for (double w : omegas) {
    const CMat H = ntf(sys, eta2, w);  // k x m
    out << format_double(w) << ',' << format_double(std::abs(stf_scalar(sys, eta2, w)));
    for (int i = 0; i < sys.m(); ++i) out << ',' << format_double(std::abs(H(0, i)));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_predict_csv: write to " + path + " failed");
}

}  // namespace cbadc
