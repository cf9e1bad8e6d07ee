#include "cbadc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cbadc/xfer.hpp"

namespace cbadc {

using nlohmann::json;

AnalogSystem PipelineConfig::system() const {
  if (matrices) return *matrices;
  if (!chain) throw std::invalid_argument("config: no system defined");
  return build_chain(*chain, readout, b, b_u);
}

double PipelineConfig::estimate_period() const { return T_u ? *T_u : T; }

double PipelineConfig::resolved_eta2() const {
  if (eta2.has_value() == osr.has_value())
    throw std::invalid_argument("config: design needs exactly one of eta2 and osr");
  if (eta2) {
    if (!(*eta2 > 0.0)) throw std::invalid_argument("config: eta2 must be > 0");
    return *eta2;
  }
  if (!chain) throw std::invalid_argument("config: osr needs a chain system; give eta2 instead");
  if (!(*osr > 0.0)) throw std::invalid_argument("config: osr must be > 0");
  const double eta = eta_from_osr(T * std::abs(chain->beta.at(0)), *osr, chain->n);
  return eta * eta;
}

double PipelineConfig::resolved_osr() const {
  if (osr) return *osr;
  return osr_from_bandwidth(bandwidth(system(), resolved_eta2()), T);
}

double PipelineConfig::resolved_band_hi() const {
  if (band_hi) return *band_hi;
  return 1.0 / (2.0 * T * resolved_osr());
}

void PipelineConfig::validate() const {
  if (chain.has_value() == matrices.has_value())
    throw std::invalid_argument("config: system needs exactly one of chain and matrices");
  if (chain) chain->validate();
  if (matrices) matrices->validate();
  if (!(T > 0.0)) throw std::invalid_argument("config: control.T must be > 0");
  if (!(b > 0.0) || !(b_u > 0.0)) throw std::invalid_argument("config: b and b_u must be > 0");
  if (periods < 1) throw std::invalid_argument("config: run.periods must be >= 1");
  if (T_u) substeps_per_period(T, *T_u);
  if (latency < 0) throw std::invalid_argument("config: estimate.latency must be >= 0");
  if (mismatch && chain) mismatch->apply(*chain);
}

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string("config: ") + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw std::invalid_argument(std::string("config: unknown key '") + it.key() + "' in " + where);
  }
}

std::vector<double> per_stage(const json& j, int n, const char* name) {
  if (j.is_number()) return std::vector<double>(static_cast<std::size_t>(n), j.get<double>());
  auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n)
    throw std::invalid_argument(std::string("config: chain.") + name + " must have n entries");
  return v;
}

json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Mat mat_from_json(const json& j, const char* name) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw std::invalid_argument(std::string("config: matrix ") + name + " is empty");
  Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::invalid_argument(std::string("config: ragged matrix ") + name);
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return M;
}

const char* readout_name(Readout r) { return r == Readout::all_states ? "all_states" : "last_state"; }

Readout readout_from(const std::string& s) {
  if (s == "all_states") return Readout::all_states;
  if (s == "last_state") return Readout::last_state;
  throw std::invalid_argument("config: readout must be all_states or last_state");
}

const char* form_name(EstimateForm f) {
  switch (f) {
    case EstimateForm::batch:
      return "batch";
    case EstimateForm::mixed:
      return "mixed";
    case EstimateForm::parallel:
      return "parallel";
  }
  return "batch";
}

json input_to_json(const InputSignal& u) {
  switch (u.kind) {
    case InputSignal::Kind::zero:
      return {{"kind", "zero"}};
    case InputSignal::Kind::constant:
      return {{"kind", "constant"}, {"value", u.value}};
    case InputSignal::Kind::sine:
      return {{"kind", "sine"}, {"amplitude", u.amplitude}, {"frequency", u.frequency}, {"phase", u.phase}};
  }
  return {{"kind", "zero"}};
}

InputSignal input_from_json(const json& j) {
  check_keys(j, "input", {"kind", "value", "amplitude", "frequency", "phase"});
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "zero") return InputSignal::zero();
  if (kind == "constant") return InputSignal::constant(j.at("value").get<double>());
  if (kind == "sine")
    return InputSignal::sine(j.at("amplitude").get<double>(), j.at("frequency").get<double>(),
                             j.value("phase", 0.0));
  throw std::invalid_argument("config: input.kind must be zero, constant or sine");
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  check_keys(j, "config", {"system", "control", "design", "input", "mismatch", "noise", "run",
                           "estimate", "analysis", "paths"});
  PipelineConfig c;
  try {
    const json& sys = j.at("system");
    check_keys(sys, "system", {"chain", "matrices", "readout", "b", "b_u"});
    c.readout = readout_from(sys.value("readout", std::string("all_states")));
    c.b = sys.value("b", 1.0);
    c.b_u = sys.value("b_u", 1.0);
    const json& ctl = j.at("control");
    check_keys(ctl, "control", {"T", "quantizer_bits", "dither"});
    c.T = ctl.at("T").get<double>();
    if (sys.contains("chain")) {
      const json& ch = sys["chain"];
      check_keys(ch, "system.chain", {"n", "beta", "rho", "kappa", "kappa_fb"});
      ChainSpec s;
      s.n = ch.at("n").get<int>();
      if (s.n < 1) throw std::invalid_argument("config: chain.n must be >= 1");
      s.beta = per_stage(ch.at("beta"), s.n, "beta");
      s.rho = ch.contains("rho") ? per_stage(ch["rho"], s.n, "rho") : std::vector<double>(s.n, 0.0);
      s.kappa = per_stage(ch.at("kappa"), s.n, "kappa");
      s.quantizer_bits = ctl.value("quantizer_bits", 1);
      s.dither = ctl.value("dither", 0.0);
      if (ch.contains("kappa_fb")) {
        const json& fb = ch["kappa_fb"];
        if (fb.is_string()) {
          if (fb.get<std::string>() != "dither")
            throw std::invalid_argument("config: chain.kappa_fb must be an array or \"dither\"");
          s = dither_feedback_augment(s);
        } else {
          s.kappa_fb = fb.get<std::vector<double>>();
        }
      }
      c.chain = s;
    }
    if (sys.contains("matrices")) {
      const json& m = sys["matrices"];
      check_keys(m, "system.matrices", {"A", "B", "Gamma", "CT"});
      AnalogSystem a;
      a.A = mat_from_json(m.at("A"), "A");
      a.B = mat_from_json(m.at("B"), "B");
      a.Gamma = mat_from_json(m.at("Gamma"), "Gamma");
      a.CT = mat_from_json(m.at("CT"), "CT");
      a.b = c.b;
      a.b_u = c.b_u;
      c.matrices = a;
    }
    if (j.contains("design")) {
      const json& d = j["design"];
      check_keys(d, "design", {"eta2", "osr"});
      if (d.contains("eta2")) c.eta2 = d["eta2"].get<double>();
      if (d.contains("osr")) c.osr = d["osr"].get<double>();
    }
    if (j.contains("input")) c.input = input_from_json(j["input"]);
    if (j.contains("mismatch")) {
      const json& mm = j["mismatch"];
      check_keys(mm, "mismatch", {"beta_scale", "kappa_scale"});
      Mismatch m;
      m.beta_scale = mm.value("beta_scale", std::vector<double>{});
      m.kappa_scale = mm.value("kappa_scale", std::vector<double>{});
      c.mismatch = m;
    }
    if (j.contains("noise")) {
      for (const json& z : j["noise"]) {
        check_keys(z, "noise entry", {"stage", "sigma2"});
        c.noise.push_back({z.at("stage").get<int>(), z.at("sigma2").get<double>()});
      }
    }
    if (j.contains("run")) {
      const json& r = j["run"];
      check_keys(r, "run", {"periods", "seed", "T_u", "substeps", "allow_unstable", "overflow_factor",
                            "max_snapshots"});
      c.periods = r.value("periods", c.periods);
      c.seed = r.value("seed", c.seed);
      if (r.contains("T_u")) c.T_u = r["T_u"].get<double>();
      c.sim.substeps = r.value("substeps", c.sim.substeps);
      c.sim.allow_unstable = r.value("allow_unstable", c.sim.allow_unstable);
      c.sim.overflow_factor = r.value("overflow_factor", c.sim.overflow_factor);
      c.sim.max_snapshots = r.value("max_snapshots", c.sim.max_snapshots);
    }
    if (j.contains("estimate")) {
      const json& e = j["estimate"];
      check_keys(e, "estimate", {"form", "latency"});
      const auto f = e.value("form", std::string("batch"));
      if (f == "batch")
        c.form = EstimateForm::batch;
      else if (f == "mixed")
        c.form = EstimateForm::mixed;
      else if (f == "parallel")
        c.form = EstimateForm::parallel;
      else
        throw std::invalid_argument("config: estimate.form must be batch, mixed or parallel");
      c.latency = e.value("latency", 0);
    }
    if (j.contains("analysis")) {
      const json& a = j["analysis"];
      check_keys(a, "analysis", {"segment", "overlap", "band_hi"});
      c.welch.segment = a.value("segment", c.welch.segment);
      c.welch.overlap = a.value("overlap", c.welch.overlap);
      if (a.contains("band_hi")) c.band_hi = a["band_hi"].get<double>();
    }
    if (j.contains("paths")) {
      const json& p = j["paths"];
      check_keys(p, "paths", {"trace", "coefficients", "estimates", "psd", "report"});
      c.trace_path = p.value("trace", c.trace_path);
      c.coeffs_path = p.value("coefficients", c.coeffs_path);
      c.estimate_path = p.value("estimates", c.estimate_path);
      c.psd_path = p.value("psd", c.psd_path);
      c.report_path = p.value("report", c.report_path);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_config(const PipelineConfig& c) {
  json j;
  json sys = {{"readout", readout_name(c.readout)}, {"b", c.b}, {"b_u", c.b_u}};
  json ctl = {{"T", c.T}};
  if (c.chain) {
    const ChainSpec& s = *c.chain;
    sys["chain"] = {{"n", s.n}, {"beta", s.beta}, {"rho", s.rho}, {"kappa", s.kappa}};
    if (!s.kappa_fb.empty()) sys["chain"]["kappa_fb"] = s.kappa_fb;
    ctl["quantizer_bits"] = s.quantizer_bits;
    ctl["dither"] = s.dither;
  }
  if (c.matrices) {
    sys["matrices"] = {{"A", mat_to_json(c.matrices->A)},
                       {"B", mat_to_json(c.matrices->B)},
                       {"Gamma", mat_to_json(c.matrices->Gamma)},
                       {"CT", mat_to_json(c.matrices->CT)}};
  }
  j["system"] = sys;
  j["control"] = ctl;
  json d = json::object();
  if (c.eta2) d["eta2"] = *c.eta2;
  if (c.osr) d["osr"] = *c.osr;
  j["design"] = d;
  j["input"] = input_to_json(c.input);
  if (c.mismatch) j["mismatch"] = {{"beta_scale", c.mismatch->beta_scale}, {"kappa_scale", c.mismatch->kappa_scale}};
  if (!c.noise.empty()) {
    json z = json::array();
    for (const auto& n : c.noise) z.push_back({{"stage", n.stage}, {"sigma2", n.sigma2}});
    j["noise"] = z;
  }
  json run = {{"periods", c.periods},
              {"seed", c.seed},
              {"substeps", c.sim.substeps},
              {"allow_unstable", c.sim.allow_unstable},
              {"overflow_factor", c.sim.overflow_factor},
              {"max_snapshots", c.sim.max_snapshots}};
  if (c.T_u) run["T_u"] = *c.T_u;
  j["run"] = run;
  j["estimate"] = {{"form", form_name(c.form)}, {"latency", c.latency}};
  json an = {{"segment", c.welch.segment}, {"overlap", c.welch.overlap}};
  if (c.band_hi) an["band_hi"] = *c.band_hi;
  j["analysis"] = an;
  j["paths"] = {{"trace", c.trace_path},
                {"coefficients", c.coeffs_path},
                {"estimates", c.estimate_path},
                {"psd", c.psd_path},
                {"report", c.report_path}};
  return j.dump(2);
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::string text = json::parse(serialize_config(cfg)).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> preset_names() { return {"fig5", "fig7", "hw-nominal", "limit-cycle", "n2"}; }

PipelineConfig preset(const std::string& name) {
  PipelineConfig c;
  c.chain = uniform_chain(5, 10.0, 1.05);
  c.T = 1.0 / 21.5;
  c.osr = 32.0;
  c.sim.substeps = 1;
  if (name == "fig5") {
    c.input = InputSignal::sine(1.0, 0.1);
    c.periods = 1LL << 20;
  } else if (name == "fig7") {
    c.input = InputSignal::sine(1.0, 0.1);
    c.periods = 1LL << 18;
    c.sim.overflow_factor = 1e6;
    c.b_u = 1.2;
  } else if (name == "limit-cycle") {
    c.input = InputSignal::constant(0.003);
    c.periods = 1LL << 20;
    c.welch.segment = 1LL << 16;
  } else if (name == "hw-nominal") {
    ChainSpec s = uniform_chain(5, 6250.0, 1.25);
    s.kappa_fb.assign(4, 312.5);
    c.chain = s;
    c.T = 54e-6;
    c.input = InputSignal::sine(0.5, 100.0);
    c.periods = 1LL << 20;
  } else if (name == "n2") {
    c.chain = uniform_chain(2, 10.0, 1.05);
    c.readout = Readout::last_state;
    c.osr.reset();
    c.eta2 = 10.21 * 10.21;
    c.input = InputSignal::sine(0.5, 0.1);
    c.periods = 1LL << 16;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

InputSignal parse_input(const std::string& text) {
  if (text == "zero") return InputSignal::zero();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("input must be zero, const:c or sine:A,f[,phase]");
  const std::string kind = text.substr(0, colon);
  std::vector<double> v;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("input: bad number '" + item + "'");
    v.push_back(x);
  }
  if (kind == "const" && v.size() == 1) return InputSignal::constant(v[0]);
  if (kind == "sine" && (v.size() == 2 || v.size() == 3))
    return InputSignal::sine(v[0], v[1], v.size() == 3 ? v[2] : 0.0);
  throw std::invalid_argument("input must be zero, const:c or sine:A,f[,phase]");
}

}  // namespace cbadc
