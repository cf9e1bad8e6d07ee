#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbadc/analyze.hpp"
#include "cbadc/config.hpp"
#include "cbadc/design.hpp"
#include "cbadc/errors.hpp"
#include "cbadc/estimate.hpp"
#include "cbadc/io.hpp"
#include "cbadc/sim.hpp"
#include "cbadc/xfer.hpp"

namespace fs = std::filesystem;
using namespace cbadc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGate = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string preset;
  std::string out_dir;
  std::optional<double> eta2;
  std::optional<double> osr;
  std::optional<std::uint64_t> seed;
  std::optional<long long> periods;
  std::optional<int> latency;
  std::string form;
  std::string input;
  bool binary = false;
};

std::string default_out_dir() {
  const char* env = std::getenv("CBADC_OUTPUT_DIR");
  return env && *env ? env : ".";
}

void add_source_options(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Pipeline config JSON");
  app->add_option("--preset", c.preset, "Built-in preset")->check(CLI::IsMember(preset_names()));
}

void add_design_options(CLI::App* app, Common& c) {
  app->add_option("--eta2", c.eta2, "Design parameter eta^2 (overrides the config)");
  app->add_option("--osr", c.osr, "Derive eta^2 from this oversampling ratio");
}

void add_run_options(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--periods", c.periods, "Number of control periods")->check(CLI::PositiveNumber);
  app->add_option("--input", c.input, "zero | const:c | sine:A,f[,phase]");
}

void add_estimate_options(CLI::App* app, Common& c) {
  app->add_option("--form", c.form, "Estimator form")->check(CLI::IsMember({"batch", "mixed", "parallel"}));
  app->add_option("--latency", c.latency, "Mixed-form lookahead L (0 = settle length)")
      ->check(CLI::NonNegativeNumber);
}

EstimateForm form_from(const std::string& s) {
  if (s == "mixed") return EstimateForm::mixed;
  if (s == "parallel") return EstimateForm::parallel;
  return EstimateForm::batch;
}

PipelineConfig resolve_config(const Common& c) {
  if (!c.preset.empty() && !c.config.empty()) throw UsageError("give --config or --preset, not both");
  if (c.preset.empty() && c.config.empty()) throw UsageError("a --config or --preset is required");
  PipelineConfig cfg = c.preset.empty() ? load_config(c.config) : preset(c.preset);
  if (c.eta2 && c.osr) throw UsageError("give --eta2 or --osr, not both");
  if (c.eta2) {
    cfg.eta2 = c.eta2;
    cfg.osr.reset();
  }
  if (c.osr) {
    cfg.osr = c.osr;
    cfg.eta2.reset();
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.periods) cfg.periods = *c.periods;
  if (c.latency) cfg.latency = *c.latency;
  if (!c.form.empty()) cfg.form = form_from(c.form);
  if (!c.input.empty()) cfg.input = parse_input(c.input);
  cfg.validate();
  return cfg;
}

double resolved_eta2_or_usage(const PipelineConfig& cfg) {
  try {
    return cfg.resolved_eta2();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::string out_path(const std::string& dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return path;
  fs::create_directories(dir);
  return (fs::path(dir) / p).string();
}

Provenance provenance(const PipelineConfig& cfg) { return {config_hash(cfg), cfg.seed}; }

std::string fmt(double x) { return format_double(x); }

void print_matrix(const char* name, const Mat& M) {
  std::cout << name << " =\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::cout << "  [";
    for (Eigen::Index j = 0; j < M.cols(); ++j) std::cout << (j ? ", " : "") << fmt(M(i, j));
    std::cout << "]\n";
  }
}

void echo_derived(const PipelineConfig& cfg, const AnalogSystem& sys, double eta2) {
  std::cout << "eta2 = " << fmt(eta2) << "\neta = " << fmt(std::sqrt(eta2)) << '\n';
  if (cfg.osr) std::cout << "eta derived from osr = " << fmt(*cfg.osr) << '\n';
  if (cfg.chain) std::cout << "gamma = T |beta_1| = " << fmt(cfg.T * std::abs(cfg.chain->beta[0])) << '\n';
  try {
    const double wc = bandwidth(sys, eta2);
    std::cout << "omega_crit = " << fmt(wc) << " rad/s\nf_crit = " << fmt(wc / (2.0 * M_PI))
              << " Hz\nOSR = " << fmt(osr_from_bandwidth(wc, cfg.T)) << '\n';
  } catch (const std::exception& e) {
    std::cout << "omega_crit unavailable: " << e.what() << '\n';
  }
}

FilterCoefficients run_design(const PipelineConfig& cfg, bool verbose) {
  const AnalogSystem sys = cfg.system();
  const double eta2 = resolved_eta2_or_usage(cfg);
  echo_derived(cfg, sys, eta2);
  DesignReport rep;
  const auto print_report = [&] {
    std::cout << "CARE forward: relative residual " << fmt(rep.forward.relative_residual) << ", "
              << rep.forward.iterations << " iterations\n"
              << "CARE backward: relative residual " << fmt(rep.backward.relative_residual) << ", "
              << rep.backward.iterations << " iterations\n"
              << "spectral radius Af = " << fmt(rep.rho_f) << ", Ab = " << fmt(rep.rho_b) << '\n'
              << "W residual = " << fmt(rep.w_residual) << ", backward error = " << fmt(rep.w_backward_error)
              << '\n';
  };
  try {
    FilterCoefficients coeffs = design_filter(sys, eta2, cfg.estimate_period(), &rep);
    print_report();
    if (verbose) print_matrix("W", coeffs.W);
    return coeffs;
  } catch (const ConvergenceError& e) {
    print_report();
    for (const auto& f : rep.failures) std::cerr << "gate failed: " << f << '\n';
    throw GateFailure(e.what());
  }
}

ControlTrace run_simulate(const PipelineConfig& cfg) {
  if (!cfg.chain) throw UsageError("simulate needs a chain system");
  SimConfig sc;
  sc.spec = *cfg.chain;
  sc.T = cfg.T;
  sc.b = cfg.b;
  sc.b_u = cfg.b_u;
  sc.input = cfg.input;
  sc.periods = cfg.periods;
  sc.seed = cfg.seed;
  sc.noise = cfg.noise;
  sc.mismatch = cfg.mismatch;
  sc.options = cfg.sim;
  sc.config_hash = config_hash(cfg);
  SimResult res = simulate(sc);
  std::cout << "simulated " << res.trace.length() << " periods, bound violations "
            << res.report.bound_violations << ", max |x| per stage:";
  for (double x : res.report.max_abs_state) std::cout << ' ' << fmt(x);
  std::cout << '\n';
  return std::move(res.trace);
}

EstimateTrace run_estimate_form(const FilterCoefficients& coeffs, const ControlTrace& trace,
                                EstimateForm form, int latency) {
  switch (form) {
    case EstimateForm::batch:
      return estimate_batch(coeffs, trace);
    case EstimateForm::mixed: {
      if (substeps_per_period(trace.T, coeffs.T_u) != 1)
        throw UsageError("the mixed form needs T_u = T");
      const int L = latency > 0 ? latency : settle_length(coeffs);
      std::cout << "latency L = " << L << ", truncation bound " << fmt(mixed_truncation_bound(coeffs, L))
                << '\n';
      return estimate_mixed(coeffs, trace.to_matrix(), L);
    }
    case EstimateForm::parallel: {
      const ParallelForm pf = parallelize(coeffs);
      std::cout << "eigenvector condition numbers: forward " << fmt(pf.cond_f) << ", backward "
                << fmt(pf.cond_b) << '\n';
      return estimate_parallel(pf, trace.to_matrix(), trace.T, coeffs.T_u, trace.levels == 2 && pf.has_lut());
    }
  }
  throw std::logic_error("unknown form");
}

SpectrumReport run_analyze(const EstimateTrace& est, double band_hi, const WelchOptions& welch,
                           Spectrum* spec_out) {
  const Vec u = est.valid(0);
  if (u.size() == 0) throw std::runtime_error("analyze: no valid estimate samples");
  WelchOptions w = welch;
  while (w.segment > u.size() && w.segment > 16) w.segment /= 2;
  Spectrum spec = psd(u, 1.0 / est.T_u, w);
  ToneOptions topts;
  topts.require_tone = false;
  const SpectrumReport rep = snr_in_band(spec, 0.0, band_hi, topts);
  std::cout << "band [0, " << fmt(band_hi) << "] Hz, segment " << spec.segment << '\n';
  if (rep.tone_found)
    std::cout << "tone " << fmt(rep.tone_hz) << " Hz, amplitude " << fmt(rep.tone_amp) << "\nSNR "
              << fmt(rep.snr_db) << " dB, SNDR " << fmt(rep.sndr_db) << " dB, SFDR " << fmt(rep.sfdr_db)
              << " dB\n";
  else
    std::cout << "no tone detected; in-band noise power " << fmt(rep.noise_power) << '\n';
  if (spec_out) *spec_out = std::move(spec);
  return rep;
}

int cmd_design(const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const FilterCoefficients coeffs = run_design(cfg, true);
  const std::string path = out_path(c.out_dir, cfg.coeffs_path);
  write_coefficients(path, coeffs, provenance(cfg));
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_simulate(const Common& c, const std::string& out) {
  const PipelineConfig cfg = resolve_config(c);
  const ControlTrace trace = run_simulate(cfg);
  const std::string path = out_path(c.out_dir, out.empty() ? cfg.trace_path : out);
  write_trace(path, trace, c.binary ? TraceEncoding::binary : TraceEncoding::text);
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_estimate(const Common& c, const std::string& coeffs_path, const std::string& trace_path,
                 const std::string& out) {
  const FilterCoefficients coeffs = read_coefficients(coeffs_path);
  const ControlTrace trace = read_trace(trace_path);
  const EstimateTrace est =
      run_estimate_form(coeffs, trace, form_from(c.form), c.latency ? *c.latency : 0);
  const std::string path = out_path(c.out_dir, out.empty() ? "estimates.csv" : out);
  write_estimates(path, est, {trace.config_hash, trace.seed},
                  c.binary ? EstimateEncoding::binary : EstimateEncoding::csv);
  std::cout << "wrote " << est.valid_end - est.valid_begin << " samples to " << path << '\n';
  return 0;
}

int cmd_analyze(const Common& c, const std::string& est_path, std::optional<double> band_hi,
                double osr, long long segment, const std::string& psd_out, const std::string& report_out) {
  Provenance prov;
  const EstimateTrace est = read_estimates(est_path, &prov);
  const double hi = band_hi ? *band_hi : 1.0 / (2.0 * est.T_u * osr);
  WelchOptions w;
  w.segment = segment;
  Spectrum spec;
  const SpectrumReport rep = run_analyze(est, hi, w, &spec);
  const std::string p1 = out_path(c.out_dir, psd_out);
  const std::string p2 = out_path(c.out_dir, report_out);
  write_psd_csv(p1, spec, prov);
  write_report_json(p2, rep, prov);
  std::cout << "wrote " << p1 << " and " << p2 << '\n';
  return 0;
}

int cmd_predict(const Common& c, int points, double lo, double hi, const std::string& out) {
  const PipelineConfig cfg = resolve_config(c);
  const AnalogSystem sys = cfg.system();
  const double eta2 = resolved_eta2_or_usage(cfg);
  echo_derived(cfg, sys, eta2);
  const double wc = bandwidth(sys, eta2);
  std::cout << "|stf(omega_crit)| = " << fmt(stf_scalar(sys, eta2, wc)) << '\n';
  if (cfg.chain) {
    const double gamma = cfg.T * std::abs(cfg.chain->beta[0]);
    const double osr = osr_from_bandwidth(wc, cfg.T);
    std::cout << "predicted full-scale SNR (alpha = 1) = "
              << fmt(predict_snr(cfg.b, cfg.b, cfg.chain->n, gamma, osr)) << " dB\n";
    const NoisePrediction np = predict_conversion_noise(sys, eta2, wc, sigma2_y_band(1.0, cfg.T, cfg.b),
                                                        cfg.chain.operator->());
    std::cout << "conversion noise S_N = " << fmt(np.S_N);
    if (np.S_N_closed >= 0.0) std::cout << " (closed form " << fmt(np.S_N_closed) << ")";
    std::cout << '\n';
  }
  std::vector<double> omegas(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    omegas[i] = wc * std::pow(10.0, lo + (hi - lo) * i / std::max(1, points - 1));
  const std::string path = out_path(c.out_dir, out);
  write_predict_csv(path, sys, eta2, omegas, provenance(cfg));
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_pipeline(const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const Provenance prov = provenance(cfg);
  std::cout << "config_hash " << prov.config_hash << ", seed " << prov.seed << '\n';
  const FilterCoefficients coeffs = run_design(cfg, false);
  write_coefficients(out_path(c.out_dir, cfg.coeffs_path), coeffs, prov);
  const ControlTrace trace = run_simulate(cfg);
  write_trace(out_path(c.out_dir, cfg.trace_path), trace, c.binary ? TraceEncoding::binary : TraceEncoding::text);
  const EstimateTrace est = run_estimate_form(coeffs, trace, cfg.form, cfg.latency);
  write_estimates(out_path(c.out_dir, cfg.estimate_path), est, prov,
                  c.binary ? EstimateEncoding::binary : EstimateEncoding::csv);
  Spectrum spec;
  const SpectrumReport rep = run_analyze(est, cfg.resolved_band_hi(), cfg.welch, &spec);
  write_psd_csv(out_path(c.out_dir, cfg.psd_path), spec, prov);
  write_report_json(out_path(c.out_dir, cfg.report_path), rep, prov);
  std::cout << "outputs in " << fs::absolute(c.out_dir).string() << '\n';
  return 0;
}

struct SweepTask {
  int n = 0;
  std::size_t index = 0;  ///< position in the amplitude list
};

ExperimentConfig experiment_for(const PipelineConfig& cfg, int n) {
  ExperimentConfig e;
  ChainSpec s = *cfg.chain;
  if (n != s.n) {
    ChainSpec u = uniform_chain(n, s.beta[0], s.kappa[0], s.rho[0]);
    u.quantizer_bits = s.quantizer_bits;
    u.dither = s.dither;
    s = s.has_feedback() && n > 1 ? dither_feedback_augment(u) : u;
  }
  e.spec = s;
  e.T = cfg.T;
  e.b = cfg.b;
  e.b_u = cfg.b_u;
  e.osr = cfg.resolved_osr();
  e.readout = cfg.readout;
  e.periods = cfg.periods;
  e.seed = cfg.seed;
  e.sim = cfg.sim;
  e.welch = cfg.welch;
  return e;
}

SweepPoint sweep_point(const PipelineConfig& cfg, const SweepTask& t, double amplitude, double f0) {
  ExperimentConfig e = experiment_for(cfg, t.n);
  e.seed = cfg.seed + t.index;
  return snr_sweep(e, {amplitude}, f0).front();
}

/// Splits the tasks over `jobs` forked workers that report back through pipes.
std::vector<SweepPoint> run_sweep_workers(const PipelineConfig& cfg, const std::vector<SweepTask>& tasks,
                                          const std::vector<double>& amps, double f0, int jobs) {
  std::vector<SweepPoint> out(tasks.size());
  struct Worker {
    pid_t pid;
    int fd;
  };
  std::vector<Worker> workers;
  std::cout.flush();
  for (int w = 0; w < jobs; ++w) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("sweep: pipe failed");
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("sweep: fork failed");
    if (pid == 0) {
      close(fds[0]);
      int status = 0;
      for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size(); i += static_cast<std::size_t>(jobs)) {
        double rec[4] = {static_cast<double>(i), NAN, NAN, NAN};
        try {
          const SweepPoint p = sweep_point(cfg, tasks[i], amps[tasks[i].index], f0);
          rec[1] = p.snr_db;
          rec[2] = p.predicted_db;
          rec[3] = p.noise_power;
        } catch (const std::exception& e) {
          std::cerr << "sweep point n=" << tasks[i].n << " A=" << amps[tasks[i].index] << ": " << e.what() << '\n';
          status = kExitRuntime;
        }
        if (write(fds[1], rec, sizeof rec) != static_cast<ssize_t>(sizeof rec)) status = kExitRuntime;
      }
      close(fds[1]);
      _exit(status);
    }
    close(fds[1]);
    workers.push_back({pid, fds[0]});
  }
  bool failed = false;
  for (const Worker& w : workers) {
    double rec[4];
    while (read(w.fd, rec, sizeof rec) == static_cast<ssize_t>(sizeof rec)) {
      const auto i = static_cast<std::size_t>(rec[0]);
      out[i].amplitude = amps[tasks[i].index];
      out[i].snr_db = rec[1];
      out[i].predicted_db = rec[2];
      out[i].noise_power = rec[3];
    }
    close(w.fd);
    int status = 0;
    waitpid(w.pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = true;
  }
  if (failed) throw std::runtime_error("sweep: a worker failed");
  return out;
}

int cmd_sweep(const Common& c, std::vector<double> amps, std::vector<int> orders, std::optional<double> f0_opt,
              int jobs, const std::string& out) {
  const PipelineConfig cfg = resolve_config(c);
  if (!cfg.chain) throw UsageError("sweep needs a chain system");
  if (amps.empty()) throw UsageError("sweep needs at least one amplitude");
  std::sort(amps.begin(), amps.end());
  if (orders.empty()) orders.push_back(cfg.chain->n);
  double f0 = 0.0;
  if (f0_opt)
    f0 = *f0_opt;
  else if (cfg.input.kind == InputSignal::Kind::sine)
    f0 = cfg.input.frequency;
  else
    f0 = 0.1 * cfg.resolved_band_hi();

  std::vector<SweepTask> tasks;
  for (int n : orders)
    for (std::size_t i = 0; i < amps.size(); ++i) tasks.push_back({n, i});
  std::vector<SweepPoint> points;
  if (jobs <= 1) {
    for (int n : orders) {
      const auto curve = snr_sweep(experiment_for(cfg, n), amps, f0);
      points.insert(points.end(), curve.begin(), curve.end());
    }
  } else {
    points = run_sweep_workers(cfg, tasks, amps, f0, jobs);
  }

  const std::string path = out_path(c.out_dir, out);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# {\"format\":\"cbadc-sweep\",\"version\":\"" << tool_version() << "\",\"config_hash\":\""
     << config_hash(cfg) << "\",\"seed\":" << cfg.seed << "}\n";
  os << "n,amplitude,snr_db,predicted_db,noise_power\n";
  std::printf("%3s %10s %12s %14s\n", "n", "amplitude", "snr_db", "predicted_db");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const SweepPoint& p = points[i];
    os << tasks[i].n << ',' << fmt(p.amplitude) << ',' << fmt(p.snr_db) << ',' << fmt(p.predicted_db) << ','
       << fmt(p.noise_power) << '\n';
    std::printf("%3d %10.4g %12.3f %14.3f\n", tasks[i].n, p.amplitude, p.snr_db, p.predicted_db);
  }
  std::cout << "wrote " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-bounded A/D conversion: design, simulate, estimate and analyze"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  Common c;
  c.out_dir = default_out_dir();
  app.add_option("--out-dir", c.out_dir, "Output directory (default $CBADC_OUTPUT_DIR or .)");

  auto* design = app.add_subcommand("design", "Solve the Riccati equations and write filter coefficients");
  add_source_options(design, c);
  add_design_options(design, c);

  std::string sim_out;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate the controlled system and write a .cbt trace");
  add_source_options(simulate_cmd, c);
  add_run_options(simulate_cmd, c);
  simulate_cmd->add_option("--out", sim_out, "Trace path");
  simulate_cmd->add_flag("--binary", c.binary, "Packed single-bit body");

  std::string coeffs_in, trace_in, est_out;
  auto* estimate_cmd = app.add_subcommand("estimate", "Run the estimation filter over a trace");
  estimate_cmd->add_option("--coefficients", coeffs_in, "Coefficients JSON")->required()->check(CLI::ExistingFile);
  estimate_cmd->add_option("--trace", trace_in, "Control trace")->required()->check(CLI::ExistingFile);
  estimate_cmd->add_option("--out", est_out, "Estimate path");
  estimate_cmd->add_flag("--binary", c.binary, "Raw binary64 output");
  add_estimate_options(estimate_cmd, c);

  std::string est_in, psd_out = "psd.csv", report_out = "report.json";
  std::optional<double> band_hi;
  double an_osr = 32.0;
  long long segment = 1LL << 14;
  auto* analyze_cmd = app.add_subcommand("analyze", "PSD and SNR / SNDR / SFDR of an estimate file");
  analyze_cmd->add_option("--estimates", est_in, "Estimate CSV or binary")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--band-hi", band_hi, "Upper band edge [Hz]");
  analyze_cmd->add_option("--osr", an_osr, "Band = 1 / (2 T_u OSR) when --band-hi is absent")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--segment", segment, "Welch segment length (power of two)");
  analyze_cmd->add_option("--psd-out", psd_out, "PSD CSV path");
  analyze_cmd->add_option("--report-out", report_out, "Report JSON path");

  int points = 200;
  double lo = -3.0, hi = 2.0;
  std::string predict_out = "predict.csv";
  auto* predict_cmd = app.add_subcommand("predict", "Transfer functions and noise predictions");
  add_source_options(predict_cmd, c);
  add_design_options(predict_cmd, c);
  predict_cmd->add_option("--points", points, "Frequency points")->check(CLI::Range(2, 1000000));
  predict_cmd->add_option("--decades-below", lo, "Grid start, log10(omega / omega_crit)");
  predict_cmd->add_option("--decades-above", hi, "Grid end, log10(omega / omega_crit)");
  predict_cmd->add_option("--out", predict_out, "CSV path");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "design, simulate, estimate and analyze in one run");
  add_source_options(pipeline_cmd, c);
  add_design_options(pipeline_cmd, c);
  add_run_options(pipeline_cmd, c);
  add_estimate_options(pipeline_cmd, c);
  pipeline_cmd->add_flag("--binary", c.binary, "Binary trace and estimate bodies");

  std::vector<double> amps = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
  std::vector<int> orders;
  std::optional<double> f0;
  int jobs = 1;
  std::string sweep_out = "sweep.csv";
  auto* sweep_cmd = app.add_subcommand("sweep", "SNR against sine amplitude");
  add_source_options(sweep_cmd, c);
  add_design_options(sweep_cmd, c);
  add_run_options(sweep_cmd, c);
  sweep_cmd->add_option("--amplitudes", amps, "Sine amplitudes")->delimiter(',');
  sweep_cmd->add_option("--orders", orders, "Chain orders (default: the config's)")->delimiter(',');
  sweep_cmd->add_option("--f0", f0, "Tone frequency [Hz]");
  sweep_cmd->add_option("--jobs", jobs, "Worker processes")->check(CLI::Range(1, 256));
  sweep_cmd->add_option("--out", sweep_out, "CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*design) return cmd_design(c);
    if (*simulate_cmd) return cmd_simulate(c, sim_out);
    if (*estimate_cmd) return cmd_estimate(c, coeffs_in, trace_in, est_out);
    if (*analyze_cmd) return cmd_analyze(c, est_in, band_hi, an_osr, segment, psd_out, report_out);
    if (*predict_cmd) return cmd_predict(c, points, lo, hi, predict_out);
    if (*pipeline_cmd) return cmd_pipeline(c);
    if (*sweep_cmd) return cmd_sweep(c, amps, orders, f0, jobs, sweep_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const GateFailure& e) {
    std::cerr << "design gate failed: " << e.what() << '\n';
    return kExitGate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
