#include "cbadc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cbadc/errors.hpp"
#include "cbadc/random.hpp"

namespace cbadc {

InputSignal InputSignal::constant(double c) {
  InputSignal s;
  s.kind = Kind::constant;
  s.value = c;
  return s;
}

InputSignal InputSignal::sine(double amplitude, double frequency_hz, double phase) {
  InputSignal s;
  s.kind = Kind::sine;
  s.amplitude = amplitude;
  s.frequency = frequency_hz;
  s.phase = phase;
  return s;
}

double InputSignal::operator()(double t) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::constant:
      return value;
    case Kind::sine:
      return amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
  }
  return 0.0;
}

double InputSignal::peak() const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::constant:
      return std::abs(value);
    case Kind::sine:
      return std::abs(amplitude);
  }
  return 0.0;
}

double ControlTrace::value(long long k, int l) const {
  const auto code = codes[static_cast<std::size_t>(k) * n + l];
  return -1.0 + 2.0 * code / (levels - 1);
}

Mat ControlTrace::to_matrix() const {
  const long long M = length();
  Mat S(n, M);
  const double step = 2.0 / (levels - 1);
  for (long long k = 0; k < M; ++k)
    for (int l = 0; l < n; ++l) S(l, k) = -1.0 + step * codes[static_cast<std::size_t>(k) * n + l];
  return S;
}

Mismatch Mismatch::fixed(int n, double beta_rel, double kappa_rel) {
  Mismatch m;
  m.beta_scale.assign(n, 1.0 + beta_rel);
  m.kappa_scale.assign(n, 1.0 + kappa_rel);
  return m;
}

Mismatch Mismatch::sampled(int n, double beta_percent, double kappa_percent,
                           std::uint64_t seed) {
  Mismatch m;
  for (int l = 0; l < n; ++l) {
    const double ub = unit_interval(hash_key(seed, 0x6d69736d62ULL, l));
    const double uk = unit_interval(hash_key(seed, 0x6d69736d6bULL, l));
    m.beta_scale.push_back(1.0 + beta_percent / 100.0 * (2.0 * ub - 1.0));
    m.kappa_scale.push_back(1.0 + kappa_percent / 100.0 * (2.0 * uk - 1.0));
  }
  return m;
}

ChainSpec Mismatch::apply(const ChainSpec& nominal) const {
  ChainSpec s = nominal;
  const auto un = static_cast<std::size_t>(s.n);
  if ((!beta_scale.empty() && beta_scale.size() != un) ||
      (!kappa_scale.empty() && kappa_scale.size() != un))
    throw std::invalid_argument("Mismatch: scale vectors must have n entries");
  for (std::size_t l = 0; l < beta_scale.size(); ++l) s.beta[l] *= beta_scale[l];
  for (std::size_t l = 0; l < kappa_scale.size(); ++l) s.kappa[l] *= kappa_scale[l];
  return s;
}

int quantize_level(double x, double b, int levels) {
  if (levels == 2) return x >= 0.0 ? 1 : 0;
  const double pos = std::floor((x / b + 1.0) * 0.5 * levels);
  return static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(levels - 1)));
}

double dither_unit(std::uint64_t seed, int stage, long long period) {
  const auto h = hash_key(seed, 0x646974686572ULL + static_cast<std::uint64_t>(stage),
                          static_cast<std::uint64_t>(period));
  return 2.0 * unit_interval(h) - 1.0;
}

ChainSpec dither_feedback_augment(const ChainSpec& spec) {
  spec.validate();
  if (spec.n < 2) throw std::invalid_argument("dither_feedback_augment: needs n >= 2");
  ChainSpec out = spec;
  if (out.kappa_fb.empty())
    out.kappa_fb.assign(spec.n - 1, spec.beta[0] / (spec.n * (spec.n - 1.0)));
  return out;
}

namespace {

struct Propagator {
  int n = 0;
  int d = 0;  // n + input-generator states
  Mat Phi;    // d x d
  Mat Psi;    // d x n
};

Propagator make_propagator(const AnalogSystem& sys, const InputSignal& u, double h) {
  const int n = sys.n();
  const int dw = u.kind == InputSignal::Kind::zero ? 0 : (u.kind == InputSignal::Kind::constant ? 1 : 2);
  Propagator p;
  p.n = n;
  p.d = n + dw;
  Mat M = Mat::Zero(p.d, p.d);
  M.topLeftCorner(n, n) = sys.A;
  if (u.kind == InputSignal::Kind::constant) {
    M.block(0, n, n, 1) = sys.B.col(0);
  } else if (u.kind == InputSignal::Kind::sine) {
    // w = (sin(Wt + phi), cos(Wt + phi)), u = amplitude w_0.
    const double W = 2.0 * std::numbers::pi * u.frequency;
    M.block(0, n, n, 1) = sys.B.col(0) * u.amplitude;
    M(n, n + 1) = W;
    M(n + 1, n) = -W;
  }
  Mat G = Mat::Zero(p.d, n);
  G.topRows(n) = sys.Gamma;
  std::tie(p.Phi, p.Psi) = expm_with_input(M, G, h);
  return p;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  const ChainSpec& spec = cfg.spec;
  spec.validate();
  if (!(cfg.T > 0.0)) throw std::invalid_argument("simulate: T must be > 0");
  if (cfg.periods < 1) throw std::invalid_argument("simulate: periods must be >= 1");
  if (cfg.options.substeps < 1) throw std::invalid_argument("simulate: substeps must be >= 1");
  if (cfg.input.peak() > cfg.b_u * (1.0 + 1e-12))
    throw std::invalid_argument("simulate: input exceeds b_u");
  for (const auto& z : cfg.noise)
    if (z.stage < 1 || z.stage > spec.n || !(z.sigma2 >= 0.0))
      throw std::invalid_argument("simulate: bad noise injection");

  SimResult result;
  SimReport& rep = result.report;
  rep.stability = check_stability(spec, cfg.T, cfg.b);
  if (!rep.stability.guaranteed && !cfg.options.allow_unstable) {
    std::ostringstream os;
    os << "simulate: stability not guaranteed at stage(s)";
    for (int l : rep.stability.failing_stages) os << ' ' << l;
    os << " (set allow_unstable to run anyway)";
    throw std::invalid_argument(os.str());
  }

  const ChainSpec actual = cfg.mismatch ? cfg.mismatch->apply(spec) : spec;
  const AnalogSystem sys = build_chain(actual, Readout::all_states, cfg.b, cfg.b_u);
  const int n = spec.n;
  const int levels = 1 << spec.quantizer_bits;
  const int S = cfg.options.substeps;
  const double h = cfg.T / S;
  const Propagator prop = make_propagator(sys, cfg.input, h);
  const int d = prop.d;

  // Control contributions Psi s, tabulated when the level set is small.
  const double level_step = 2.0 / (levels - 1);
  std::vector<Vec> table;
  long long patterns = 1;
  for (int l = 0; l < n && patterns <= 4096; ++l) patterns *= levels;
  const bool use_table = patterns <= 4096;
  if (use_table) {
    table.resize(static_cast<std::size_t>(patterns));
    Vec s(n);
    for (long long p = 0; p < patterns; ++p) {
      long long r = p;
      for (int l = 0; l < n; ++l) {
        s(l) = -1.0 + level_step * static_cast<double>(r % levels);
        r /= levels;
      }
      table[static_cast<std::size_t>(p)] = prop.Psi * s;
    }
  }

  ControlTrace& trace = result.trace;
  trace.T = cfg.T;
  trace.n = n;
  trace.levels = levels;
  trace.seed = cfg.seed;
  trace.config_hash = cfg.config_hash;
  trace.codes.resize(static_cast<std::size_t>(cfg.periods) * n);

  rep.max_abs_state.assign(n, 0.0);
  const double bound = cfg.b * (1.0 + 1e-9);
  const double overflow = cfg.options.overflow_factor * cfg.b;
  long long decim = 0;
  const auto max_snapshots =
      static_cast<long long>(std::min<std::size_t>(cfg.options.max_snapshots, kMaxSnapshots));
  if (max_snapshots > 0) {
    decim = std::max<long long>(1, (cfg.periods + max_snapshots - 1) / max_snapshots);
    rep.snapshots.resize(n, (cfg.periods + decim - 1) / decim);
  }

  std::mt19937_64 rng(mix64(cfg.seed ^ 0x7468726d6c6e6f69ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise_gain;
  for (const auto& z : cfg.noise)
    noise_gain.push_back(actual.beta[z.stage - 1] * std::sqrt(z.sigma2 * h));

  Vec z = Vec::Zero(d);
  Vec zn(d);
  Vec s(n);
  Vec scratch(d);
  const double W = 2.0 * std::numbers::pi * cfg.input.frequency;
  const double dither_scale = spec.dither * cfg.b;

  for (long long k = 0; k < cfg.periods; ++k) {
    if (cfg.input.kind == InputSignal::Kind::constant) {
      z(n) = cfg.input.value;
    } else if (cfg.input.kind == InputSignal::Kind::sine) {
      const double arg = W * (static_cast<double>(k) * cfg.T) + cfg.input.phase;
      z(n) = std::sin(arg);
      z(n + 1) = std::cos(arg);
    }
    if (decim > 0 && k % decim == 0) {
      rep.snapshots.col(k / decim) = z.head(n);
      rep.snapshot_periods.push_back(k);
    }

    long long pattern = 0;
    long long radix = 1;
    std::uint16_t* codes = trace.codes.data() + static_cast<std::size_t>(k) * n;
    for (int l = 0; l < n; ++l) {
      double x = z(l);
      if (dither_scale > 0.0) x += dither_scale * dither_unit(cfg.seed, l, k);
      const int code = quantize_level(x, cfg.b, levels);
      codes[l] = static_cast<std::uint16_t>(code);
      s(l) = -1.0 + level_step * code;
      pattern += radix * code;
      radix *= levels;
    }
    const Vec* drive = &scratch;
    if (use_table)
      drive = &table[static_cast<std::size_t>(pattern)];
    else
      scratch.noalias() = prop.Psi * s;

    for (int j = 0; j < S; ++j) {
      zn.noalias() = prop.Phi * z;
      zn += *drive;
      z.swap(zn);
      for (std::size_t q = 0; q < cfg.noise.size(); ++q)
        z(cfg.noise[q].stage - 1) += noise_gain[q] * normal(rng);
      for (int l = 0; l < n; ++l) {
        const double a = std::abs(z(l));
        if (a > rep.max_abs_state[l]) rep.max_abs_state[l] = a;
        if (a > bound) {
          ++rep.bound_violations;
          if (!(a <= overflow)) {
            std::ostringstream os;
            os << "simulate: state " << l + 1 << " reached " << z(l) << " in period " << k;
            throw SimulationDiverged(os.str(), k, l + 1);
          }
        }
      }
    }
  }
  return result;
}

}  // namespace cbadc
