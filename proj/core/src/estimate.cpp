#include "cbadc/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cbadc/errors.hpp"

namespace cbadc {

Vec EstimateTrace::valid(int channel) const {
  if (valid_end <= valid_begin) return Vec();
  return samples.row(channel).segment(valid_begin, valid_end - valid_begin).transpose();
}

int settle_length(const FilterCoefficients& coeffs, double tol) {
  return std::max(decay_length(coeffs.Af, tol), decay_length(coeffs.Ab, tol));
}

int substeps_per_period(double T, double T_u) {
  if (!(T > 0.0) || !(T_u > 0.0)) throw std::invalid_argument("periods must be > 0");
  const double ratio = T / T_u;
  const double c = std::round(ratio);
  if (c < 1.0 || std::abs(ratio - c) > 1e-9 * c)
    throw std::invalid_argument("clock period T must be an integer multiple of T_u");
  return static_cast<int>(c);
}

namespace {

void check_controls(const FilterCoefficients& coeffs, const Mat& controls) {
  if (controls.rows() != coeffs.Bf.cols())
    throw std::invalid_argument("control dimension does not match the filter coefficients");
  if (controls.cols() == 0) throw std::invalid_argument("empty control trace");
}

void set_valid(EstimateTrace& out, long long settle, long long tail) {
  const long long N = out.size();
  out.valid_begin = std::min(settle, N);
  out.valid_end = std::max(out.valid_begin, N - tail);
}

}  // namespace

EstimateTrace estimate_batch(const FilterCoefficients& coeffs, const Mat& controls, double T,
                             const BatchOptions& opts) {
  check_controls(coeffs, controls);
  if (opts.block < 1) throw std::invalid_argument("estimate_batch: block must be >= 1");
  const int c = substeps_per_period(T, coeffs.T_u);
  const long long M = controls.cols();
  const long long N = M * c;
  const int n = coeffs.n();
  const int settle = settle_length(coeffs, opts.settle_tol);

  const Mat drive_f = coeffs.Bf * controls;
  const Mat drive_b = coeffs.Bb * controls;
  const Mat Wt = coeffs.W.transpose();

  EstimateTrace out;
  out.T_u = coeffs.T_u;
  out.samples.resize(coeffs.k(), N);

  Vec mf = Vec::Zero(n);
  Vec mb(n), tmp(n);
  Mat fwd(n, std::min(opts.block, N));
  const long long lookahead = 2LL * settle;
  for (long long a = 0; a < N; a += opts.block) {
    const long long b = std::min(a + opts.block, N);
    for (long long j = a; j < b; ++j) {
      fwd.col(j - a) = mf;
      tmp.noalias() = coeffs.Af * mf;
      mf = tmp + drive_f.col(j / c);
    }
    const long long e = std::min(b + lookahead, N);
    mb.setZero();
    for (long long j = e - 1; j >= a; --j) {
      tmp.noalias() = coeffs.Ab * mb;
      mb = tmp + drive_b.col(j / c);
      if (j < b) out.samples.col(j).noalias() = Wt * (mb - fwd.col(j - a));
    }
  }
  set_valid(out, settle, settle);
  return out;
}

EstimateTrace estimate_batch(const FilterCoefficients& coeffs, const ControlTrace& trace,
                             const BatchOptions& opts) {
  if (trace.length() == 0) throw std::invalid_argument("estimate_batch: empty control trace");
  return estimate_batch(coeffs, trace.to_matrix(), trace.T, opts);
}

std::vector<Mat> mixed_taps(const FilterCoefficients& coeffs, int L) {
  if (L < 0) throw std::invalid_argument("mixed_taps: L must be >= 0");
  std::vector<Mat> taps;
  taps.reserve(static_cast<std::size_t>(L) + 1);
  Mat WtAb = coeffs.W.transpose();
  for (int l = 0; l <= L; ++l) {
    taps.push_back(WtAb * coeffs.Bb);
    WtAb = WtAb * coeffs.Ab;
  }
  return taps;
}

MixedEstimator::MixedEstimator(const FilterCoefficients& coeffs, int latency)
    : Af_(coeffs.Af), Bf_(coeffs.Bf), Wt_(coeffs.W.transpose()), L_(latency) {
  if (latency < 1) throw std::invalid_argument("MixedEstimator: latency must be >= 1");
  taps_ = mixed_taps(coeffs, latency);
  mf_ = Vec::Zero(coeffs.n());
}

bool MixedEstimator::push(const Vec& s, Vec& out) {
  if (s.size() != Bf_.cols()) throw std::invalid_argument("MixedEstimator: control dimension");
  window_.push_back(s);
  if (static_cast<int>(window_.size()) < L_ + 1) return false;
  out = -Wt_ * mf_;
  for (int l = 0; l <= L_; ++l) out.noalias() += taps_[l] * window_[l];
  Vec next = Af_ * mf_ + Bf_ * window_.front();
  mf_ = std::move(next);
  window_.pop_front();
  return true;
}

EstimateTrace estimate_mixed(const FilterCoefficients& coeffs, const Mat& controls, int latency) {
  check_controls(coeffs, controls);
  MixedEstimator est(coeffs, latency);
  const long long M = controls.cols();
  EstimateTrace out;
  out.T_u = coeffs.T_u;
  out.samples.resize(coeffs.k(), std::max<long long>(0, M - latency));
  Vec u;
  long long k = 0;
  for (long long j = 0; j < M; ++j)
    if (est.push(controls.col(j), u)) out.samples.col(k++) = u;
  set_valid(out, settle_length(coeffs), 0);
  return out;
}

EstimateTrace estimate_fir(const FilterCoefficients& coeffs, const Mat& controls, int latency,
                           int forward_taps) {
  check_controls(coeffs, controls);
  if (latency < 1 || forward_taps < 1)
    throw std::invalid_argument("estimate_fir: latency and forward_taps must be >= 1");
  const std::vector<Mat> back = mixed_taps(coeffs, latency);
  std::vector<Mat> fwd;
  Mat WtAf = coeffs.W.transpose();
  for (int j = 1; j <= forward_taps; ++j) {
    fwd.push_back(-WtAf * coeffs.Bf);  // tap for s_{k-j}
    WtAf = WtAf * coeffs.Af;
  }
  const long long M = controls.cols();
  EstimateTrace out;
  out.T_u = coeffs.T_u;
  out.samples.setZero(coeffs.k(), std::max<long long>(0, M - latency));
  for (long long k = 0; k < out.size(); ++k) {
    auto col = out.samples.col(k);
    for (int l = 0; l <= latency; ++l) col.noalias() += back[l] * controls.col(k + l);
    for (int j = 1; j <= forward_taps && j <= k; ++j)
      col.noalias() += fwd[j - 1] * controls.col(k - j);
  }
  set_valid(out, settle_length(coeffs), 0);
  return out;
}

namespace {

// ||G M^{L+1}||_2 sqrt(n) sum_j ||M^j D||_2
double truncation_bound(const Mat& G, const Mat& M, const Mat& D, int L) {
  Mat P = M;
  for (int i = 0; i < L; ++i) P = P * M;
  const double head = spectral_norm(G * P);
  double sum = 0.0;
  Mat Q = Mat::Identity(M.rows(), M.cols());
  for (int j = 0; j < (1 << 24); ++j) {
    sum += spectral_norm(Q * D);
    Q = Q * M;
    if (spectral_norm(Q) < 1e-18) break;
  }
  return head * std::sqrt(static_cast<double>(D.cols())) * sum;
}

}  // namespace

double mixed_truncation_bound(const FilterCoefficients& coeffs, int latency) {
  return truncation_bound(coeffs.W.transpose(), coeffs.Ab, coeffs.Bb, latency);
}

double fir_truncation_bound(const FilterCoefficients& coeffs, int forward_taps) {
  return truncation_bound(coeffs.W.transpose(), coeffs.Af, coeffs.Bf, forward_taps - 1);
}

EstimateTrace estimate_parallel(const ParallelForm& pform, const Mat& controls, double T,
                                double T_u, bool use_lut, int settle) {
  const int n = pform.n();
  if (controls.rows() != pform.Qf_inv_Bf.cols())
    throw std::invalid_argument("estimate_parallel: control dimension mismatch");
  if (controls.cols() == 0) throw std::invalid_argument("estimate_parallel: empty control trace");
  if (use_lut && !pform.has_lut())
    throw std::invalid_argument("estimate_parallel: no lookup tables in this parallel form");
  const int c = substeps_per_period(T, T_u);
  const long long M = controls.cols();
  const long long N = M * c;
  const int k = static_cast<int>(pform.Wf.cols());

  // Per-period control contributions f(s) in both directions.
  CMat ff, fb;
  std::vector<std::uint32_t> pattern;
  if (use_lut) {
    pattern.resize(static_cast<std::size_t>(M));
    for (long long j = 0; j < M; ++j) {
      std::uint32_t p = 0;
      for (Eigen::Index l = 0; l < controls.rows(); ++l) {
        const double v = controls(l, j);
        if (v == 1.0)
          p |= 1U << l;
        else if (v != -1.0)
          throw std::invalid_argument("estimate_parallel: lookup path needs binary controls");
      }
      pattern[static_cast<std::size_t>(j)] = p;
    }
  } else {
    ff = pform.Qf_inv_Bf * controls.cast<cplx>();
    fb = pform.Qb_inv_Bb * controls.cast<cplx>();
  }
  const auto drive = [&](bool forward, long long period) -> const cplx* {
    if (use_lut) {
      const auto& lut = forward ? pform.lut_f : pform.lut_b;
      return lut[pattern[static_cast<std::size_t>(period)]].data();
    }
    return forward ? ff.col(period).data() : fb.col(period).data();
  };

  CMat acc = CMat::Zero(k, N);
  const CMat WfT = pform.Wf.transpose();
  const CMat WbT = pform.Wb.transpose();
  CVec m = CVec::Zero(n);
  for (long long j = 0; j < N; ++j) {
    acc.col(j).noalias() += WfT * m;
    const cplx* f = drive(true, j / c);
    for (int i = 0; i < n; ++i) m(i) = pform.lambda_f(i) * m(i) + f[i];
  }
  m.setZero();
  for (long long j = N - 1; j >= 0; --j) {
    const cplx* f = drive(false, j / c);
    for (int i = 0; i < n; ++i) m(i) = pform.lambda_b(i) * m(i) + f[i];
    acc.col(j).noalias() += WbT * m;
  }

  EstimateTrace out;
  out.T_u = T_u;
  out.samples = acc.real();
  const double re = out.samples.cwiseAbs().maxCoeff();
  const double im = acc.imag().cwiseAbs().maxCoeff();
  if (im > 1e-9 * std::max(re, std::numeric_limits<double>::min())) {
    std::ostringstream os;
    os << "estimate_parallel: imaginary residue " << im << " against |u_hat| " << re;
    throw ConvergenceError(os.str(), im);
  }
  if (settle < 0) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      worst = std::max({worst, std::abs(pform.lambda_f(i)), std::abs(pform.lambda_b(i))});
    settle = worst > 0.0 ? static_cast<int>(std::ceil(std::log(1e-12) / std::log(worst))) : 1;
  }
  set_valid(out, settle, settle);
  return out;
}

namespace {

struct ObservationUpdate {
  Mat V;  // posterior covariance
  Mat K;  // gain: m_post = m_prior - K C^T m_prior
};

ObservationUpdate observe(const Mat& V_prior, const Mat& C, double noise_var) {
  const Eigen::Index m = C.cols();
  const Mat S = noise_var * Mat::Identity(m, m) + C.transpose() * V_prior * C;
  const Mat K = V_prior * C * S.ldlt().solve(Mat::Identity(m, m));
  return {symmetrize(V_prior - K * C.transpose() * V_prior), K};
}

}  // namespace

EstimateTrace oracle_smoother(const AnalogSystem& sys, double eta2, const Mat& controls, double T,
                              const OracleOptions& opts) {
  sys.validate();
  if (opts.p < 4 || opts.p > 24) throw std::invalid_argument("oracle_smoother: p out of range");
  if (controls.rows() != sys.n()) throw std::invalid_argument("oracle_smoother: control dimension");
  if (controls.cols() == 0) throw std::invalid_argument("oracle_smoother: empty control trace");
  const int n = sys.n();
  const long long fine = 1LL << opts.p;
  const double delta = T / static_cast<double>(fine);
  const Mat C = sys.CT.transpose();
  const Mat F = expm(sys.A * delta);
  const Mat Finv = expm(-sys.A * delta);
  const Mat Q = sys.B * sys.B.transpose() * delta;
  const double r = eta2 / delta;

  // Steady-state covariances, checked once per clock period.
  const auto settle = [&](auto&& step, Mat V) {
    for (long long i = 0; i < opts.max_steps; i += fine) {
      Mat next = V;
      for (long long j = 0; j < fine; ++j) next = step(next);
      if (!next.allFinite()) throw ConvergenceError("oracle_smoother: covariance diverged", 0.0);
      const double change = (next - V).norm();
      V = std::move(next);
      if (change <= opts.settle_rel * V.norm() && i > 0) return V;
    }
    throw ConvergenceError("oracle_smoother: covariance did not settle", 0.0);
  };
  const Mat Vf_post = settle(
      [&](const Mat& V) { return observe(symmetrize(F * V * F.transpose() + Q), C, r).V; },
      Mat(Mat::Zero(n, n)));
  const Mat Vf_prior = symmetrize(F * Vf_post * F.transpose() + Q);
  const Mat Kf = observe(Vf_prior, C, r).K;
  const Mat Vb_post = settle(
      [&](const Mat& V) {
        return observe(symmetrize(Finv * (V + Q) * Finv.transpose()), C, r).V;
      },
      Mat(Mat::Zero(n, n)));
  const Mat Vb_prior = symmetrize(Finv * (Vb_post + Q) * Finv.transpose());
  const Mat Kb = observe(Vb_prior, C, r).K;
  const Mat Wt = sys.B.transpose() * (Vf_prior + Vb_post).inverse();

  const long long M = controls.cols();
  const Mat drive = sys.Gamma * controls * delta;  // per fine step
  const Mat Pf = (Mat::Identity(n, n) - Kf * C.transpose());
  const Mat Pb = (Mat::Identity(n, n) - Kb * C.transpose());

  // Forward priors at fine indices k 2^p and k 2^p + 1.
  Mat mf_prior(n, M), mf_next(n, M);
  Vec m = Vec::Zero(n);  // posterior at the current fine index
  Vec prior = Vec::Zero(n);
  for (long long k = 0; k < M; ++k) {
    mf_prior.col(k) = prior;
    m = Pf * prior;
    for (long long i = 0; i < fine; ++i) {
      prior = F * m + drive.col(k);
      if (i == 0) mf_next.col(k) = prior;
      if (i + 1 < fine) m = Pf * prior;
    }
  }

  EstimateTrace out;
  out.T_u = T;
  out.samples.resize(sys.k(), M);
  m.setZero();  // backward posterior at fine index M 2^p
  for (long long k = M - 1; k >= 0; --k) {
    Vec mnext;
    for (long long i = 0; i < fine; ++i) {
      if (i == fine - 1) mnext = m;
      const Vec pr = Finv * (m - drive.col(k));
      m = Pb * pr;
    }
    // Sections on either side of t_k, so the averaging window is centered.
    out.samples.col(k) = 0.5 * Wt * ((m - mf_prior.col(k)) + (mnext - mf_next.col(k)));
  }
  out.valid_begin = 0;
  out.valid_end = M;
  return out;
}

}  // namespace cbadc
