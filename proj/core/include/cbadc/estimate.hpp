#pragma once

#include <deque>

#include "cbadc/design.hpp"
#include "cbadc/sim.hpp"

namespace cbadc {

struct EstimateTrace {
  double T_u = 0.0;
  Mat samples;  ///< k x N, column j is u_hat(j T_u)
  long long valid_begin = 0;
  long long valid_end = 0;  ///< exclusive

  long long size() const { return samples.cols(); }
  /// Row `channel` over [valid_begin, valid_end).
  Vec valid(int channel = 0) const;
};

/// Minimal L with max(||Af^L||_2, ||Ab^L||_2) < tol.
int settle_length(const FilterCoefficients& coeffs, double tol = 1e-12);

/// Number of estimate samples per control period, T / T_u. Throws unless
/// it is an integer.
int substeps_per_period(double T, double T_u);

struct BatchOptions {
  long long block = 1LL << 16;  ///< backward pass block length (estimate samples)
  double settle_tol = 1e-12;
};

/// Forward and backward recursions over the whole trace (controls are n x M,
/// one column per clock period T; each column is held for T / T_u samples).
/// The backward pass runs in blocks with 2 L* lookahead.
EstimateTrace estimate_batch(const FilterCoefficients& coeffs, const Mat& controls, double T,
                             const BatchOptions& opts = {});
EstimateTrace estimate_batch(const FilterCoefficients& coeffs, const ControlTrace& trace,
                             const BatchOptions& opts = {});

/// h_l = W^T Ab^l Bb for l = 0..L, each k x n.
std::vector<Mat> mixed_taps(const FilterCoefficients& coeffs, int L);

/// Streaming mixed IIR/FIR estimator (T_u = T):
/// u_hat_k = -W^T m_f,k + sum_{l=0}^{L} h_l s_{k+l}.
class MixedEstimator {
 public:
  MixedEstimator(const FilterCoefficients& coeffs, int latency);
  /// Feeds s_j; returns true and fills `out` with u_hat_{j-L} once available.
  bool push(const Vec& s, Vec& out);
  int latency() const { return L_; }

 private:
  Mat Af_, Bf_, Wt_;
  std::vector<Mat> taps_;
  int L_;
  std::deque<Vec> window_;
  Vec mf_;  ///< forward message at the oldest buffered index
};

/// Whole-trace convenience wrapper around MixedEstimator. Output index k
/// lines up with the batch output; samples past M - L are not produced.
EstimateTrace estimate_mixed(const FilterCoefficients& coeffs, const Mat& controls, int latency);

/// FIR variant: the forward term is also expanded,
/// -W^T m_f,k = -sum_{j=1}^{Lf} W^T Af^{j-1} Bf s_{k-j}.
EstimateTrace estimate_fir(const FilterCoefficients& coeffs, const Mat& controls, int latency,
                           int forward_taps);

/// Bound on |u_hat_mixed - u_hat_batch| for controls with |s_l| <= 1:
/// ||W^T Ab^{L+1}||_2 sqrt(n) sum_j ||Ab^j Bb||_2.
double mixed_truncation_bound(const FilterCoefficients& coeffs, int latency);

/// Same for the forward expansion of the FIR variant, with Af, Bf, Lf.
double fir_truncation_bound(const FilterCoefficients& coeffs, int forward_taps);

/// n complex scalar recursions per direction. With use_lut the control
/// contributions come from the 2^n tables (controls must be exactly +-1).
EstimateTrace estimate_parallel(const ParallelForm& pform, const Mat& controls, double T,
                                double T_u, bool use_lut = false, int settle = -1);

struct OracleOptions {
  int p = 8;                    ///< Delta = T / 2^p, 4 <= p <= 24
  double settle_rel = 1e-13;    ///< covariance steady-state tolerance per unit T
  long long max_steps = 1LL << 26;
};

/// Discrete-time Kalman smoother at step Delta with observation y = C^T x
/// = 0 of noise variance eta2 / Delta and process noise B B^T Delta
/// (sigma_U = 1). Covariances are run to steady state, means start at zero.
/// Returns u_hat at the clock instants, each the mean of the two section
/// estimates adjacent to t_k. Requires 4 <= p <= 24. Throws ConvergenceError if the
/// covariance recursion diverges or does not settle.
EstimateTrace oracle_smoother(const AnalogSystem& sys, double eta2, const Mat& controls, double T,
                              const OracleOptions& opts = {});

}  // namespace cbadc
