#pragma once

#include <vector>

#include "cbadc/linalg.hpp"

namespace cbadc {

/// dx/dt = A x + B u + Gamma s,  y = C_T x.
struct AnalogSystem {
  Mat A;
  Mat B;
  Mat Gamma;
  Mat CT;
  double b = 1.0;    ///< state bound |x_l| <= b
  double b_u = 1.0;  ///< input bound |u| <= b_u

  int n() const { return static_cast<int>(A.rows()); }
  int k() const { return static_cast<int>(B.cols()); }
  int m() const { return static_cast<int>(CT.rows()); }

  /// Throws std::invalid_argument on inconsistent shapes or bounds.
  void validate() const;
};

/// Chain of integrators with per-stage gain beta, damping rho and control
/// scale kappa. kappa_fb[j] is the extra feedback from control j+2 into the
/// first stage (empty means none).
struct ChainSpec {
  int n = 0;
  std::vector<double> beta;
  std::vector<double> rho;
  std::vector<double> kappa;
  std::vector<double> kappa_fb;
  int quantizer_bits = 1;
  double dither = 0.0;  ///< threshold dither amplitude as a fraction of b

  void validate() const;
  bool has_feedback() const;
};

enum class Readout { last_state, all_states };

/// Uniform chain: every stage gets the same beta, rho, kappa.
ChainSpec uniform_chain(int n, double beta, double kappa, double rho = 0.0);

AnalogSystem build_chain(const ChainSpec& spec, Readout readout, double b = 1.0,
                         double b_u = 1.0);

struct AtfSample {
  double omega;
  CMat G;  ///< m x k
};

/// G(omega) = C_T (i omega I - A)^{-1} B. Throws PoleError when i omega is
/// (numerically) an eigenvalue of A.
AtfSample atf(const AnalogSystem& sys, double omega);

/// C_T (i omega I - A)^{-1} M for an arbitrary input matrix M.
CMat transfer(const AnalogSystem& sys, const Mat& input, double omega);

/// Largest gamma = T|beta| admissible with an N-bit quantizer and kappa = b.
double gamma_max(int quantizer_bits);

struct StabilityVerdict {
  bool guaranteed = true;
  std::vector<int> failing_stages;  ///< 1-based
  std::vector<double> load;         ///< per stage: lhs / rhs of the admissibility test
};

StabilityVerdict check_stability(const ChainSpec& spec, double T, double b);

}  // namespace cbadc
