#pragma once

#include <string>
#include <vector>

#include "cbadc/model.hpp"

namespace cbadc {

enum class Direction { forward, backward };

/// Forward:  A V + (A V)^T + B B^T - V C C^T V / eta2 = 0.
/// Backward: the same with A replaced by -A.
Mat care_residual(const Mat& A, const Mat& B, const Mat& C, double eta2, const Mat& V,
                  Direction dir);

/// ||R||_F / (2 ||A V||_F + ||B B^T||_F + ||V C C^T V||_F / eta2): the
/// residual relative to the size of the terms that cancel in it.
double care_relative_residual(const Mat& A, const Mat& B, const Mat& C, double eta2,
                              const Mat& V, Direction dir);

struct CareOptions {
  double rel_tol = 1e-10;       ///< gate on care_relative_residual
  int max_iterations = 1000000;
  int patience = 4000;          ///< stop after this many steps without 1% progress
};

struct CareResult {
  Mat V;
  int iterations = 0;
  int rejected_steps = 0;
  double residual = 0.0;           ///< ||R||_F
  double relative_residual = 0.0;  ///< care_relative_residual
  bool converged = false;
};

/// Steady-state covariance by the damped iteration V <- V + tau R(V),
/// started from V = 0. The step is capped by 1 / (2 ||A_cl||_F), grows by
/// 10% after an accepted step, and is halved whenever it would inflate the
/// residual by more than 20%. The iterate with the smallest residual is
/// returned, symmetrized. Throws ConvergenceError if the result is not
/// positive semidefinite.
CareResult care_solve(const Mat& A, const Mat& B, const Mat& C, double eta2, Direction dir,
                      const CareOptions& opts = {});

/// (e^{A_cl T_u}, \int_0^{T_u} e^{A_cl (T_u - t)} Gamma dt).
std::pair<Mat, Mat> discretize(const Mat& A_cl, const Mat& Gamma, double T_u);

/// Solves (Vf + Vb) W = B with partial pivoting.
Mat solve_w(const Mat& Vf, const Mat& Vb, const Mat& B);

/// max_ij |S W - B|_ij / (|S| |W| + |B|)_ij, the componentwise backward
/// error of a solution of S W = B.
double w_backward_error(const Mat& S, const Mat& W, const Mat& B);

struct FilterCoefficients {
  Mat Af, Ab, Bf, Bb, W, Vf, Vb;
  double T_u = 0.0;
  double eta2 = 0.0;
  double residual_f = 0.0;  ///< relative CARE residuals
  double residual_b = 0.0;

  int n() const { return static_cast<int>(Af.rows()); }
  int k() const { return static_cast<int>(W.cols()); }
};

struct DesignReport {
  CareResult forward;
  CareResult backward;
  double rho_f = 0.0;  ///< spectral radius of Af
  double rho_b = 0.0;
  double w_residual = 0.0;        ///< ||(Vf + Vb) W - B|| / ||B||
  double w_backward_error = 0.0;  ///< componentwise, see w_backward_error()
  bool ok = false;
  std::vector<std::string> failures;
};

/// Full offline design at estimate period T_u. Fills `report` when given.
/// Throws ConvergenceError when a gate fails (CARE residual, spectral
/// radius < 1, W residual).
FilterCoefficients design_filter(const AnalogSystem& sys, double eta2, double T_u,
                                 DesignReport* report = nullptr, const CareOptions& opts = {});

struct ParallelForm {
  CVec lambda_f, lambda_b;
  CMat Qf_inv_Bf, Qb_inv_Bb;  ///< n x n
  CMat Wf, Wb;                ///< n x k: -Qf^T W and Qb^T W
  double cond_f = 0.0, cond_b = 0.0;
  /// 2^n entries each, indexed by the control bit pattern
  /// (bit l set <=> s_{l+1} = +1). Empty when n > 12.
  std::vector<CVec> lut_f, lut_b;

  int n() const { return static_cast<int>(lambda_f.size()); }
  bool has_lut() const { return !lut_f.empty(); }
};

/// Eigendecomposition of Af, Ab. Throws ConvergenceError when either
/// eigenvector matrix has condition number above 1e8.
ParallelForm parallelize(const FilterCoefficients& coeffs);

}  // namespace cbadc
