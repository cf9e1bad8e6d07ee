#pragma once

#include <complex>
#include <Eigen/Dense>

namespace cbadc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

/// Matrix exponential (Pade scaling and squaring).
Mat expm(const Mat& M);

/// Returns (e^{M h}, \int_0^h e^{M(h-t)} G dt) from one exponential of the
/// block matrix [[M, G], [0, 0]] h.
std::pair<Mat, Mat> expm_with_input(const Mat& M, const Mat& G, double h);

double spectral_norm(const Mat& M);
double spectral_radius(const Mat& M);

inline Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

/// Smallest L >= 1 with ||M^L||_2 < tol. Throws if not reached by max_power.
int decay_length(const Mat& M, double tol, int max_power = 1 << 22);

}  // namespace cbadc
