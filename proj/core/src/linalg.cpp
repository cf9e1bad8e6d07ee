#include "cbadc/linalg.hpp"

#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace cbadc {

Mat expm(const Mat& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("expm: matrix not square");
  if (M.size() == 0) return M;
  return M.exp();
}

std::pair<Mat, Mat> expm_with_input(const Mat& M, const Mat& G, double h) {
  const Eigen::Index n = M.rows();
  const Eigen::Index k = G.cols();
  if (M.cols() != n || G.rows() != n)
    throw std::invalid_argument("expm_with_input: dimension mismatch");
  Mat aug = Mat::Zero(n + k, n + k);
  aug.topLeftCorner(n, n) = M * h;
  aug.topRightCorner(n, k) = G * h;
  Mat E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, k)};
}

double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

double spectral_radius(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

int decay_length(const Mat& M, double tol, int max_power) {
  Mat P = M;
  for (int L = 1; L <= max_power; ++L) {
    if (spectral_norm(P) < tol) return L;
    P = P * M;
    if (!P.allFinite()) break;
  }
  throw std::runtime_error("decay_length: matrix powers do not decay below tolerance");
}

}  // namespace cbadc
