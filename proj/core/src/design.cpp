#include "cbadc/design.hpp"

#include <cmath>
#include <limits>
#include <tuple>
#include <sstream>
#include <stdexcept>

#include "cbadc/errors.hpp"

namespace cbadc {

namespace {

double dir_sign(Direction dir) { return dir == Direction::forward ? 1.0 : -1.0; }

void check_care_shapes(const Mat& A, const Mat& B, const Mat& C) {
  if (A.rows() != A.cols()) throw std::invalid_argument("care: A must be square");
  if (B.rows() != A.rows() || C.rows() != A.rows())
    throw std::invalid_argument("care: B and C must have n rows");
}

}  // namespace

Mat care_residual(const Mat& A, const Mat& B, const Mat& C, double eta2, const Mat& V,
                  Direction dir) {
  const Mat AV = dir_sign(dir) * A * V;
  return AV + AV.transpose() + B * B.transpose() - V * C * C.transpose() * V / eta2;
}

double care_relative_residual(const Mat& A, const Mat& B, const Mat& C, double eta2,
                              const Mat& V, Direction dir) {
  const Mat AV = A * V;
  const Mat BB = B * B.transpose();
  const Mat VCCV = V * C * C.transpose() * V / eta2;
  const double scale = 2.0 * AV.norm() + BB.norm() + VCCV.norm();
  const double r = care_residual(A, B, C, eta2, V, dir).norm();
  return scale > 0.0 ? r / scale : r;
}

CareResult care_solve(const Mat& A, const Mat& B, const Mat& C, double eta2, Direction dir,
                      const CareOptions& opts) {
  check_care_shapes(A, B, C);
  if (!(eta2 > 0.0)) throw std::invalid_argument("care_solve: eta2 must be > 0");
  const Eigen::Index n = A.rows();
  const Mat As = dir_sign(dir) * A;
  const Mat BB = B * B.transpose();
  const Mat CC = C * C.transpose() / eta2;
  const auto residual = [&](const Mat& V) {
    const Mat AV = As * V;
    return Mat(AV + AV.transpose() + BB - V * CC * V);
  };
  // Lower bound on the closed-loop rate, so that the step stays finite when
  // A and V both vanish.
  const double rate_floor = spectral_norm(B) * spectral_norm(C) / std::sqrt(eta2);

  CareResult out;
  Mat V = Mat::Zero(n, n);
  Mat R = residual(V);
  double r = R.norm();
  const double r0 = r;
  Mat best = V;
  double best_r = r;
  double progress_mark = r;
  int since_progress = 0;
  double tau = std::numeric_limits<double>::infinity();

  while (r > 0.0 && out.iterations < opts.max_iterations && since_progress < opts.patience) {
    const double rate = std::max((As - V * CC).norm(), rate_floor);
    tau = std::min(tau, 0.5 / rate);
    const Mat Vn = symmetrize(V + tau * R);
    const Mat Rn = residual(Vn);
    const double rn = Rn.norm();
    if (!std::isfinite(rn) || rn > 1.2 * r) {
      tau *= 0.5;
      ++out.rejected_steps;
      if (tau == 0.0) break;
      continue;
    }
    const double step = tau * R.norm();
    V = Vn;
    R = Rn;
    r = rn;
    ++out.iterations;
    tau *= 1.1;
    if (r < best_r) {
      best_r = r;
      best = V;
    }
    // The residual first grows while V builds up from zero; stagnation is
    // only counted once it has dropped below its starting value.
    if (r < 0.99 * progress_mark) {
      progress_mark = r;
      since_progress = 0;
    } else if (best_r < r0) {
      ++since_progress;
    }
    if (step <= 1e-17 * V.norm()) break;
  }

  out.V = symmetrize(best);
  out.residual = residual(out.V).norm();
  out.relative_residual = care_relative_residual(A, B, C, eta2, out.V, dir);
  out.converged = out.relative_residual <= opts.rel_tol;

  if (n > 0 && !out.V.isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(out.V, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev(0) < -1e-10 * ev(n - 1)) {
      std::ostringstream os;
      os << "care_solve: result indefinite (min eigenvalue " << ev(0) << ")";
      throw ConvergenceError(os.str(), out.relative_residual);
    }
  }
  return out;
}

std::pair<Mat, Mat> discretize(const Mat& A_cl, const Mat& Gamma, double T_u) {
  if (!(T_u > 0.0)) throw std::invalid_argument("discretize: T_u must be > 0");
  return expm_with_input(A_cl, Gamma, T_u);
}

Mat solve_w(const Mat& Vf, const Mat& Vb, const Mat& B) {
  const Mat S = Vf + Vb;
  if (S.rows() != S.cols() || B.rows() != S.rows())
    throw std::invalid_argument("solve_w: dimension mismatch");
  if (S.size() == 0) throw std::domain_error("solve_w: empty system");
  // Symmetric diagonal equilibration; the chain covariances span many decades.
  Vec d(S.rows());
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    const double sii = std::abs(S(i, i));
    d(i) = sii > 0.0 ? 1.0 / std::sqrt(sii) : 1.0;
  }
  const Mat Se = d.asDiagonal() * S * d.asDiagonal();
  Eigen::PartialPivLU<Mat> lu(Se);
  const double scale = Se.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-15 * scale))
    throw std::domain_error("solve_w: Vf + Vb is singular");
  return d.asDiagonal() * lu.solve(d.asDiagonal() * B);
}

double w_backward_error(const Mat& S, const Mat& W, const Mat& B) {
  const Mat r = (S * W - B).cwiseAbs();
  const Mat scale = S.cwiseAbs() * W.cwiseAbs() + B.cwiseAbs();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      if (r(i, j) > 0.0) worst = std::max(worst, r(i, j) / scale(i, j));
  return worst;
}

FilterCoefficients design_filter(const AnalogSystem& sys, double eta2, double T_u,
                                 DesignReport* report, const CareOptions& opts) {
  sys.validate();
  if (!(eta2 > 0.0)) throw std::invalid_argument("design_filter: eta2 must be > 0");
  if (!(T_u > 0.0)) throw std::invalid_argument("design_filter: T_u must be > 0");
  const Mat C = sys.CT.transpose();
  DesignReport rep;
  rep.forward = care_solve(sys.A, sys.B, C, eta2, Direction::forward, opts);
  rep.backward = care_solve(sys.A, sys.B, C, eta2, Direction::backward, opts);

  FilterCoefficients fc;
  fc.T_u = T_u;
  fc.eta2 = eta2;
  fc.Vf = rep.forward.V;
  fc.Vb = rep.backward.V;
  fc.residual_f = rep.forward.relative_residual;
  fc.residual_b = rep.backward.relative_residual;
  const Mat CC = C * C.transpose() / eta2;
  std::tie(fc.Af, fc.Bf) = discretize(sys.A - fc.Vf * CC, sys.Gamma, T_u);
  Mat integral;
  std::tie(fc.Ab, integral) = discretize(-(sys.A + fc.Vb * CC), sys.Gamma, T_u);
  fc.Bb = -integral;
  fc.W = solve_w(fc.Vf, fc.Vb, sys.B);

  rep.rho_f = spectral_radius(fc.Af);
  rep.rho_b = spectral_radius(fc.Ab);
  const double bnorm = sys.B.norm();
  const Mat S = fc.Vf + fc.Vb;
  const Mat wres = S * fc.W - sys.B;
  rep.w_residual = wres.norm() / (bnorm > 0.0 ? bnorm : 1.0);
  rep.w_backward_error = w_backward_error(S, fc.W, sys.B);

  if (!rep.forward.converged) rep.failures.push_back("forward CARE residual above gate");
  if (!rep.backward.converged) rep.failures.push_back("backward CARE residual above gate");
  if (!(rep.rho_f < 1.0)) rep.failures.push_back("spectral radius of Af >= 1");
  if (!(rep.rho_b < 1.0)) rep.failures.push_back("spectral radius of Ab >= 1");
  if (!(rep.w_backward_error <= 1e-12)) rep.failures.push_back("W backward error above 1e-12");
  rep.ok = rep.failures.empty();
  if (report) *report = rep;
  if (!rep.ok) {
    std::ostringstream os;
    os << "design_filter:";
    for (const auto& f : rep.failures) os << ' ' << f << ';';
    throw ConvergenceError(os.str(), std::max(fc.residual_f, fc.residual_b));
  }
  return fc;
}

namespace {

struct Eigenpack {
  CVec lambda;
  CMat Q;
  CMat Q_inv;
  double cond;
};

Eigenpack eigenpack(const Mat& M, const char* name) {
  Eigen::EigenSolver<Mat> es(M, true);
  if (es.info() != Eigen::Success)
    throw ConvergenceError(std::string("parallelize: eigensolver failed for ") + name, 0.0);
  Eigenpack p;
  p.lambda = es.eigenvalues();
  p.Q = es.eigenvectors();
  Eigen::JacobiSVD<CMat> svd(p.Q);
  const auto& sv = svd.singularValues();
  p.cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                   : std::numeric_limits<double>::infinity();
  if (!(p.cond <= 1e8)) {
    std::ostringstream os;
    os << "parallelize: eigenvector matrix of " << name << " has condition " << p.cond;
    throw ConvergenceError(os.str(), p.cond);
  }
  p.Q_inv = p.Q.partialPivLu().inverse();
  return p;
}

std::vector<CVec> build_lut(const CMat& G) {
  const auto n = G.cols();
  const std::size_t entries = std::size_t{1} << n;
  std::vector<CVec> lut(entries);
  Eigen::VectorXd s(n);
  for (std::size_t p = 0; p < entries; ++p) {
    for (Eigen::Index l = 0; l < n; ++l) s(l) = (p >> l) & 1U ? 1.0 : -1.0;
    lut[p] = G * s.cast<cplx>();
  }
  return lut;
}

}  // namespace

ParallelForm parallelize(const FilterCoefficients& coeffs) {
  const Eigenpack f = eigenpack(coeffs.Af, "Af");
  const Eigenpack b = eigenpack(coeffs.Ab, "Ab");
  ParallelForm pf;
  pf.lambda_f = f.lambda;
  pf.lambda_b = b.lambda;
  pf.cond_f = f.cond;
  pf.cond_b = b.cond;
  pf.Qf_inv_Bf = f.Q_inv * coeffs.Bf.cast<cplx>();
  pf.Qb_inv_Bb = b.Q_inv * coeffs.Bb.cast<cplx>();
  pf.Wf = -f.Q.transpose() * coeffs.W.cast<cplx>();
  pf.Wb = b.Q.transpose() * coeffs.W.cast<cplx>();
  if (pf.Qf_inv_Bf.cols() <= 12) {
    pf.lut_f = build_lut(pf.Qf_inv_Bf);
    pf.lut_b = build_lut(pf.Qb_inv_Bb);
  }
  return pf;
}

}  // namespace cbadc
