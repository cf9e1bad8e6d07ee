#include "cbadc/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cbadc/errors.hpp"

namespace cbadc {

void AnalogSystem::validate() const {
  const auto n_ = A.rows();
  if (n_ == 0) throw std::invalid_argument("AnalogSystem: empty state");
  if (A.cols() != n_) throw std::invalid_argument("AnalogSystem: A must be square");
  if (B.rows() != n_) throw std::invalid_argument("AnalogSystem: B must have n rows");
  if (Gamma.rows() != n_ || Gamma.cols() != n_)
    throw std::invalid_argument("AnalogSystem: Gamma must be n x n");
  if (CT.cols() != n_) throw std::invalid_argument("AnalogSystem: C_T must have n columns");
  if (B.cols() == 0 || CT.rows() == 0)
    throw std::invalid_argument("AnalogSystem: B and C_T must be non-empty");
  if (!(b > 0.0) || !(b_u > 0.0)) throw std::invalid_argument("AnalogSystem: bounds must be > 0");
  if (!A.allFinite() || !B.allFinite() || !Gamma.allFinite() || !CT.allFinite())
    throw std::invalid_argument("AnalogSystem: non-finite entries");
}

void ChainSpec::validate() const {
  if (n < 1) throw std::invalid_argument("ChainSpec: n must be >= 1");
  const auto un = static_cast<std::size_t>(n);
  if (beta.size() != un || rho.size() != un || kappa.size() != un)
    throw std::invalid_argument("ChainSpec: beta, rho, kappa must have n entries");
  if (!kappa_fb.empty() && kappa_fb.size() != un - 1)
    throw std::invalid_argument("ChainSpec: kappa_fb must have n-1 entries or be empty");
  for (double r : rho)
    if (!(r >= 0.0)) throw std::invalid_argument("ChainSpec: rho must be >= 0");
  if (quantizer_bits < 1 || quantizer_bits > 16)
    throw std::invalid_argument("ChainSpec: quantizer_bits must be in [1, 16]");
  if (!(dither >= 0.0)) throw std::invalid_argument("ChainSpec: dither must be >= 0");
}

bool ChainSpec::has_feedback() const {
  for (double v : kappa_fb)
    if (v != 0.0) return true;
  return false;
}

ChainSpec uniform_chain(int n, double beta, double kappa, double rho) {
  if (n < 1) throw std::invalid_argument("uniform_chain: n must be >= 1");
  ChainSpec s;
  s.n = n;
  s.beta.assign(n, beta);
  s.rho.assign(n, rho);
  s.kappa.assign(n, kappa);
  return s;
}

AnalogSystem build_chain(const ChainSpec& spec, Readout readout, double b, double b_u) {
  spec.validate();
  const int n = spec.n;
  AnalogSystem sys;
  sys.A = Mat::Zero(n, n);
  sys.B = Mat::Zero(n, 1);
  sys.Gamma = Mat::Zero(n, n);
  for (int l = 0; l < n; ++l) {
    sys.A(l, l) = -spec.rho[l];
    if (l > 0) sys.A(l, l - 1) = spec.beta[l];
    sys.Gamma(l, l) = -spec.kappa[l] * spec.beta[l];
  }
  sys.B(0, 0) = spec.beta[0];
  for (std::size_t j = 0; j < spec.kappa_fb.size(); ++j)
    sys.Gamma(0, static_cast<Eigen::Index>(j) + 1) = -spec.kappa_fb[j];
  if (readout == Readout::all_states) {
    sys.CT = Mat::Identity(n, n);
  } else {
    sys.CT = Mat::Zero(1, n);
    sys.CT(0, n - 1) = 1.0;
  }
  sys.b = b;
  sys.b_u = b_u;
  sys.validate();
  return sys;
}

CMat transfer(const AnalogSystem& sys, const Mat& input, double omega) {
  const int n = sys.n();
  if (input.rows() != n) throw std::invalid_argument("transfer: input must have n rows");
  CMat R = cplx(0.0, omega) * CMat::Identity(n, n) - sys.A.cast<cplx>();
  Eigen::PartialPivLU<CMat> lu(R);
  // Only an exactly singular pivot counts as a pole: undamped chains are
  // ill-conditioned near omega = 0 but still solve accurately there.
  const double scale = R.cwiseAbs().rowwise().sum().maxCoeff();
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  CMat out;
  if (min_pivot > std::numeric_limits<double>::min() * scale) out = sys.CT.cast<cplx>() * lu.solve(input.cast<cplx>());
  if (out.size() == 0 || !out.allFinite()) {
    std::ostringstream os;
    os << "resolvent singular at omega=" << omega;
    throw PoleError(os.str());
  }
  return out;
}

AtfSample atf(const AnalogSystem& sys, double omega) {
  return {omega, transfer(sys, sys.B, omega)};
}

double gamma_max(int quantizer_bits) {
  if (quantizer_bits < 1) throw std::invalid_argument("gamma_max: bits must be >= 1");
  return 1.0 / (std::pow(2.0, 1 - quantizer_bits) + 1.0);
}

StabilityVerdict check_stability(const ChainSpec& spec, double T, double b) {
  spec.validate();
  if (!(T > 0.0)) throw std::invalid_argument("check_stability: T must be > 0");
  if (!(b > 0.0)) throw std::invalid_argument("check_stability: b must be > 0");
  // Binary control admits gamma up to 1/2; N bits stretch this to gamma_max(N).
  const double scale = 2.0 * gamma_max(spec.quantizer_bits);
  constexpr double slack = 1e-12;
  StabilityVerdict v;
  for (int l = 0; l < spec.n; ++l) {
    const double beta = std::abs(spec.beta[l]);
    const double kappa = std::abs(spec.kappa[l]);
    double lhs = T * (kappa * beta + beta * b);
    if (l == 0)
      for (double fb : spec.kappa_fb) lhs += T * std::abs(fb);
    const double rhs = b * scale;
    v.load.push_back(lhs / rhs);
    const bool ok = kappa >= b * (1.0 - slack) && lhs <= rhs * (1.0 + slack);
    if (!ok) {
      v.guaranteed = false;
      v.failing_stages.push_back(l + 1);
    }
  }
  return v;
}

}  // namespace cbadc
