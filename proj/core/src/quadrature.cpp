#include "cbadc/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cbadc {

namespace {

struct Simpson {
  const std::function<double(double)>& f;
  int max_depth;

  double recurse(double a, double b, double fa, double fm, double fb, double whole,
                 double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth >= max_depth || std::abs(delta) <= 15.0 * tol)
      return left + right + delta / 15.0;
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

double composite_simpson(const std::function<double(double)>& f, double a, double b,
                         int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  Simpson s{f, max_depth};
  return s.recurse(a, b, fa, fm, fb, whole, abs_tol, 0);
}

double integrate_band(const std::function<double(double)>& f, double hi, double rel_tol) {
  if (!(hi > 0.0)) return 0.0;
  if (!(rel_tol > 0.0)) throw std::invalid_argument("integrate_band: rel_tol must be > 0");
  constexpr int kDecades = 12;
  std::vector<double> edges{0.0};
  for (int k = kDecades; k >= 0; --k) edges.push_back(hi * std::pow(10.0, -k));

  double coarse = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    coarse += composite_simpson(f, edges[i], edges[i + 1], 64);
  const double scale = std::abs(coarse) > 0.0 ? std::abs(coarse) : 1e-300;
  const double panel_tol = rel_tol * scale / static_cast<double>(edges.size() - 1);

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    total += adaptive_simpson(f, edges[i], edges[i + 1], panel_tol);
  return total;
}

}  // namespace cbadc
