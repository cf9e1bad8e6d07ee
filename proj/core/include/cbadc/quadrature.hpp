#pragma once

#include <functional>

namespace cbadc {

/// Adaptive Simpson on [a, b] with absolute tolerance abs_tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 48);

/// Integral of f over [0, hi] for integrands spanning many decades.
/// The interval is split on a log-spaced grid, a coarse pass sets the
/// scale, then each panel is refined to rel_tol of the total.
double integrate_band(const std::function<double(double)>& f, double hi,
                      double rel_tol = 1e-8);

}  // namespace cbadc
