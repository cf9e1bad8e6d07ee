#pragma once

#include <stdexcept>
#include <string>

namespace cbadc {

/// Resolvent (i omega I - A) is singular at the requested frequency.
class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solve stopped without meeting its gate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A simulated state left the 10 b envelope.
class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(const std::string& what, long long period, int stage)
      : std::runtime_error(what), period_(period), stage_(stage) {}
  long long period() const { return period_; }
  int stage() const { return stage_; }

 private:
  long long period_;
  int stage_;
};

}  // namespace cbadc
