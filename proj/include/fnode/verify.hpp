#pragma once

// Self-checks run by `fnode verify`: each suite measures one numerical
// property and compares it with a fixed threshold.

#include <string>
#include <vector>

#include "fnode/integrate.hpp"

namespace fnode::verify {

struct SuiteResult {
  std::string name;
  double value = 0.0;  // measured quantity
  std::string bound;   // human-readable pass condition
  bool pass = false;
};

/// Least-squares slope of log(error) against log(dt) for zdot = z on [0, 1].
double integrator_order(integrate::Scheme scheme);

/// Max relative error between backprop and central differences (h = 1e-5)
/// on a 2-16-16-1 tanh network.
double gradient_check_error(unsigned long long seed = 7);

struct SpectralReport {
  double sine_error = 0.0;  // interior max error for sin(2 pi t / L), N = 512
  double ramp_error = 0.0;  // interior max error for a linear ramp
  double naive_ramp_error = 0.0;
  double gibbs_ratio() const;
};
SpectralReport spectral_accuracy();

/// Max relative energy drift of the undamped double pendulum over `steps` RK4 steps.
double energy_drift(int steps = 300);

/// Max ||Phi(q)||_inf along the projected slider-crank reference run.
double constraint_residual(int steps = 4500);

std::vector<SuiteResult> run_all();

}  // namespace fnode::verify
