#pragma once

// Receding-horizon LQ control of the cart-pole. State ordering is
// (theta, x, omega, v) with theta measured from upright; the input is the
// horizontal force on the cart.

#include <optional>

#include <Eigen/Dense>

#include "fnode/dynamics.hpp"
#include "fnode/fnode.hpp"
#include "fnode/integrate.hpp"

namespace fnode::mpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Continuous-time linearization zdot = A z + B u about an operating point.
struct LinearModel {
  MatrixXd A;  // 4 x 4
  MatrixXd B;  // 4 x 1
  VectorXd state;
  double input = 0.0;
};

struct DiscreteModel {
  MatrixXd A;
  MatrixXd B;
};

struct MpcConfig {
  int horizon = 50;
  MatrixXd Q = MatrixXd::Identity(4, 4);
  MatrixXd R = MatrixXd::Identity(1, 1);
  double dt = 0.01;
  std::optional<double> u_max;  // symmetric clamp on the applied input

  void validate() const;
};

/// Upright-equilibrium linearization of the analytic cart-pole.
LinearModel linearize_analytic(const dynamics::CartPoleParams& p);
/// Exact Jacobian of the analytic cart-pole at an arbitrary state and input.
LinearModel linearize_analytic(const dynamics::CartPoleParams& p, const VectorXd& state, double input);

/// Jacobian of a learned (theta, x, omega, v, u) -> (theta_ddot, x_ddot) map.
LinearModel linearize_model(const model::TrainedModel& model, const VectorXd& state, double input);

/// Forward Euler: A_d = I + A dt, B_d = B dt.
DiscreteModel discretize(const LinearModel& model, double dt);
DiscreteModel discretize(const MatrixXd& A, const MatrixXd& B, double dt);

/// Minimizes sum_{k<N} (z_k' Q z_k + u_k' R u_k) + z_N' Q z_N subject to
/// z_{k+1} = A z_k + B u_k by backward Riccati recursion. Returns the N x m
/// input sequence. Throws ConditioningError when R + B' P B is not safely
/// positive definite.
MatrixXd solve_horizon(const DiscreteModel& model, const MpcConfig& config, const VectorXd& z0);

/// Time-varying feedback gains K_0..K_{N-1} with u_k = -K_k z_k.
std::vector<MatrixXd> riccati_gains(const DiscreteModel& model, const MpcConfig& config);

enum class ControllerKind { Analytic, Learned };

struct Controller {
  ControllerKind kind = ControllerKind::Analytic;
  dynamics::CartPoleParams analytic_params;     // used when kind == Analytic
  const model::TrainedModel* learned = nullptr;  // used when kind == Learned
  /// Linearize at the current state and previous input every step instead of
  /// once at the upright equilibrium.
  bool relinearize = false;

  static Controller analytic(const dynamics::CartPoleParams& p, bool relinearize = false) {
    return {ControllerKind::Analytic, p, nullptr, relinearize};
  }
  static Controller from_model(const model::TrainedModel& m, bool relinearize = true) {
    return {ControllerKind::Learned, {}, &m, relinearize};
  }
};

/// Drives the nonlinear plant for `steps` steps with zero-order hold of the
/// first optimal input. By default the learned model is re-linearized at the
/// current state (and previous input) every step and the analytic model uses
/// its fixed upright linearization. The returned inputs row k is the input
/// applied on [t_k, t_{k+1}); the final row is the input the controller would
/// apply next. Throws InstabilityError when |theta| exceeds pi/2.
integrate::Trajectory closed_loop(const dynamics::CartPoleParams& plant, const Controller& controller,
                                  const MpcConfig& config, const Eigen::Vector4d& z0, std::size_t steps,
                                  integrate::Scheme plant_scheme = integrate::Scheme::Midpoint);

}  // namespace fnode::mpc
