#pragma once

// Analytic right-hand sides for the five benchmark systems.
//
// Conventions:
//   * Cart-pole states are ordered (theta, x, omega, v) everywhere, theta
//     measured from the upright position.
//   * Slider-crank generalized coordinates are
//     q = (x1, y1, theta1, x2, y2, theta2, x3, y3, theta3); r and l are the
//     half-lengths of crank and connecting rod.

#include <array>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace fnode::dynamics {

using Eigen::VectorXd;

struct SmsdParams {
  double m = 10.0;  // kg
  double k = 50.0;  // N/m
  double d = 2.0;   // N s/m
  void validate() const;
};

struct TmsdParams {
  std::array<double, 3> m{100.0, 10.0, 1.0};
  std::array<double, 3> k{50.0, 50.0, 50.0};
  std::array<double, 3> d{2.0, 2.0, 2.0};
  void validate() const;
};

struct DoublePendulumParams {
  double m1 = 1.0, m2 = 1.0;
  double l1 = 1.0, l2 = 1.0;
  double g = 9.81;
  void validate() const;
};

struct SliderCrankParams {
  // Diagonals of the per-body mass blocks (m, m, I).
  Eigen::Vector3d body1{3.0, 3.0, 4.0};
  Eigen::Vector3d body2{6.0, 6.0, 32.0};
  Eigen::Vector3d body3{1.0, 1.0, 1.0};
  double r = 1.0;  // crank half-length, m
  double l = 2.0;  // rod half-length, m
  double k = 1.0;  // slider spring, N/m
  double c01 = 0.1, c12 = 0.1, c23 = 0.1;  // joint dampers, N m s
  double c = 0.1;    // slider damper, N s/m
  double f = 0.0;    // Coulomb force amplitude, N
  double tau = 1.0;  // motor torque, N m
  // Unstretched slider position; defaults to the slider position at theta1 = 0.
  std::optional<double> spring_rest;

  double rest_position() const { return spring_rest.value_or(2.0 * r + 2.0 * l); }
  void validate() const;
};

struct CartPoleParams {
  double M = 1.0;  // cart, kg
  double m = 1.0;  // pole tip, kg
  double l = 1.0;  // m
  double g = 9.81;
  void validate() const;
};

using SystemParams =
    std::variant<SmsdParams, TmsdParams, DoublePendulumParams, SliderCrankParams, CartPoleParams>;

/// Generalized positions and velocities of equal length n_z.
struct AugmentedState {
  VectorXd q;
  VectorXd qdot;

  Eigen::Index dim() const { return q.size(); }
  VectorXd stacked() const;
  static AugmentedState from_stacked(const VectorXd& z);
  void validate() const;
};

struct KktSolution {
  VectorXd qddot;   // 9
  VectorXd lambda;  // 8
};

// ---------------------------------------------------------------------------
// Mass-spring-damper systems

double smsd_accel(double x, double v, const SmsdParams& p);
double smsd_energy(double x, double v, const SmsdParams& p);

Eigen::Vector3d tmsd_accel(const AugmentedState& state, const TmsdParams& p);
double tmsd_energy(const AugmentedState& state, const TmsdParams& p);

// ---------------------------------------------------------------------------
// Double pendulum in canonical coordinates (theta1, theta2, p_theta1, p_theta2).

Eigen::Vector4d double_pendulum_rhs(const Eigen::Vector4d& state, const DoublePendulumParams& p);

Eigen::Vector2d dp_momenta_from_velocities(double theta1, double theta2, double omega1,
                                           double omega2, const DoublePendulumParams& p);
Eigen::Vector2d dp_velocities_from_momenta(double theta1, double theta2, double p1, double p2,
                                           const DoublePendulumParams& p);

/// Angular accelerations for a state given in velocities.
Eigen::Vector2d double_pendulum_accel(const AugmentedState& state, const DoublePendulumParams& p);
double double_pendulum_energy(const AugmentedState& state, const DoublePendulumParams& p);

// ---------------------------------------------------------------------------
// Cart-pole

/// Returns (theta_ddot, x_ddot) for state (theta, x, omega, v) and cart force u.
Eigen::Vector2d cartpole_accel(const Eigen::Vector4d& state, double u, const CartPoleParams& p);

// ---------------------------------------------------------------------------
// Slider-crank

namespace slider_crank {
inline constexpr int kCoords = 9;
inline constexpr int kConstraints = 8;

Eigen::Matrix<double, 9, 9> mass_matrix(const SliderCrankParams& p);
Eigen::Matrix<double, 8, 1> constraints(const VectorXd& q, const SliderCrankParams& p);
Eigen::Matrix<double, 8, 9> jacobian(const VectorXd& q, const SliderCrankParams& p);
/// Right-hand side of the acceleration-level constraints, Phi_q qddot = gamma.
Eigen::Matrix<double, 8, 1> gamma(const VectorXd& q, const VectorXd& qdot,
                                  const SliderCrankParams& p);
Eigen::Matrix<double, 9, 1> applied_forces(const VectorXd& q, const VectorXd& qdot,
                                           const SliderCrankParams& p);
/// Assembled 17x17 saddle-point matrix and right-hand side.
std::pair<Eigen::Matrix<double, 17, 17>, Eigen::Matrix<double, 17, 1>> kkt_system(
    const VectorXd& q, const VectorXd& qdot, const SliderCrankParams& p);
}  // namespace slider_crank

/// Solves the saddle-point system for accelerations and multipliers.
/// Throws SingularConfiguration when the system matrix is numerically singular.
KktSolution slider_crank_rhs(const VectorXd& q, const VectorXd& qdot, const SliderCrankParams& p);

/// Closed-form assembly from the crank angle and rate, on the cos(theta2) > 0 branch.
/// Throws KinematicLock when |sin theta1| r / l > 1.
AugmentedState slider_crank_reconstruct(double theta1, double theta1dot,
                                        const SliderCrankParams& p);

}  // namespace fnode::dynamics
