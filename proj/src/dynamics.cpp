#include "fnode/dynamics.hpp"

#include <cassert>
#include <cmath>

#include "fnode/errors.hpp"

namespace fnode::dynamics {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidInput(std::string("non-finite input: ") + what);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string("non-finite input: ") + what);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvalidInput(std::string(what) + " must be strictly positive");
}

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw InvalidInput(std::string(what) + " must be non-negative");
}

// Velocity scale of the regularized Coulomb force.
constexpr double kFrictionSmoothing = 0.01;

}  // namespace

void SmsdParams::validate() const {
  require_positive(m, "m");
  require_non_negative(k, "k");
  require_non_negative(d, "d");
}

void TmsdParams::validate() const {
  for (int i = 0; i < 3; ++i) {
    require_positive(m[i], "m_i");
    require_non_negative(k[i], "k_i");
    require_non_negative(d[i], "d_i");
  }
}

void DoublePendulumParams::validate() const {
  require_positive(m1, "m1");
  require_positive(m2, "m2");
  require_positive(l1, "l1");
  require_positive(l2, "l2");
  require_non_negative(g, "g");
}

void SliderCrankParams::validate() const {
  for (const auto* body : {&body1, &body2, &body3})
    for (int i = 0; i < 3; ++i) require_positive((*body)[i], "mass/inertia entry");
  require_positive(r, "r");
  require_positive(l, "l");
  require_non_negative(k, "k");
  require_non_negative(c01, "c01");
  require_non_negative(c12, "c12");
  require_non_negative(c23, "c23");
  require_non_negative(c, "c");
  require_non_negative(f, "f");
  require_finite(tau, "tau");
  if (spring_rest) require_finite(*spring_rest, "spring_rest");
}

void CartPoleParams::validate() const {
  require_positive(M, "M");
  require_positive(m, "m");
  require_positive(l, "l");
  require_non_negative(g, "g");
}

VectorXd AugmentedState::stacked() const {
  VectorXd z(2 * q.size());
  z << q, qdot;
  return z;
}

AugmentedState AugmentedState::from_stacked(const VectorXd& z) {
  if (z.size() == 0 || z.size() % 2 != 0)
    throw InvalidInput("augmented state must have even, non-zero length");
  const Eigen::Index n = z.size() / 2;
  return {z.head(n), z.tail(n)};
}

void AugmentedState::validate() const {
  if (q.size() == 0 || q.size() != qdot.size())
    throw InvalidInput("q and qdot must have equal, non-zero length");
  require_finite(q, "q");
  require_finite(qdot, "qdot");
}

// ---------------------------------------------------------------------------

double smsd_accel(double x, double v, const SmsdParams& p) {
  require_finite(x, "x");
  require_finite(v, "v");
  return -(p.k / p.m) * x - (p.d / p.m) * v;
}

double smsd_energy(double x, double v, const SmsdParams& p) {
  return 0.5 * p.k * x * x + 0.5 * p.m * v * v;
}

Eigen::Vector3d tmsd_accel(const AugmentedState& s, const TmsdParams& p) {
  s.validate();
  if (s.dim() != 3) throw InvalidInput("triple mass-spring-damper expects n_z = 3");
  const auto& x = s.q;
  const auto& v = s.qdot;
  const auto& [m1, m2, m3] = p.m;
  const auto& [k1, k2, k3] = p.k;
  const auto& [d1, d2, d3] = p.d;
  Eigen::Vector3d a;
  a[0] = -k1 / m1 * x[0] - d1 / m1 * (v[0] - v[1]) + k2 / m1 * (x[1] - x[0]) +
         d2 / m1 * (v[1] - v[0]);
  a[1] = -k2 / m2 * (x[1] - x[0]) - d2 / m2 * (v[1] - v[0]) + k3 / m2 * (x[2] - x[1]) +
         d3 / m2 * (v[2] - v[1]);
  a[2] = -k3 / m3 * (x[2] - x[1]) - d3 / m3 * (v[2] - v[1]);
  return a;
}

double tmsd_energy(const AugmentedState& s, const TmsdParams& p) {
  const auto& x = s.q;
  const auto& v = s.qdot;
  double e = 0.0;
  for (int i = 0; i < 3; ++i) e += 0.5 * p.m[i] * v[i] * v[i];
  e += 0.5 * p.k[0] * x[0] * x[0];
  e += 0.5 * p.k[1] * (x[1] - x[0]) * (x[1] - x[0]);
  e += 0.5 * p.k[2] * (x[2] - x[1]) * (x[2] - x[1]);
  return e;
}

// ---------------------------------------------------------------------------

Eigen::Vector4d double_pendulum_rhs(const Eigen::Vector4d& state, const DoublePendulumParams& p) {
  require_finite(state, "double pendulum state");
  const double th1 = state[0], th2 = state[1], p1 = state[2], p2 = state[3];
  const double delta = th1 - th2;
  const double s = std::sin(delta), c = std::cos(delta);
  const double den = p.m1 + p.m2 * s * s;

  const double h1 = p1 * p2 * s / (p.l1 * p.l2 * den);
  const double h2 = (p.m2 * p.l2 * p.l2 * p1 * p1 + (p.m1 + p.m2) * p.l1 * p.l1 * p2 * p2 -
                     2.0 * p.m2 * p.l1 * p.l2 * p1 * p2 * c) /
                    (2.0 * p.l1 * p.l1 * p.l2 * p.l2 * den * den);

  Eigen::Vector4d out;
  out[0] = (p.l2 * p1 - p.l1 * p2 * c) / (p.l1 * p.l1 * p.l2 * den);
  out[1] = (-p.m2 * p.l2 * p1 * c + (p.m1 + p.m2) * p.l1 * p2) / (p.m2 * p.l1 * p.l2 * p.l2 * den);
  out[2] = -(p.m1 + p.m2) * p.g * p.l1 * std::sin(th1) - h1 + h2 * std::sin(2.0 * delta);
  out[3] = -p.m2 * p.g * p.l2 * std::sin(th2) + h1 - h2 * std::sin(2.0 * delta);
  return out;
}

namespace {

// Kinetic-energy metric of the double pendulum, T = 1/2 w^T M w.
Eigen::Matrix2d dp_mass(double theta1, double theta2, const DoublePendulumParams& p) {
  const double off = p.m2 * p.l1 * p.l2 * std::cos(theta1 - theta2);
  Eigen::Matrix2d m;
  m << (p.m1 + p.m2) * p.l1 * p.l1, off, off, p.m2 * p.l2 * p.l2;
  return m;
}

}  // namespace

Eigen::Vector2d dp_momenta_from_velocities(double theta1, double theta2, double omega1,
                                           double omega2, const DoublePendulumParams& p) {
  return dp_mass(theta1, theta2, p) * Eigen::Vector2d(omega1, omega2);
}

Eigen::Vector2d dp_velocities_from_momenta(double theta1, double theta2, double p1, double p2,
                                           const DoublePendulumParams& p) {
  const Eigen::Matrix2d m = dp_mass(theta1, theta2, p);
  const double det = m.determinant();
  // det = l1^2 l2^2 m2 (m1 + m2 sin^2) > 0 for admissible parameters.
  assert(det > 0.0);
  (void)det;
  return m.inverse() * Eigen::Vector2d(p1, p2);
}

Eigen::Vector2d double_pendulum_accel(const AugmentedState& s, const DoublePendulumParams& p) {
  s.validate();
  if (s.dim() != 2) throw InvalidInput("double pendulum expects n_z = 2");
  const double th1 = s.q[0], th2 = s.q[1];
  const Eigen::Vector2d w = s.qdot;
  const Eigen::Vector2d mom = dp_momenta_from_velocities(th1, th2, w[0], w[1], p);
  const Eigen::Vector4d rhs = double_pendulum_rhs({th1, th2, mom[0], mom[1]}, p);
  // p = M(theta) w  =>  pdot = M wdot + Mdot w.
  const double mdot_off =
      -p.m2 * p.l1 * p.l2 * std::sin(th1 - th2) * (w[0] - w[1]);
  Eigen::Matrix2d mdot;
  mdot << 0.0, mdot_off, mdot_off, 0.0;
  return dp_mass(th1, th2, p).ldlt().solve(rhs.tail<2>() - mdot * w);
}

double double_pendulum_energy(const AugmentedState& s, const DoublePendulumParams& p) {
  const double th1 = s.q[0], th2 = s.q[1];
  const Eigen::Vector2d w = s.qdot;
  const double kinetic = 0.5 * w.dot(dp_mass(th1, th2, p) * w);
  const double potential =
      -p.m1 * p.g * p.l1 * std::cos(th1) - p.m2 * p.g * (p.l1 * std::cos(th1) + p.l2 * std::cos(th2));
  return kinetic + potential;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d cartpole_accel(const Eigen::Vector4d& state, double u, const CartPoleParams& p) {
  require_finite(state, "cart-pole state");
  require_finite(u, "u");
  const double th = state[0], om = state[2];
  const double s = std::sin(th), c = std::cos(th);
  const double a11 = p.m * p.l * p.l, a12 = p.m * p.l * c, a22 = p.M + p.m;
  const double det = a11 * a22 - a12 * a12;
  assert(det > 0.0);
  const double b1 = p.m * p.g * p.l * s;
  const double b2 = u + p.m * p.l * om * om * s;
  return {(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det};
}

// ---------------------------------------------------------------------------

namespace slider_crank {

Eigen::Matrix<double, 9, 9> mass_matrix(const SliderCrankParams& p) {
  Eigen::Matrix<double, 9, 1> diag;
  diag << p.body1, p.body2, p.body3;
  return diag.asDiagonal();
}

Eigen::Matrix<double, 8, 1> constraints(const VectorXd& q, const SliderCrankParams& p) {
  const double r = p.r, l = p.l;
  Eigen::Matrix<double, 8, 1> phi;
  phi << q[0] - r * std::cos(q[2]),
         q[1] - r * std::sin(q[2]),
         q[0] + r * std::cos(q[2]) - q[3] + l * std::cos(q[5]),
         q[1] + r * std::sin(q[2]) - q[4] + l * std::sin(q[5]),
         q[3] + l * std::cos(q[5]) - q[6],
         q[4] + l * std::sin(q[5]) - q[7],
         q[7],
         q[8];
  return phi;
}

Eigen::Matrix<double, 8, 9> jacobian(const VectorXd& q, const SliderCrankParams& p) {
  const double rs = p.r * std::sin(q[2]), rc = p.r * std::cos(q[2]);
  const double ls = p.l * std::sin(q[5]), lc = p.l * std::cos(q[5]);
  Eigen::Matrix<double, 8, 9> j;
  j << 1, 0,  rs,  0,  0,   0,  0,  0, 0,
       0, 1, -rc,  0,  0,   0,  0,  0, 0,
       1, 0, -rs, -1,  0, -ls,  0,  0, 0,
       0, 1,  rc,  0, -1,  lc,  0,  0, 0,
       0, 0,   0,  1,  0, -ls, -1,  0, 0,
       0, 0,   0,  0,  1,  lc,  0, -1, 0,
       0, 0,   0,  0,  0,   0,  0,  1, 0,
       0, 0,   0,  0,  0,   0,  0,  0, 1;
  return j;
}

Eigen::Matrix<double, 8, 1> gamma(const VectorXd& q, const VectorXd& qdot,
                                  const SliderCrankParams& p) {
  const double w1 = qdot[2], w2 = qdot[5];
  const double r1c = p.r * w1 * w1 * std::cos(q[2]), r1s = p.r * w1 * w1 * std::sin(q[2]);
  const double l2c = p.l * w2 * w2 * std::cos(q[5]), l2s = p.l * w2 * w2 * std::sin(q[5]);
  Eigen::Matrix<double, 8, 1> g;
  g << -r1c, -r1s, r1c + l2c, r1s + l2s, l2c, l2s, 0.0, 0.0;
  return g;
}

Eigen::Matrix<double, 9, 1> applied_forces(const VectorXd& q, const VectorXd& qdot,
                                           const SliderCrankParams& p) {
  const double w1 = qdot[2], w2 = qdot[5], w3 = qdot[8];
  const double slider_v = qdot[6];
  Eigen::Matrix<double, 9, 1> f = Eigen::Matrix<double, 9, 1>::Zero();
  // Joint dampers act as equal and opposite torques on the bodies they connect.
  f[2] = p.tau - p.c01 * w1 - p.c12 * (w1 - w2);
  f[5] = -p.c12 * (w2 - w1) - p.c23 * (w2 - w3);
  f[8] = -p.c23 * (w3 - w2);
  f[6] = -p.k * (q[6] - p.rest_position()) - p.f * std::tanh(slider_v / kFrictionSmoothing) -
         p.c * slider_v;
  return f;
}

std::pair<Eigen::Matrix<double, 17, 17>, Eigen::Matrix<double, 17, 1>> kkt_system(
    const VectorXd& q, const VectorXd& qdot, const SliderCrankParams& p) {
  Eigen::Matrix<double, 17, 17> a = Eigen::Matrix<double, 17, 17>::Zero();
  const auto j = jacobian(q, p);
  a.topLeftCorner<9, 9>() = mass_matrix(p);
  a.topRightCorner<9, 8>() = j.transpose();
  a.bottomLeftCorner<8, 9>() = j;
  Eigen::Matrix<double, 17, 1> b;
  b << applied_forces(q, qdot, p), gamma(q, qdot, p);
  return {a, b};
}

}  // namespace slider_crank

KktSolution slider_crank_rhs(const VectorXd& q, const VectorXd& qdot, const SliderCrankParams& p) {
  if (q.size() != 9 || qdot.size() != 9) throw InvalidInput("slider-crank expects 9 coordinates");
  require_finite(q, "q");
  require_finite(qdot, "qdot");
  const auto [a, b] = slider_crank::kkt_system(q, qdot, p);
  const Eigen::FullPivLU<Eigen::Matrix<double, 17, 17>> lu(a);
  if (!lu.isInvertible()) throw SingularConfiguration("slider-crank saddle-point matrix is singular");
  const Eigen::Matrix<double, 17, 1> x = lu.solve(b);
  return {x.head<9>(), x.tail<8>()};
}

AugmentedState slider_crank_reconstruct(double theta1, double theta1dot,
                                        const SliderCrankParams& p) {
  require_finite(theta1, "theta1");
  require_finite(theta1dot, "theta1dot");
  const double s1 = std::sin(theta1), c1 = std::cos(theta1);
  const double sin2 = -p.r / p.l * s1;
  if (std::abs(sin2) >= 1.0)
    throw KinematicLock("slider-crank cannot assemble: |sin theta1| r / l >= 1");
  const double theta2 = std::asin(sin2);
  const double c2 = std::cos(theta2);
  const double r = p.r, l = p.l;

  VectorXd q(9), v(9);
  q[0] = r * c1;
  q[1] = r * s1;
  q[2] = theta1;
  q[3] = q[0] + r * c1 + l * c2;
  q[4] = q[1] + r * s1 + l * sin2;
  q[5] = theta2;
  q[6] = q[3] + l * c2;
  q[7] = 0.0;
  q[8] = 0.0;

  const double w1 = theta1dot;
  const double w2 = -r * c1 * w1 / (l * c2);
  v[0] = -r * s1 * w1;
  v[1] = r * c1 * w1;
  v[2] = w1;
  v[3] = v[0] - r * s1 * w1 - l * sin2 * w2;
  v[4] = v[1] + r * c1 * w1 + l * c2 * w2;
  v[5] = w2;
  v[6] = v[3] - l * sin2 * w2;
  v[7] = 0.0;
  v[8] = 0.0;
  return {q, v};
}

}  // namespace fnode::dynamics
