#include <cmath>
#include <limits>
#include <numbers>

#include <doctest.h>

#include "fnode/dynamics.hpp"
#include "fnode/errors.hpp"
#include "fnode/integrate.hpp"

using namespace fnode;
using namespace fnode::integrate;
using Eigen::VectorXd;

namespace {

VectorField exponential() {
  return [](double, const VectorXd& z) -> VectorXd { return z; };
}

// Closed-form underdamped oscillator x'' + 2 zeta w x' + w^2 x = 0, x(0) = 1, x'(0) = 0.
std::pair<double, double> damped_oscillator(double t, double m, double k, double d) {
  const double w0 = std::sqrt(k / m);
  const double zeta = d / (2.0 * std::sqrt(k * m));
  const double wd = w0 * std::sqrt(1.0 - zeta * zeta);
  const double decay = std::exp(-zeta * w0 * t);
  const double c = zeta * w0 / wd;
  const double x = decay * (std::cos(wd * t) + c * std::sin(wd * t));
  const double v = decay * (-w0 * w0 / wd) * std::sin(wd * t);
  return {x, v};
}

}  // namespace

TEST_CASE("single steps") {
  const VectorXd one = VectorXd::Ones(1);
  CHECK(step(exponential(), one, 0.0, {Scheme::RK4, 0.1})[0] ==
        doctest::Approx(1.0 + 0.1 + 0.005 + 0.1 * 0.1 * 0.1 / 6 + 0.1 * 0.1 * 0.1 * 0.1 / 24).epsilon(1e-15));
  CHECK(step(exponential(), one, 0.0, {Scheme::Midpoint, 0.1})[0] == doctest::Approx(1.105).epsilon(1e-15));
  CHECK(step(exponential(), one, 0.0, {Scheme::Euler, 0.1})[0] == doctest::Approx(1.1).epsilon(1e-15));

  const VectorField zero = [](double, const VectorXd& z) -> VectorXd { return VectorXd::Zero(z.size()); };
  const VectorXd z = VectorXd::LinSpaced(4, -1.0, 2.0);
  for (auto s : {Scheme::RK4, Scheme::Midpoint, Scheme::Euler}) CHECK(step(zero, z, 0.0, {s, 0.3}) == z);
}

TEST_CASE("non-finite stages raise divergence with the step index") {
  const VectorField bad = [](double, const VectorXd& z) -> VectorXd {
    return VectorXd::Constant(z.size(), std::numeric_limits<double>::infinity());
  };
  try {
    step(bad, VectorXd::Ones(2), 0.0, {Scheme::RK4, 0.1}, 17);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.index() == 17);
  }
  const VectorField blowup = [](double, const VectorXd& z) -> VectorXd { return z.cwiseProduct(z) * 1e300; };
  CHECK_THROWS_AS(rollout(blowup, VectorXd::Ones(1), {Scheme::Euler, 1.0}, 10), DivergenceError);
}

TEST_CASE("invalid integrator settings") {
  CHECK_THROWS_AS((Integrator{Scheme::RK4, 0.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((Integrator{Scheme::RK4, -0.01}.validate()), InvalidInput);
  CHECK(scheme_from_string("midpoint") == Scheme::Midpoint);
  CHECK_THROWS_AS(scheme_from_string("rk45"), InvalidInput);
}

TEST_CASE("second-order wrapping") {
  const AccelFn free = [](const VectorXd& q, const VectorXd&) -> VectorXd { return VectorXd::Zero(q.size()); };
  const auto field = wrap_second_order(free);
  VectorXd z0(4);
  z0 << 1.0, -2.0, 0.5, 3.0;
  CHECK(field(0.0, z0).size() == 4);
  for (auto s : {Scheme::RK4, Scheme::Midpoint, Scheme::Euler}) {
    const auto traj = rollout(field, z0, {s, 0.1}, 20);
    CHECK(std::abs(traj.states(20, 0) - (1.0 + 0.5 * 2.0)) < 1e-12);
    CHECK(std::abs(traj.states(20, 1) - (-2.0 + 3.0 * 2.0)) < 1e-12);
  }
  CHECK_THROWS_AS(field(0.0, VectorXd::Ones(3)), InvalidInput);
}

TEST_CASE("smsd rollout reproduces the closed-form damped oscillator") {
  const dynamics::SmsdParams p;
  const auto field = wrap_second_order(AccelFn([&p](const VectorXd& q, const VectorXd& v) -> VectorXd {
    return VectorXd::Constant(1, dynamics::smsd_accel(q[0], v[0], p));
  }));
  VectorXd z0(2);
  z0 << 1.0, 0.0;
  const auto traj = rollout(field, z0, {Scheme::RK4, 0.01}, 1000);
  REQUIRE(traj.rows() == 1001);
  CHECK(traj.states.row(0) == z0.transpose());
  double worst = 0.0;
  for (Eigen::Index i = 0; i <= 700; ++i) {
    const auto [x, v] = damped_oscillator(traj.time(i), p.m, p.k, p.d);
    worst = std::max({worst, std::abs(traj.states(i, 0) - x), std::abs(traj.states(i, 1) - v)});
  }
  // RK4 truncation over 700 steps is about 700 (w dt)^5 / 120 = 3.3e-8 here.
  CHECK(worst < 5e-8);

  // Halving dt cuts the error by close to 2^4.
  const auto fine = rollout(field, z0, {Scheme::RK4, 0.005}, 1400);
  double worst_fine = 0.0;
  for (Eigen::Index i = 0; i <= 1400; ++i) {
    const auto [x, v] = damped_oscillator(fine.time(i), p.m, p.k, p.d);
    worst_fine = std::max({worst_fine, std::abs(fine.states(i, 0) - x), std::abs(fine.states(i, 1) - v)});
  }
  CHECK(worst / worst_fine > 14.0);
  CHECK(worst / worst_fine < 18.0);

  // Peaks of |x| over successive half periods do not grow.
  const double half_period = std::numbers::pi / std::sqrt(p.k / p.m);
  const auto per = static_cast<Eigen::Index>(half_period / 0.01);
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index start = 0; start + per < traj.rows(); start += per) {
    const double peak = traj.states.col(0).segment(start, per).cwiseAbs().maxCoeff();
    CHECK(peak <= previous + 1e-12);
    previous = peak;
  }
}

TEST_CASE("undamped smsd conserves energy") {
  const dynamics::SmsdParams p{10.0, 50.0, 0.0};
  const auto field = wrap_second_order(AccelFn([&p](const VectorXd& q, const VectorXd& v) -> VectorXd {
    return VectorXd::Constant(1, dynamics::smsd_accel(q[0], v[0], p));
  }));
  VectorXd z0(2);
  z0 << 1.0, 0.0;
  const auto traj = rollout(field, z0, {Scheme::RK4, 0.01}, 1000);
  const double e0 = dynamics::smsd_energy(1.0, 0.0, p);
  for (Eigen::Index i = 0; i < traj.rows(); ++i)
    CHECK(std::abs(dynamics::smsd_energy(traj.states(i, 0), traj.states(i, 1), p) - e0) / e0 < 1e-6);
}

TEST_CASE("undamped tmsd conserves energy") {
  dynamics::TmsdParams p;
  p.d = {0.0, 0.0, 0.0};
  const auto field = wrap_second_order(AccelFn([&p](const VectorXd& q, const VectorXd& v) -> VectorXd {
    return dynamics::tmsd_accel({q, v}, p);
  }));
  VectorXd z0(6);
  z0 << 0.1, 0.2, 0.3, 0.0, 0.0, 0.0;
  const auto traj = rollout(field, z0, {Scheme::RK4, 0.01}, 300);
  const double e0 = dynamics::tmsd_energy(dynamics::AugmentedState::from_stacked(z0), p);
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const auto st = dynamics::AugmentedState::from_stacked(traj.states.row(i).transpose());
    CHECK(std::abs(dynamics::tmsd_energy(st, p) - e0) / e0 < 1e-4);
  }
}

TEST_CASE("rollout bookkeeping") {
  VectorXd z0 = VectorXd::Ones(2);
  const auto one = rollout(exponential(), z0, {Scheme::RK4, 0.1}, 1);
  CHECK(one.rows() == 2);
  CHECK(one.states.row(1).transpose() == step(exponential(), z0, 0.0, {Scheme::RK4, 0.1}));
  const auto none = rollout(exponential(), z0, {Scheme::RK4, 0.1}, 0);
  CHECK(none.rows() == 1);

  const auto before = field_evaluation_count();
  rollout(exponential(), z0, {Scheme::RK4, 0.1}, 10);
  CHECK(field_evaluation_count() - before == 40);
  rollout(exponential(), z0, {Scheme::Midpoint, 0.1}, 10);
  CHECK(field_evaluation_count() - before == 60);
}

TEST_CASE("controlled rollout holds each input over one step") {
  const ControlledField f = [](double, const VectorXd&, const VectorXd& u) -> VectorXd { return u; };
  Eigen::MatrixXd u(3, 1);
  u << 1.0, -2.0, 4.0;
  const auto traj = rollout(f, VectorXd::Zero(1), {Scheme::RK4, 0.5}, u);
  REQUIRE(traj.rows() == 4);
  CHECK(traj.states(1, 0) == doctest::Approx(0.5));
  CHECK(traj.states(2, 0) == doctest::Approx(-0.5));
  CHECK(traj.states(3, 0) == doctest::Approx(1.5));
  REQUIRE(traj.inputs);
  CHECK((*traj.inputs)(3, 0) == 4.0);
}

TEST_CASE("constrained slider-crank rollout") {
  const dynamics::SliderCrankParams p;
  const auto initial = dynamics::slider_crank_reconstruct(0.0, 0.0, p);

  VectorXd q = initial.q, qdot = initial.qdot;
  CHECK(project_positions(q, p) == 0);
  CHECK((q - initial.q).cwiseAbs().maxCoeff() < 1e-12);
  project_velocities(q, qdot, p);
  CHECK((qdot - initial.qdot).cwiseAbs().maxCoeff() < 1e-12);

  const auto traj = rollout_constrained(initial, p, {Scheme::RK4, 0.01}, 4500);
  REQUIRE(traj.rows() == 4501);
  double phi = 0.0, theta3 = 0.0, velocity = 0.0;
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const VectorXd qi = traj.positions().row(i).transpose();
    const VectorXd vi = traj.velocities().row(i).transpose();
    phi = std::max(phi, dynamics::slider_crank::constraints(qi, p).cwiseAbs().maxCoeff());
    velocity = std::max(velocity, (dynamics::slider_crank::jacobian(qi, p) * vi).cwiseAbs().maxCoeff());
    theta3 = std::max(theta3, std::abs(qi[8]));
  }
  CHECK(phi <= 1e-6);
  CHECK(velocity <= 1e-6);
  CHECK(theta3 <= 1e-12);
  CHECK(traj.states.cwiseAbs().maxCoeff() < 100.0);
}

TEST_CASE("projection pulls a perturbed state back onto the manifold") {
  const dynamics::SliderCrankParams p;
  const auto st = dynamics::slider_crank_reconstruct(0.9, 0.4, p);
  VectorXd q = st.q + VectorXd::Constant(9, 1e-3);
  VectorXd qdot = st.qdot + VectorXd::Constant(9, 1e-2);
  CHECK(project_positions(q, p) > 0);
  CHECK(dynamics::slider_crank::constraints(q, p).cwiseAbs().maxCoeff() <= 1e-8);
  project_velocities(q, qdot, p);
  CHECK((dynamics::slider_crank::jacobian(q, p) * qdot).cwiseAbs().maxCoeff() <= 1e-12);
}
