#include "fnode/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fnode/diffest.hpp"
#include "fnode/dynamics.hpp"
#include "fnode/net.hpp"

namespace fnode::verify {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double interior_max_error(const VectorXd& estimate, const VectorXd& exact) {
  const Eigen::Index n = exact.size();
  const Eigen::Index lo = n / 5;
  const Eigen::Index hi = n - n / 5;
  return (estimate.segment(lo, hi - lo) - exact.segment(lo, hi - lo)).cwiseAbs().maxCoeff();
}

}  // namespace

double integrator_order(integrate::Scheme scheme) {
  const integrate::VectorField field = [](double, const VectorXd& z) -> VectorXd { return z; };
  std::vector<double> log_dt, log_err;
  for (int k = 0; k < 4; ++k) {  // dt = 0.1, 0.05, 0.025, 0.0125
    const int n = 10 << k;
    const integrate::Integrator integ{scheme, 1.0 / n};
    const auto traj = integrate::rollout(field, VectorXd::Ones(1), integ, static_cast<std::size_t>(n));
    log_dt.push_back(std::log(integ.dt));
    log_err.push_back(std::log(std::abs(traj.states(n, 0) - std::numbers::e)));
  }
  const double mx = std::accumulate(log_dt.begin(), log_dt.end(), 0.0) / static_cast<double>(log_dt.size());
  const double my = std::accumulate(log_err.begin(), log_err.end(), 0.0) / static_cast<double>(log_err.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < log_dt.size(); ++i) {
    sxy += (log_dt[i] - mx) * (log_err[i] - my);
    sxx += (log_dt[i] - mx) * (log_dt[i] - mx);
  }
  return sxy / sxx;
}

double gradient_check_error(unsigned long long seed) {
  net::Mlp mlp = net::init_mlp({2, 16, 16, 1}, net::Activation::Tanh, net::Init::Xavier, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal;
  MatrixXd x(2, 8), y(1, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);

  const VectorXd g = net::flatten(net::loss_and_grad(mlp, x, y).grad);
  const VectorXd theta = net::flatten(mlp.layers);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    net::Mlp mp = mlp, mm = mlp;
    net::unflatten(mp.layers, tp);
    net::unflatten(mm.layers, tm);
    const double fd = (net::loss(mp, x, y) - net::loss(mm, x, y)) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return worst;
}

double SpectralReport::gibbs_ratio() const { return naive_ramp_error / std::max(ramp_error, 1e-15); }

SpectralReport spectral_accuracy() {
  const int n = 512;
  const double length = 1.0;
  const double dt = length / n;
  VectorXd sine(n), dsine(n), ramp(n), dramp(n);
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    sine[i] = std::sin(2.0 * std::numbers::pi * t / length);
    dsine[i] = 2.0 * std::numbers::pi / length * std::cos(2.0 * std::numbers::pi * t / length);
    ramp[i] = 3.0 * t - 0.5;
    dramp[i] = 3.0;
  }
  SpectralReport r;
  r.sine_error = interior_max_error(diffest::spectral_derivative(sine, dt), dsine);
  r.ramp_error = interior_max_error(diffest::spectral_derivative(ramp, dt), dramp);
  r.naive_ramp_error = interior_max_error(diffest::naive_spectral_derivative(ramp, dt), dramp);
  return r;
}

double energy_drift(int steps) {
  const dynamics::DoublePendulumParams p;
  const double th1 = 3.0 * std::numbers::pi / 7.0, th2 = 3.0 * std::numbers::pi / 4.0;
  VectorXd h0(4);
  h0 << th1, th2, 0.0, 0.0;
  const integrate::VectorField field = [&p](double, const VectorXd& z) -> VectorXd {
    return dynamics::double_pendulum_rhs(Eigen::Vector4d(z), p);
  };
  const auto traj = integrate::rollout(field, h0, {integrate::Scheme::RK4, 0.01}, static_cast<std::size_t>(steps));
  auto energy = [&p](const Eigen::RowVectorXd& r) {
    const Eigen::Vector2d w = dynamics::dp_velocities_from_momenta(r[0], r[1], r[2], r[3], p);
    return dynamics::double_pendulum_energy({Eigen::Vector2d(r[0], r[1]), w}, p);
  };
  const double e0 = energy(traj.states.row(0));
  double drift = 0.0;
  for (Eigen::Index i = 1; i < traj.rows(); ++i)
    drift = std::max(drift, std::abs(energy(traj.states.row(i)) - e0) / std::abs(e0));
  return drift;
}

double constraint_residual(int steps) {
  const dynamics::SliderCrankParams p;
  const auto initial = dynamics::slider_crank_reconstruct(0.0, 0.0, p);
  const auto traj =
      integrate::rollout_constrained(initial, p, {integrate::Scheme::RK4, 0.01}, static_cast<std::size_t>(steps));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const VectorXd q = traj.positions().row(i).transpose();
    worst = std::max(worst, dynamics::slider_crank::constraints(q, p).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<SuiteResult> run_all() {
  std::vector<SuiteResult> out;
  const double rk4 = integrator_order(integrate::Scheme::RK4);
  out.push_back({"integrator order (rk4)", rk4, "in [3.8, 4.2]", std::abs(rk4 - 4.0) <= 0.2});
  const double mid = integrator_order(integrate::Scheme::Midpoint);
  out.push_back({"integrator order (midpoint)", mid, "in [1.8, 2.2]", std::abs(mid - 2.0) <= 0.2});
  const double grad = gradient_check_error();
  out.push_back({"gradient check", grad, "< 1e-5", grad < 1e-5});
  const auto spec = spectral_accuracy();
  out.push_back({"spectral accuracy (sine)", spec.sine_error, "< 1e-2", spec.sine_error < 1e-2});
  out.push_back({"spectral accuracy (ramp)", spec.ramp_error, "< 1e-6", spec.ramp_error < 1e-6});
  out.push_back({"gibbs mitigation ratio", spec.gibbs_ratio(), ">= 5", spec.gibbs_ratio() >= 5.0});
  const double phi = constraint_residual();
  out.push_back({"constraint residual", phi, "<= 1e-6", phi <= 1e-6});
  const double drift = energy_drift();
  out.push_back({"energy drift", drift, "< 1e-4", drift < 1e-4});
  return out;
}

}  // namespace fnode::verify
