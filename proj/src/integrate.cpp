#include "fnode/integrate.hpp"

#include <atomic>
#include <cmath>
#include <utility>

#include "fnode/errors.hpp"

namespace fnode::integrate {

namespace {

std::atomic<std::uint64_t> g_field_evaluations{0};

VectorXd evaluate(const VectorField& f, double t, const VectorXd& z, std::size_t step_index) {
  g_field_evaluations.fetch_add(1, std::memory_order_relaxed);
  VectorXd k = f(t, z);
  if (k.size() != z.size()) throw InvalidInput("vector field changed the state dimension");
  if (!k.allFinite()) throw DivergenceError("non-finite stage value", step_index);
  return k;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::RK4: return "rk4";
    case Scheme::Midpoint: return "midpoint";
    case Scheme::Euler: return "euler";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "rk4") return Scheme::RK4;
  if (name == "midpoint") return Scheme::Midpoint;
  if (name == "euler") return Scheme::Euler;
  throw InvalidInput("unknown integrator '" + name + "'");
}

int Integrator::stages() const {
  switch (scheme) {
    case Scheme::RK4: return 4;
    case Scheme::Midpoint: return 2;
    case Scheme::Euler: return 1;
  }
  return 0;
}

void Integrator::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("integrator dt must be positive");
}

std::uint64_t field_evaluation_count() {
  return g_field_evaluations.load(std::memory_order_relaxed);
}

Trajectory Trajectory::slice(Eigen::Index begin, Eigen::Index count) const {
  if (begin < 0 || count < 0 || begin + count > rows())
    throw InvalidInput("trajectory slice out of range");
  Trajectory out;
  out.t0 = time(begin);
  out.dt = dt;
  out.states = states.middleRows(begin, count);
  if (accels) out.accels = accels->middleRows(begin, count);
  if (inputs) out.inputs = inputs->middleRows(begin, count);
  return out;
}

void Trajectory::validate() const {
  if (states.rows() < 2) throw InvalidInput("trajectory needs at least two rows");
  if (states.cols() == 0 || states.cols() % 2 != 0)
    throw InvalidInput("trajectory state width must be even and non-zero");
  if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0))
    throw InvalidInput("trajectory time grid is invalid");
  if (!states.allFinite()) throw InvalidInput("trajectory contains non-finite states");
  if (accels) {
    if (accels->rows() != rows() || accels->cols() != n_z())
      throw InvalidInput("acceleration block has the wrong shape");
    if (!accels->allFinite()) throw InvalidInput("trajectory contains non-finite accelerations");
  }
  if (inputs) {
    if (inputs->rows() != rows() || inputs->cols() == 0)
      throw InvalidInput("input block has the wrong shape");
    if (!inputs->allFinite()) throw InvalidInput("trajectory contains non-finite inputs");
  }
}

VectorXd step(const VectorField& f, const VectorXd& z, double t, const Integrator& integrator,
              std::size_t step_index) {
  const double h = integrator.dt;
  VectorXd next;
  switch (integrator.scheme) {
    case Scheme::Euler: {
      next = z + h * evaluate(f, t, z, step_index);
      break;
    }
    case Scheme::Midpoint: {
      const VectorXd k1 = evaluate(f, t, z, step_index);
      const VectorXd k2 = evaluate(f, t + 0.5 * h, z + 0.5 * h * k1, step_index);
      next = z + h * k2;
      break;
    }
    case Scheme::RK4: {
      const VectorXd k1 = evaluate(f, t, z, step_index);
      const VectorXd k2 = evaluate(f, t + 0.5 * h, z + 0.5 * h * k1, step_index);
      const VectorXd k3 = evaluate(f, t + 0.5 * h, z + 0.5 * h * k2, step_index);
      const VectorXd k4 = evaluate(f, t + h, z + h * k3, step_index);
      next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      break;
    }
  }
  if (!next.allFinite()) throw DivergenceError("non-finite state after step", step_index);
  return next;
}

VectorField wrap_second_order(AccelFn accel) {
  return [accel = std::move(accel)](double, const VectorXd& z) -> VectorXd {
    if (z.size() == 0 || z.size() % 2 != 0)
      throw InvalidInput("second-order state must have even length");
    const Eigen::Index n = z.size() / 2;
    const VectorXd a = accel(z.head(n), z.tail(n));
    if (a.size() != n) throw InvalidInput("acceleration has the wrong dimension");
    VectorXd dz(2 * n);
    dz << z.tail(n), a;
    return dz;
  };
}

ControlledField wrap_second_order(ControlledAccelFn accel) {
  return [accel = std::move(accel)](double, const VectorXd& z, const VectorXd& u) -> VectorXd {
    if (z.size() == 0 || z.size() % 2 != 0)
      throw InvalidInput("second-order state must have even length");
    const Eigen::Index n = z.size() / 2;
    const VectorXd a = accel(z.head(n), z.tail(n), u);
    if (a.size() != n) throw InvalidInput("acceleration has the wrong dimension");
    VectorXd dz(2 * n);
    dz << z.tail(n), a;
    return dz;
  };
}

Trajectory rollout(const VectorField& field, const VectorXd& z0, const Integrator& integrator,
                   std::size_t n_steps, double t0) {
  integrator.validate();
  if (!z0.allFinite()) throw InvalidInput("initial state is not finite");
  Trajectory traj;
  traj.t0 = t0;
  traj.dt = integrator.dt;
  traj.states.resize(static_cast<Eigen::Index>(n_steps) + 1, z0.size());
  traj.states.row(0) = z0.transpose();
  VectorXd z = z0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    z = step(field, z, traj.time(static_cast<Eigen::Index>(k)), integrator, k);
    traj.states.row(static_cast<Eigen::Index>(k) + 1) = z.transpose();
  }
  return traj;
}

Trajectory rollout(const ControlledField& field, const VectorXd& z0, const Integrator& integrator,
                   const MatrixXd& inputs, double t0) {
  integrator.validate();
  if (!z0.allFinite()) throw InvalidInput("initial state is not finite");
  const Eigen::Index n_steps = inputs.rows();
  Trajectory traj;
  traj.t0 = t0;
  traj.dt = integrator.dt;
  traj.states.resize(n_steps + 1, z0.size());
  traj.states.row(0) = z0.transpose();
  MatrixXd stored(n_steps + 1, inputs.cols());
  if (n_steps > 0) {
    stored.topRows(n_steps) = inputs;
    stored.row(n_steps) = inputs.row(n_steps - 1);
  } else {
    stored.setZero();
  }
  traj.inputs = std::move(stored);
  VectorXd z = z0;
  for (Eigen::Index k = 0; k < n_steps; ++k) {
    const VectorXd u = inputs.row(k).transpose();
    const VectorField held = [&field, &u](double t, const VectorXd& s) { return field(t, s, u); };
    z = step(held, z, traj.time(k), integrator, static_cast<std::size_t>(k));
    traj.states.row(k + 1) = z.transpose();
  }
  return traj;
}

// ---------------------------------------------------------------------------

int project_positions(VectorXd& q, const dynamics::SliderCrankParams& p,
                      const ProjectionOptions& opt) {
  namespace sc = dynamics::slider_crank;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const Eigen::Matrix<double, 8, 1> phi = sc::constraints(q, p);
    if (phi.lpNorm<Eigen::Infinity>() <= opt.tolerance) return it;
    if (it == opt.max_iterations) break;
    const Eigen::Matrix<double, 8, 9> j = sc::jacobian(q, p);
    const Eigen::Matrix<double, 8, 8> jjt = j * j.transpose();
    q -= j.transpose() * jjt.ldlt().solve(phi);
  }
  return -1;
}

void project_velocities(const VectorXd& q, VectorXd& qdot, const dynamics::SliderCrankParams& p) {
  const Eigen::Matrix<double, 8, 9> j = dynamics::slider_crank::jacobian(q, p);
  const Eigen::Matrix<double, 8, 8> jjt = j * j.transpose();
  qdot -= j.transpose() * jjt.ldlt().solve(j * qdot);
}

Trajectory rollout_constrained(const dynamics::AugmentedState& initial,
                               const dynamics::SliderCrankParams& p,
                               const Integrator& integrator, std::size_t n_steps,
                               const ProjectionOptions& opt) {
  integrator.validate();
  initial.validate();
  if (initial.dim() != dynamics::slider_crank::kCoords)
    throw InvalidInput("slider-crank state must have 9 coordinates");

  const VectorField field = wrap_second_order(
      [&p](const VectorXd& q, const VectorXd& qdot) -> VectorXd {
        return dynamics::slider_crank_rhs(q, qdot, p).qddot;
      });

  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt = integrator.dt;
  traj.states.resize(static_cast<Eigen::Index>(n_steps) + 1, 18);
  traj.states.row(0) = initial.stacked().transpose();
  VectorXd z = initial.stacked();
  for (std::size_t k = 0; k < n_steps; ++k) {
    z = step(field, z, traj.time(static_cast<Eigen::Index>(k)), integrator, k);
    VectorXd q = z.head(9);
    VectorXd qdot = z.tail(9);
    if (project_positions(q, p, opt) < 0)
      throw DriftError("position projection did not converge", k + 1);
    project_velocities(q, qdot, p);
    z << q, qdot;
    traj.states.row(static_cast<Eigen::Index>(k) + 1) = z.transpose();
  }
  return traj;
}

}  // namespace fnode::integrate
