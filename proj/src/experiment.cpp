#include "fnode/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fnode/errors.hpp"
#include "fnode/mpc.hpp"

namespace fnode::experiment {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd initial_vector(const io::RunConfig& c) {
  return Eigen::Map<const VectorXd>(c.initial_state.data(), static_cast<Eigen::Index>(c.initial_state.size()));
}

template <typename Accel>
void attach_accels(Trajectory& traj, Accel accel) {
  const Eigen::Index nz = traj.n_z();
  MatrixXd a(traj.rows(), nz);
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const VectorXd z = traj.states.row(i).transpose();
    a.row(i) = accel(dynamics::AugmentedState{z.head(nz), z.tail(nz)}, i).transpose();
  }
  traj.accels = std::move(a);
}

Trajectory generate_double_pendulum(const io::RunConfig& c, const dynamics::DoublePendulumParams& p) {
  const VectorXd s = initial_vector(c);
  const Eigen::Vector2d mom = dynamics::dp_momenta_from_velocities(s[0], s[1], s[2], s[3], p);
  VectorXd h0(4);
  h0 << s[0], s[1], mom[0], mom[1];
  const integrate::VectorField field = [&p](double, const VectorXd& z) -> VectorXd {
    return dynamics::double_pendulum_rhs(Eigen::Vector4d(z), p);
  };
  const Trajectory ham = integrate::rollout(field, h0, c.integrator, static_cast<std::size_t>(c.total_steps()));
  Trajectory traj = ham;
  for (Eigen::Index i = 0; i < ham.rows(); ++i) {
    const auto r = ham.states.row(i);
    const Eigen::Vector2d w = dynamics::dp_velocities_from_momenta(r[0], r[1], r[2], r[3], p);
    traj.states(i, 2) = w[0];
    traj.states(i, 3) = w[1];
  }
  attach_accels(traj, [&p](const dynamics::AugmentedState& st, Eigen::Index) -> VectorXd {
    return dynamics::double_pendulum_accel(st, p);
  });
  return traj;
}

integrate::ControlledField cartpole_field(const dynamics::CartPoleParams& p) {
  return [p](double, const VectorXd& s, const VectorXd& u) -> VectorXd {
    const Eigen::Vector2d a = dynamics::cartpole_accel(Eigen::Vector4d(s), u[0], p);
    VectorXd ds(4);
    ds << s[2], s[3], a[0], a[1];
    return ds;
  };
}

void attach_cartpole_accels(Trajectory& traj, const dynamics::CartPoleParams& p) {
  const MatrixXd& u = *traj.inputs;
  attach_accels(traj, [&](const dynamics::AugmentedState& st, Eigen::Index i) -> VectorXd {
    return dynamics::cartpole_accel(Eigen::Vector4d(st.stacked()), u(i, 0), p);
  });
}

}  // namespace

Trajectory generate(const io::RunConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.total_steps());
  const VectorXd z0 = initial_vector(config);

  switch (config.benchmark) {
    case io::Benchmark::Smsd: {
      const auto& p = std::get<dynamics::SmsdParams>(config.params);
      const auto field = integrate::wrap_second_order(
          integrate::AccelFn([&p](const VectorXd& q, const VectorXd& v) -> VectorXd {
            return VectorXd::Constant(1, dynamics::smsd_accel(q[0], v[0], p));
          }));
      Trajectory traj = integrate::rollout(field, z0, config.integrator, n);
      attach_accels(traj, [&p](const dynamics::AugmentedState& st, Eigen::Index) -> VectorXd {
        return VectorXd::Constant(1, dynamics::smsd_accel(st.q[0], st.qdot[0], p));
      });
      return traj;
    }
    case io::Benchmark::Tmsd: {
      const auto& p = std::get<dynamics::TmsdParams>(config.params);
      const auto field = integrate::wrap_second_order(
          integrate::AccelFn([&p](const VectorXd& q, const VectorXd& v) -> VectorXd {
            return dynamics::tmsd_accel({q, v}, p);
          }));
      Trajectory traj = integrate::rollout(field, z0, config.integrator, n);
      attach_accels(traj, [&p](const dynamics::AugmentedState& st, Eigen::Index) -> VectorXd {
        return dynamics::tmsd_accel(st, p);
      });
      return traj;
    }
    case io::Benchmark::DoublePendulum:
      return generate_double_pendulum(config, std::get<dynamics::DoublePendulumParams>(config.params));
    case io::Benchmark::SliderCrank: {
      const auto& p = std::get<dynamics::SliderCrankParams>(config.params);
      const auto initial = dynamics::slider_crank_reconstruct(z0[0], z0[1], p);
      Trajectory traj = integrate::rollout_constrained(initial, p, config.integrator, n);
      attach_accels(traj, [&p](const dynamics::AugmentedState& st, Eigen::Index) -> VectorXd {
        return dynamics::slider_crank_rhs(st.q, st.qdot, p).qddot;
      });
      return traj;
    }
    case io::Benchmark::CartPole: {
      const auto& p = std::get<dynamics::CartPoleParams>(config.params);
      Trajectory traj = integrate::rollout(cartpole_field(p), z0, config.integrator, MatrixXd::Zero(n, 1));
      attach_cartpole_accels(traj, p);
      return traj;
    }
  }
  throw InvalidInput("unknown benchmark");
}

std::vector<Trajectory> cartpole_episodes(const io::RunConfig& config) {
  config.validate();
  if (config.benchmark != io::Benchmark::CartPole) throw InvalidInput("episodes exist for the cart-pole only");
  const auto& p = std::get<dynamics::CartPoleParams>(config.params);

  mpc::MpcConfig lq = config.mpc;
  lq.dt = config.integrator.dt;
  const MatrixXd K =
      mpc::riccati_gains(mpc::discretize(mpc::linearize_analytic(p), lq.dt), lq).front();

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(1.0, 6.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector4d spread(0.6, 3.0, 2.0, 3.0);
  const auto field = cartpole_field(p);
  const auto steps = static_cast<Eigen::Index>(config.episode_steps);

  std::vector<Trajectory> episodes;
  int attempts = 0;
  while (static_cast<int>(episodes.size()) < config.episodes) {
    if (++attempts > 100 * config.episodes) throw InstabilityError("could not generate stable episodes", 0);
    Eigen::Vector4d z;
    for (int i = 0; i < 4; ++i) z[i] = spread[i] * unit(rng);
    double w[3], phi[3];
    for (int i = 0; i < 3; ++i) {
      w[i] = freq(rng);
      phi[i] = phase(rng);
    }

    Trajectory ep;
    ep.dt = config.integrator.dt;
    ep.states.resize(steps + 1, 4);
    MatrixXd u(steps + 1, 1);
    bool stable = true;
    for (Eigen::Index k = 0; k <= steps; ++k) {
      ep.states.row(k) = z.transpose();
      const double t = ep.time(k);
      double uk = -(K * VectorXd(z))(0);
      if (lq.u_max) uk = std::clamp(uk, -*lq.u_max, *lq.u_max);
      for (int i = 0; i < 3; ++i) uk += config.excitation * std::sin(w[i] * t + phi[i]);
      u(k, 0) = uk;
      if (k == steps) break;
      z = integrate::step([&](double tt, const VectorXd& s) { return field(tt, s, VectorXd::Constant(1, uk)); },
                          VectorXd(z), t, config.integrator, static_cast<std::size_t>(k));
      if (std::abs(z[0]) > std::numbers::pi / 2.0) {
        stable = false;
        break;
      }
    }
    if (!stable) continue;
    ep.inputs = std::move(u);
    attach_cartpole_accels(ep, p);
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<int> model_coords(const io::RunConfig& config, Eigen::Index n_z) {
  if (config.benchmark == io::Benchmark::SliderCrank) return {2};
  std::vector<int> all(static_cast<std::size_t>(n_z));
  for (int i = 0; i < static_cast<int>(n_z); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

Trajectory select_coords(const Trajectory& traj, const std::vector<int>& coords) {
  const Eigen::Index nz = traj.n_z();
  if (coords.empty()) throw InvalidInput("no coordinates selected");
  for (int c : coords)
    if (c < 0 || c >= nz) throw InvalidInput("coordinate index " + std::to_string(c) + " out of range");
  const auto m = static_cast<Eigen::Index>(coords.size());
  Trajectory out;
  out.t0 = traj.t0;
  out.dt = traj.dt;
  out.states.resize(traj.rows(), 2 * m);
  if (traj.accels) out.accels = MatrixXd(traj.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int c = coords[static_cast<std::size_t>(j)];
    out.states.col(j) = traj.states.col(c);
    out.states.col(m + j) = traj.states.col(nz + c);
    if (traj.accels) out.accels->col(j) = traj.accels->col(c);
  }
  out.inputs = traj.inputs;
  return out;
}

model::Dataset make_dataset(const io::RunConfig& config, const Trajectory& truth,
                            const std::vector<Trajectory>& episodes) {
  const Eigen::Index rows = std::min<Eigen::Index>(config.train_steps, truth.rows());
  model::Dataset base;
  if (config.benchmark == io::Benchmark::SliderCrank)
    base = model::build_minimal_dataset(truth, model_coords(config, truth.n_z()), config.diff, rows);
  else
    base = model::build_dataset(truth, config.diff, rows);
  if (episodes.empty()) return base;
  std::vector<model::Dataset> parts{base};
  for (const auto& ep : episodes) parts.push_back(model::build_dataset(ep, config.diff));
  return model::concatenate(parts);
}

Trajectory predict(const io::RunConfig& config, const model::TrainedModel& model, const Trajectory& truth) {
  const Trajectory reduced = select_coords(truth, model_coords(config, truth.n_z()));
  if (reduced.n_z() != model.n_z)
    throw InvalidInput("model predicts " + std::to_string(model.n_z) + " coordinates, trajectory has " +
                       std::to_string(reduced.n_z()));
  const integrate::Integrator integ{config.integrator.scheme, truth.dt};
  const VectorXd z0 = reduced.states.row(0).transpose();
  Trajectory pred;
  if (model.n_u > 0) {
    if (!truth.inputs || truth.inputs->cols() != model.n_u)
      throw InvalidInput("model expects " + std::to_string(model.n_u) + " input columns");
    pred = model::rollout_learned(model, z0, integ, truth.inputs->topRows(truth.rows() - 1));
  } else {
    pred = model::rollout_learned(model, z0, integ, static_cast<std::size_t>(truth.rows() - 1));
  }
  pred.t0 = truth.t0;
  if (config.benchmark == io::Benchmark::SliderCrank)
    return reconstruct_slider_crank(pred, std::get<dynamics::SliderCrankParams>(config.params));
  return pred;
}

Trajectory reconstruct_slider_crank(const Trajectory& minimal, const dynamics::SliderCrankParams& p) {
  if (minimal.n_z() != 1) throw InvalidInput("expected (theta1, theta1dot) rows");
  Trajectory full;
  full.t0 = minimal.t0;
  full.dt = minimal.dt;
  full.states.resize(minimal.rows(), 18);
  for (Eigen::Index i = 0; i < minimal.rows(); ++i) {
    const auto st = dynamics::slider_crank_reconstruct(minimal.states(i, 0), minimal.states(i, 1), p);
    full.states.row(i) = st.stacked().transpose();
  }
  return full;
}

}  // namespace fnode::experiment
