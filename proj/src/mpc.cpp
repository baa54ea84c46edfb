#include "fnode/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fnode/errors.hpp"

namespace fnode::mpc {

void MpcConfig::validate() const {
  if (horizon < 1) throw InvalidInput("horizon must be at least 1");
  if (Q.rows() != Q.cols() || R.rows() != R.cols() || Q.rows() == 0 || R.rows() == 0)
    throw InvalidInput("Q and R must be square");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  const Eigen::SelfAdjointEigenSolver<MatrixXd> qe(0.5 * (Q + Q.transpose()));
  if (qe.eigenvalues().minCoeff() < -1e-12) throw InvalidInput("Q must be positive semidefinite");
  const Eigen::SelfAdjointEigenSolver<MatrixXd> re(0.5 * (R + R.transpose()));
  if (re.eigenvalues().minCoeff() <= 0.0) throw InvalidInput("R must be positive definite");
  if (u_max && !(*u_max > 0.0)) throw InvalidInput("u_max must be positive");
}

LinearModel linearize_analytic(const dynamics::CartPoleParams& p) {
  p.validate();
  LinearModel lm;
  lm.A = MatrixXd::Zero(4, 4);
  lm.A(0, 2) = 1.0;
  lm.A(1, 3) = 1.0;
  lm.A(2, 0) = p.g * (p.m + p.M) / (p.M * p.l);
  lm.A(3, 0) = -p.m * p.g / p.M;
  lm.B = MatrixXd::Zero(4, 1);
  lm.B(2, 0) = -1.0 / (p.M * p.l);
  lm.B(3, 0) = 1.0 / p.M;
  lm.state = VectorXd::Zero(4);
  lm.input = 0.0;
  return lm;
}

LinearModel linearize_analytic(const dynamics::CartPoleParams& p, const VectorXd& state, double input) {
  p.validate();
  if (state.size() != 4) throw InvalidInput("cart-pole state must have 4 entries");
  const double th = state[0], om = state[2];
  const double s = std::sin(th), c = std::cos(th);
  // M(theta) a = b(theta, omega, u); differentiate M a - b = 0.
  Eigen::Matrix2d mass;
  mass << p.m * p.l * p.l, p.m * p.l * c, p.m * p.l * c, p.M + p.m;
  const Eigen::Vector2d a = dynamics::cartpole_accel(Eigen::Vector4d(state), input, p);
  const Eigen::Vector2d db_dth(p.m * p.g * p.l * c, p.m * p.l * om * om * c);
  const Eigen::Vector2d dm_dth_a(-p.m * p.l * s * a[1], -p.m * p.l * s * a[0]);
  const Eigen::Vector2d db_dom(0.0, 2.0 * p.m * p.l * om * s);
  const Eigen::Vector2d db_du(0.0, 1.0);
  const auto lu = mass.partialPivLu();

  LinearModel lm;
  lm.A = MatrixXd::Zero(4, 4);
  lm.A(0, 2) = 1.0;
  lm.A(1, 3) = 1.0;
  lm.A.block(2, 0, 2, 1) = lu.solve(db_dth - dm_dth_a);
  lm.A.block(2, 2, 2, 1) = lu.solve(db_dom);
  lm.B = MatrixXd::Zero(4, 1);
  lm.B.block(2, 0, 2, 1) = lu.solve(db_du);
  lm.state = state;
  lm.input = input;
  return lm;
}

LinearModel linearize_model(const model::TrainedModel& m, const VectorXd& state, double input) {
  if (m.n_z != 2 || m.n_u != 1)
    throw InvalidInput("cart-pole controller model must map 4 states and 1 input to 2 accelerations");
  if (state.size() != 4) throw InvalidInput("cart-pole state must have 4 entries");
  const MatrixXd j = model::accel_jacobian(m, state, VectorXd::Constant(1, input));  // 2 x 5
  LinearModel lm;
  lm.A = MatrixXd::Zero(4, 4);
  lm.A(0, 2) = 1.0;
  lm.A(1, 3) = 1.0;
  lm.A.bottomRows(2) = j.leftCols(4);
  lm.B = MatrixXd::Zero(4, 1);
  lm.B.bottomRows(2) = j.rightCols(1);
  lm.state = state;
  lm.input = input;
  return lm;
}

DiscreteModel discretize(const MatrixXd& A, const MatrixXd& B, double dt) {
  if (!(dt >= 0.0)) throw InvalidInput("dt must be non-negative");
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw InvalidInput("A and B shapes disagree");
  return {MatrixXd::Identity(A.rows(), A.cols()) + A * dt, B * dt};
}

DiscreteModel discretize(const LinearModel& model, double dt) { return discretize(model.A, model.B, dt); }

std::vector<MatrixXd> riccati_gains(const DiscreteModel& model, const MpcConfig& config) {
  config.validate();
  const MatrixXd& A = model.A;
  const MatrixXd& B = model.B;
  if (A.rows() != config.Q.rows() || B.cols() != config.R.rows() || B.rows() != A.rows())
    throw InvalidInput("model dimensions do not match Q and R");

  std::vector<MatrixXd> gains(static_cast<std::size_t>(config.horizon));
  MatrixXd P = config.Q;
  for (int k = config.horizon - 1; k >= 0; --k) {
    const MatrixXd S = config.R + B.transpose() * P * B;
    const Eigen::LDLT<MatrixXd> ldlt(S);
    const double scale = S.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(scale, 1.0))
      throw ConditioningError("Riccati step " + std::to_string(k) + " is numerically singular");
    MatrixXd K = ldlt.solve(B.transpose() * P * A);
    P = config.Q + A.transpose() * P * (A - B * K);
    P = 0.5 * (P + P.transpose());
    gains[static_cast<std::size_t>(k)] = std::move(K);
  }
  return gains;
}

MatrixXd solve_horizon(const DiscreteModel& model, const MpcConfig& config, const VectorXd& z0) {
  if (z0.size() != model.A.rows()) throw InvalidInput("initial state dimension mismatch");
  const auto gains = riccati_gains(model, config);
  MatrixXd u(config.horizon, model.B.cols());
  VectorXd z = z0;
  for (int k = 0; k < config.horizon; ++k) {
    const VectorXd uk = -gains[static_cast<std::size_t>(k)] * z;
    u.row(k) = uk.transpose();
    z = model.A * z + model.B * uk;
  }
  return u;
}

integrate::Trajectory closed_loop(const dynamics::CartPoleParams& plant, const Controller& controller,
                                  const MpcConfig& config, const Eigen::Vector4d& z0, std::size_t steps,
                                  integrate::Scheme plant_scheme) {
  plant.validate();
  config.validate();
  if (controller.kind == ControllerKind::Learned && controller.learned == nullptr)
    throw InvalidInput("learned controller has no model");

  const bool analytic = controller.kind == ControllerKind::Analytic;
  auto linearize = [&](const VectorXd& z, double u) {
    return analytic ? linearize_analytic(controller.analytic_params, z, u) : linearize_model(*controller.learned, z, u);
  };
  std::optional<MatrixXd> fixed_gain;
  if (!controller.relinearize) {
    const LinearModel lm = analytic ? linearize_analytic(controller.analytic_params)
                                    : linearize_model(*controller.learned, VectorXd::Zero(4), 0.0);
    fixed_gain = riccati_gains(discretize(lm, config.dt), config).front();
  }

  const integrate::Integrator integ{plant_scheme, config.dt};
  integrate::Trajectory traj;
  traj.t0 = 0.0;
  traj.dt = config.dt;
  traj.states.resize(static_cast<Eigen::Index>(steps) + 1, 4);
  MatrixXd inputs(static_cast<Eigen::Index>(steps) + 1, 1);

  Eigen::Vector4d z = z0;
  double u_prev = 0.0;
  for (std::size_t k = 0;; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    traj.states.row(row) = z.transpose();
    double u = 0.0;
    if (fixed_gain) {
      u = -(*fixed_gain * VectorXd(z))(0);
    } else {
      const DiscreteModel dm = discretize(linearize(z, u_prev), config.dt);
      u = solve_horizon(dm, config, z)(0, 0);
    }
    if (config.u_max) u = std::clamp(u, -*config.u_max, *config.u_max);
    inputs(row, 0) = u;
    if (k == steps) break;

    const integrate::VectorField field = [&plant, u](double, const VectorXd& s) -> VectorXd {
      const Eigen::Vector2d a = dynamics::cartpole_accel(Eigen::Vector4d(s), u, plant);
      VectorXd ds(4);
      ds << s[2], s[3], a[0], a[1];
      return ds;
    };
    z = integrate::step(field, VectorXd(z), traj.time(row), integ, k);
    if (std::abs(z[0]) > std::numbers::pi / 2.0)
      throw InstabilityError("pole angle left [-pi/2, pi/2]", k + 1);
    u_prev = u;
  }
  traj.inputs = std::move(inputs);
  return traj;
}

}  // namespace fnode::mpc
