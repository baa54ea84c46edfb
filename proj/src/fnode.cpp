#include "fnode/fnode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fnode/errors.hpp"

namespace fnode::model {

namespace {

constexpr double kMinScale = 1e-12;

void require_same_shape(const Trajectory& a, const Trajectory& b) {
  if (a.states.rows() != b.states.rows() || a.states.cols() != b.states.cols())
    throw InvalidInput("trajectories differ in shape: " + std::to_string(a.states.rows()) + "x" +
                       std::to_string(a.states.cols()) + " vs " +
                       std::to_string(b.states.rows()) + "x" + std::to_string(b.states.cols()));
}

Eigen::Index resolve_rows(const Trajectory& traj, std::optional<Eigen::Index> rows) {
  const Eigen::Index n = rows.value_or(traj.rows());
  if (n < 2 || n > traj.rows())
    throw InvalidInput("requested " + std::to_string(n) + " rows from a trajectory of " +
                       std::to_string(traj.rows()));
  return n;
}

MatrixXd gather_columns(const MatrixXd& m, const std::vector<Eigen::Index>& idx,
                        std::size_t begin, std::size_t end) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = m.col(idx[i]);
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (inputs.rows() == 0) throw InvalidInput("dataset is empty");
  if (inputs.rows() != targets.rows()) throw InvalidInput("input and target row counts differ");
  if (targets.cols() != n_z || inputs.cols() != 2 * n_z + n_u)
    throw InvalidInput("dataset column layout does not match n_z/n_u");
  if (!inputs.allFinite() || !targets.allFinite()) throw InvalidInput("dataset has non-finite entries");
}

net::Standardization compute_standardization(const MatrixXd& inputs, const MatrixXd& targets) {
  auto column_stats = [](const MatrixXd& m, VectorXd& mean, VectorXd& scale) {
    const double n = static_cast<double>(m.rows());
    mean = m.colwise().mean().transpose();
    scale.resize(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double var = (m.col(c).array() - mean[c]).square().sum() / n;
      const double sd = std::sqrt(var);
      scale[c] = sd > kMinScale * std::max(1.0, std::abs(mean[c])) ? sd : 1.0;
    }
  };
  net::Standardization s;
  column_stats(inputs, s.input_mean, s.input_std);
  column_stats(targets, s.target_mean, s.target_std);
  return s;
}

Dataset build_dataset(const Trajectory& traj, const diffest::DiffConfig& diff,
                      std::optional<Eigen::Index> rows) {
  traj.validate();
  const Eigen::Index n = resolve_rows(traj, rows);
  const Trajectory part = traj.slice(0, n);
  Dataset d;
  d.n_z = static_cast<int>(traj.n_z());
  d.n_u = traj.inputs ? static_cast<int>(traj.inputs->cols()) : 0;
  d.targets = diffest::accel_targets(part, diff);
  d.inputs.resize(n, 2 * d.n_z + d.n_u);
  d.inputs.leftCols(2 * d.n_z) = part.states;
  if (d.n_u) d.inputs.rightCols(d.n_u) = *part.inputs;
  d.stats = compute_standardization(d.inputs, d.targets);
  return d;
}

Dataset build_minimal_dataset(const Trajectory& traj, const std::vector<int>& coords,
                              const diffest::DiffConfig& diff, std::optional<Eigen::Index> rows) {
  traj.validate();
  if (coords.empty()) throw InvalidInput("minimal coordinate list is empty");
  const Eigen::Index nz = traj.n_z();
  Trajectory reduced;
  reduced.t0 = traj.t0;
  reduced.dt = traj.dt;
  const Eigen::Index m = static_cast<Eigen::Index>(coords.size());
  reduced.states.resize(traj.rows(), 2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int c = coords[static_cast<std::size_t>(i)];
    if (c < 0 || c >= nz) throw InvalidInput("minimal coordinate index out of range");
    reduced.states.col(i) = traj.states.col(c);
    reduced.states.col(m + i) = traj.states.col(nz + c);
  }
  return build_dataset(reduced, diff, rows);
}

Dataset concatenate(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw InvalidInput("nothing to concatenate");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.n_z != parts[0].n_z || p.n_u != parts[0].n_u)
      throw InvalidInput("datasets have different layouts");
    total += p.size();
  }
  Dataset d;
  d.n_z = parts[0].n_z;
  d.n_u = parts[0].n_u;
  d.inputs.resize(total, parts[0].inputs.cols());
  d.targets.resize(total, parts[0].targets.cols());
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    d.inputs.middleRows(off, p.size()) = p.inputs;
    d.targets.middleRows(off, p.size()) = p.targets;
    off += p.size();
  }
  d.stats = compute_standardization(d.inputs, d.targets);
  return d;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be at least 1");
  if (width < 1) throw InvalidInput("width must be at least 1");
  if (depth < 1) throw InvalidInput("depth must be at least 1");
  if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidInput("decay must lie in (0, 1]");
  if (decay_every < 1) throw InvalidInput("decay_every must be at least 1");
  if (batch_size < 0) throw InvalidInput("batch size must be non-negative");
  if (min_lr < 0.0) throw InvalidInput("min_lr must be non-negative");
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  data.validate();
  config.validate();
  data.stats.validate();

  // Standardized, column-per-sample copies of the data.
  const MatrixXd x = ((data.inputs.rowwise() - data.stats.input_mean.transpose()).array().rowwise() /
                      data.stats.input_std.transpose().array())
                         .matrix()
                         .transpose();
  const MatrixXd y = ((data.targets.rowwise() - data.stats.target_mean.transpose()).array().rowwise() /
                      data.stats.target_std.transpose().array())
                         .matrix()
                         .transpose();

  std::vector<int> dims{static_cast<int>(x.rows())};
  for (int i = 0; i < config.depth; ++i) dims.push_back(config.width);
  dims.push_back(static_cast<int>(y.rows()));

  TrainResult result;
  result.model.mlp = net::init_mlp(dims, config.activation, config.init, config.seed);
  result.model.stats = data.stats;
  result.model.n_z = data.n_z;
  result.model.n_u = data.n_u;
  net::Mlp& mlp = result.model.mlp;

  result.initial_loss = net::loss(mlp, x, y);
  net::AdamState adam = net::AdamState::for_model(mlp, config.lr, config.decay);

  const std::size_t n = static_cast<std::size_t>(x.cols());
  const std::size_t batch =
      config.batch_size > 0 ? std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n) : n;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const int stage = epoch / config.decay_every;
    if (config.min_lr > 0.0 && net::decay_lr(adam, stage) < config.min_lr) break;
    if (batch < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      net::LossAndGrad lg;
      if (batch == n) {
        lg = net::loss_and_grad(mlp, x, y);
      } else {
        lg = net::loss_and_grad(mlp, gather_columns(x, order, start, end),
                                gather_columns(y, order, start, end));
      }
      if (!std::isfinite(lg.loss))
        throw DivergenceError("training loss became non-finite", static_cast<std::size_t>(epoch));
      net::adam_step(mlp, lg.grad, adam, stage);
      epoch_loss += lg.loss;
      ++batches;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(batches));
  }
  result.final_loss = net::loss(mlp, x, y);
  if (!std::isfinite(result.final_loss))
    throw DivergenceError("training loss became non-finite", result.loss_history.size());
  return result;
}

TrainResult train_minimal(const Dataset& data, const TrainConfig& config) {
  if (data.n_u != 0) throw InvalidInput("minimal-coordinate datasets carry no inputs");
  return train(data, config);
}

namespace {

VectorXd model_input(const TrainedModel& model, const VectorXd& z, const VectorXd& u) {
  if (z.size() != 2 * model.n_z || u.size() != model.n_u)
    throw InvalidInput("model expects state width " + std::to_string(2 * model.n_z) +
                       " and input width " + std::to_string(model.n_u));
  VectorXd in(model.input_width());
  in << z, u;
  return in;
}

}  // namespace

VectorXd predict_accel(const TrainedModel& model, const VectorXd& z, const VectorXd& u) {
  const VectorXd in = model_input(model, z, u);
  return model.stats.destandardize_target(net::forward(model.mlp, model.stats.standardize_input(in)));
}

MatrixXd accel_jacobian(const TrainedModel& model, const VectorXd& z, const VectorXd& u) {
  const VectorXd in = model_input(model, z, u);
  const MatrixXd j = net::input_jacobian(model.mlp, model.stats.standardize_input(in));
  return model.stats.target_std.asDiagonal() * j *
         model.stats.input_std.cwiseInverse().asDiagonal();
}

Trajectory rollout_learned(const TrainedModel& model, const VectorXd& z0,
                           const integrate::Integrator& integrator, std::size_t n_steps) {
  if (model.n_u != 0) throw InvalidInput("model expects control inputs");
  if (z0.size() != 2 * model.n_z) throw InvalidInput("initial state width does not match the model");
  const auto field = integrate::wrap_second_order(
      integrate::AccelFn([&model](const VectorXd& q, const VectorXd& qdot) -> VectorXd {
        VectorXd z(q.size() + qdot.size());
        z << q, qdot;
        return predict_accel(model, z);
      }));
  return integrate::rollout(field, z0, integrator, n_steps);
}

Trajectory rollout_learned(const TrainedModel& model, const VectorXd& z0,
                           const integrate::Integrator& integrator, const MatrixXd& inputs) {
  if (inputs.cols() != model.n_u) throw InvalidInput("input width does not match the model");
  if (z0.size() != 2 * model.n_z) throw InvalidInput("initial state width does not match the model");
  const auto field = integrate::wrap_second_order(integrate::ControlledAccelFn(
      [&model](const VectorXd& q, const VectorXd& qdot, const VectorXd& u) -> VectorXd {
        VectorXd z(q.size() + qdot.size());
        z << q, qdot;
        return predict_accel(model, z, u);
      }));
  return integrate::rollout(field, z0, integrator, inputs);
}

double evaluate_mse(const Trajectory& predicted, const Trajectory& truth) {
  require_same_shape(predicted, truth);
  if (predicted.states.size() == 0) throw InvalidInput("empty trajectories");
  return (predicted.states - truth.states).squaredNorm() / static_cast<double>(predicted.states.size());
}

WindowedMse windowed_mse(const Trajectory& predicted, const Trajectory& truth,
                         Eigen::Index train_rows) {
  require_same_shape(predicted, truth);
  if (train_rows < 0 || train_rows > predicted.rows()) throw InvalidInput("train window out of range");
  const MatrixXd diff = predicted.states - truth.states;
  const double width = static_cast<double>(diff.cols());
  WindowedMse w;
  w.total = diff.squaredNorm() / static_cast<double>(diff.size());
  if (train_rows > 0) w.train = diff.topRows(train_rows).squaredNorm() / (width * static_cast<double>(train_rows));
  const Eigen::Index test_rows = diff.rows() - train_rows;
  if (test_rows > 0) w.test = diff.bottomRows(test_rows).squaredNorm() / (width * static_cast<double>(test_rows));
  return w;
}

ErrorGrowthReport error_growth(const Trajectory& predicted, const Trajectory& truth) {
  require_same_shape(predicted, truth);
  ErrorGrowthReport r;
  r.error = predicted.states - truth.states;
  r.max_norm = r.error.cwiseAbs().rowwise().maxCoeff();
  r.l2_norm = r.error.rowwise().norm();
  return r;
}

void save_model(std::ostream& out, const TrainedModel& model) {
  net::write_checkpoint(out, model.mlp, &model.stats);
}

TrainedModel load_model(std::istream& in) {
  net::Checkpoint ck = net::read_checkpoint(in);
  if (!ck.stats) throw ParseError("checkpoint has no standardization block", 0);
  TrainedModel m;
  m.mlp = std::move(ck.mlp);
  m.stats = std::move(*ck.stats);
  m.n_z = m.mlp.output_dim();
  m.n_u = m.mlp.input_dim() - 2 * m.n_z;
  if (m.n_u < 0) throw ParseError("checkpoint input width is smaller than twice its output width", 0);
  return m;
}

}  // namespace fnode::model
