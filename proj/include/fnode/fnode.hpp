#pragma once

// Acceleration-supervised training of second-order neural ODEs and their use
// at inference time. Training only ever evaluates the network on
// (state, acceleration) pairs; the integrator is used for rollouts alone.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fnode/diffest.hpp"
#include "fnode/integrate.hpp"
#include "fnode/net.hpp"

namespace fnode::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using integrate::Trajectory;

struct Dataset {
  MatrixXd inputs;   // N x (2 n_z + n_u), rows (q, qdot[, u])
  MatrixXd targets;  // N x n_z
  net::Standardization stats;
  int n_z = 0;
  int n_u = 0;

  Eigen::Index size() const { return inputs.rows(); }
  void validate() const;
};

/// Per-column mean and population standard deviation. Columns with
/// (near-)zero spread get unit scale so constant inputs pass through.
net::Standardization compute_standardization(const MatrixXd& inputs, const MatrixXd& targets);

/// Pairs each of the first `rows` states (all rows by default) with its
/// acceleration target. Targets are computed from those rows only. When the
/// trajectory carries inputs they are appended to each row.
Dataset build_dataset(const Trajectory& traj, const diffest::DiffConfig& diff,
                      std::optional<Eigen::Index> rows = std::nullopt);

/// Dataset over a subset of coordinates (for example the crank angle of a
/// one-DOF mechanism); `coords` indexes the generalized coordinates.
Dataset build_minimal_dataset(const Trajectory& traj, const std::vector<int>& coords,
                              const diffest::DiffConfig& diff,
                              std::optional<Eigen::Index> rows = std::nullopt);

/// Stacks datasets of identical layout and recomputes the statistics.
Dataset concatenate(const std::vector<Dataset>& parts);

struct TrainConfig {
  int epochs = 500;
  double lr = 1e-3;
  double decay = 0.98;
  int decay_every = 1;  // epochs per decay step
  int width = 256;
  int depth = 2;
  net::Activation activation = net::Activation::Tanh;
  net::Init init = net::Init::Xavier;
  std::uint64_t seed = 0;
  int batch_size = 0;   // 0: full batch
  double min_lr = 0.0;  // stop once the decayed rate falls below this; 0 disables

  void validate() const;
};

struct TrainedModel {
  net::Mlp mlp;
  net::Standardization stats;
  int n_z = 0;
  int n_u = 0;

  int input_width() const { return 2 * n_z + n_u; }
};

struct TrainResult {
  TrainedModel model;
  double initial_loss = 0.0;         // full-dataset loss before the first update
  std::vector<double> loss_history;  // mean mini-batch loss per epoch
  double final_loss = 0.0;           // full-dataset loss after training
};

/// Adam on the standardized mean-squared acceleration error with the learning
/// rate multiplied by `decay` every `decay_every` epochs. Throws
/// DivergenceError (epoch index) on a non-finite loss.
TrainResult train(const Dataset& data, const TrainConfig& config);

/// Same loop on a minimal-coordinate dataset (no inputs).
TrainResult train_minimal(const Dataset& data, const TrainConfig& config);

/// De-standardized network output for augmented state z (and input u).
VectorXd predict_accel(const TrainedModel& model, const VectorXd& z, const VectorXd& u = {});

/// d qddot / d (q, qdot, u) including the standardization maps.
MatrixXd accel_jacobian(const TrainedModel& model, const VectorXd& z, const VectorXd& u = {});

Trajectory rollout_learned(const TrainedModel& model, const VectorXd& z0,
                           const integrate::Integrator& integrator, std::size_t n_steps);
/// Zero-order hold of each input row over one step.
Trajectory rollout_learned(const TrainedModel& model, const VectorXd& z0,
                           const integrate::Integrator& integrator, const MatrixXd& inputs);

/// Mean over all rows and state columns of the squared difference.
double evaluate_mse(const Trajectory& predicted, const Trajectory& truth);

struct WindowedMse {
  double total = 0.0;
  double train = 0.0;  // rows [0, train_rows)
  double test = 0.0;   // rows [train_rows, N); 0 when empty
};
WindowedMse windowed_mse(const Trajectory& predicted, const Trajectory& truth,
                         Eigen::Index train_rows);

struct ErrorGrowthReport {
  MatrixXd error;     // E_n = predicted_n - truth_n
  VectorXd max_norm;  // ||E_n||_inf
  VectorXd l2_norm;   // ||E_n||_2
};
ErrorGrowthReport error_growth(const Trajectory& predicted, const Trajectory& truth);

void save_model(std::ostream& out, const TrainedModel& model);
/// n_z is taken from the output width and n_u from the remaining input width.
TrainedModel load_model(std::istream& in);

}  // namespace fnode::model
