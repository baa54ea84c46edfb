#pragma once

// Fully connected network with hand-derived backpropagation and Adam.
//
// Batches are column-major: one sample per column, so a batch of B inputs is
// an (input_dim x B) matrix.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fnode::net {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Tanh, ReLU };
enum class Init { Xavier, Kaiming };

std::string to_string(Activation a);
std::string to_string(Init i);
Activation activation_from_string(const std::string& name);
Init init_from_string(const std::string& name);

struct Layer {
  MatrixXd weight;  // out x in
  VectorXd bias;    // out
};

/// Parameters and their gradients share this layout.
using Params = std::vector<Layer>;

struct Mlp {
  std::vector<int> dims;
  Activation activation = Activation::Tanh;
  Init init = Init::Xavier;
  Params layers;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  std::size_t parameter_count() const;
  void validate() const;
};

/// Per-column affine maps used to whiten inputs and targets.
struct Standardization {
  VectorXd input_mean, input_std;
  VectorXd target_mean, target_std;

  VectorXd standardize_input(const VectorXd& x) const;
  VectorXd destandardize_target(const VectorXd& y) const;
  void validate() const;
};

/// Xavier: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)). Kaiming: N(0, 2 / fan_in).
/// Biases start at zero. Requires at least one hidden layer.
Mlp init_mlp(const std::vector<int>& dims, Activation activation, Init init, std::uint64_t seed);

VectorXd forward(const Mlp& mlp, const VectorXd& input);
MatrixXd forward_batch(const Mlp& mlp, const MatrixXd& inputs);

struct LossAndGrad {
  double loss = 0.0;
  Params grad;
};

/// loss = (1/B) sum_i ||f(x_i) - y_i||^2 and its gradient.
LossAndGrad loss_and_grad(const Mlp& mlp, const MatrixXd& inputs, const MatrixXd& targets);
double loss(const Mlp& mlp, const MatrixXd& inputs, const MatrixXd& targets);

/// d f / d x at `input` (output_dim x input_dim), by reverse accumulation.
MatrixXd input_jacobian(const Mlp& mlp, const VectorXd& input);

struct AdamState {
  Params m;
  Params v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double base_lr = 1e-3;
  double decay = 0.98;

  static AdamState for_model(const Mlp& mlp, double base_lr, double decay);
};

double decay_lr(const AdamState& state, int epoch);

/// Bias-corrected Adam update at learning rate decay_lr(state, epoch).
void adam_step(Mlp& mlp, const Params& grad, AdamState& state, int epoch);

VectorXd flatten(const Params& params);
void unflatten(Params& params, const VectorXd& flat);

void write_checkpoint(std::ostream& out, const Mlp& mlp, const Standardization* stats = nullptr);

struct Checkpoint {
  Mlp mlp;
  std::optional<Standardization> stats;
};
/// Throws ParseError on malformed content.
Checkpoint read_checkpoint(std::istream& in);

}  // namespace fnode::net
