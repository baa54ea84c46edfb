#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "fnode/dynamics.hpp"

namespace fnode::integrate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Scheme { RK4, Midpoint, Euler };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct Integrator {
  Scheme scheme = Scheme::RK4;
  double dt = 0.01;

  int stages() const;
  void validate() const;
};

/// First-order field dz/dt = f(t, z).
using VectorField = std::function<VectorXd(double t, const VectorXd& z)>;
/// Field with an input held constant over each step.
using ControlledField = std::function<VectorXd(double t, const VectorXd& z, const VectorXd& u)>;
/// Second-order model: qddot = a(q, qdot).
using AccelFn = std::function<VectorXd(const VectorXd& q, const VectorXd& qdot)>;
using ControlledAccelFn =
    std::function<VectorXd(const VectorXd& q, const VectorXd& qdot, const VectorXd& u)>;

/// Uniformly sampled trajectory; each state row is (q, qdot).
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.01;
  MatrixXd states;                 // N x 2 n_z
  std::optional<MatrixXd> accels;  // N x n_z
  std::optional<MatrixXd> inputs;  // N x n_u; row i is held over [t_i, t_i+1)

  Eigen::Index rows() const { return states.rows(); }
  Eigen::Index n_z() const { return states.cols() / 2; }
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * dt; }
  auto positions() const { return states.leftCols(n_z()); }
  auto velocities() const { return states.rightCols(n_z()); }

  /// Rows [begin, begin + count) as a new trajectory starting at time(begin).
  Trajectory slice(Eigen::Index begin, Eigen::Index count) const;
  /// Enforces N >= 2, even width, dt > 0, finite entries and matching row counts.
  void validate() const;
};

/// Total number of vector-field evaluations performed by `step` in this process.
/// Used to verify that training never calls into the integrator.
std::uint64_t field_evaluation_count();

/// One explicit step. Throws DivergenceError carrying `step_index` when any stage
/// or the result is non-finite.
VectorXd step(const VectorField& f, const VectorXd& z, double t, const Integrator& integrator,
              std::size_t step_index = 0);

/// Lifts qddot = a(q, qdot) to the first-order field Zdot = (qdot, a(q, qdot)).
VectorField wrap_second_order(AccelFn accel);
ControlledField wrap_second_order(ControlledAccelFn accel);

Trajectory rollout(const VectorField& field, const VectorXd& z0, const Integrator& integrator,
                   std::size_t n_steps, double t0 = 0.0);

/// Zero-order hold: row k of `inputs` is applied over step k. The returned
/// trajectory stores the inputs with the last row repeated for the final state.
Trajectory rollout(const ControlledField& field, const VectorXd& z0, const Integrator& integrator,
                   const MatrixXd& inputs, double t0 = 0.0);

// ---------------------------------------------------------------------------
// Slider-crank ground truth with coordinate projection.

struct ProjectionOptions {
  double tolerance = 1e-8;
  int max_iterations = 20;
};

/// Gauss-Newton projection of q onto Phi(q) = 0. Returns the iteration count,
/// or -1 when the tolerance was not reached.
int project_positions(VectorXd& q, const dynamics::SliderCrankParams& p,
                      const ProjectionOptions& opt = {});
/// Minimum-norm correction onto Phi_q qdot = 0.
void project_velocities(const VectorXd& q, VectorXd& qdot, const dynamics::SliderCrankParams& p);

/// Integrates the index-3 slider-crank system, projecting positions and
/// velocities back onto the constraint manifold after every step.
/// Throws DriftError when position projection fails to converge.
Trajectory rollout_constrained(const dynamics::AugmentedState& initial,
                               const dynamics::SliderCrankParams& p,
                               const Integrator& integrator, std::size_t n_steps,
                               const ProjectionOptions& opt = {});

}  // namespace fnode::integrate
