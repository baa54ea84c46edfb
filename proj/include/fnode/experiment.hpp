#pragma once

// Benchmark-level glue: ground-truth simulation, datasets in the coordinates
// each model is trained on, and learned rollouts comparable to the truth.

#include <optional>
#include <vector>

#include "fnode/fnode.hpp"
#include "fnode/io.hpp"

namespace fnode::experiment {

using integrate::Trajectory;

/// Simulated reference run of total_steps() steps from the configured
/// initial state, with analytic accelerations attached. The slider-crank
/// trajectory carries all nine body coordinates; the cart-pole run is
/// unforced and carries a zero input column.
Trajectory generate(const io::RunConfig& config);

/// Control-excited cart-pole episodes: stabilizing LQ feedback (clamped to
/// u_max) plus a sum of three random sinusoids, each episode from a random
/// near-upright state.
std::vector<Trajectory> cartpole_episodes(const io::RunConfig& config);

/// Generalized coordinates the learned model sees (crank angle only for the
/// slider-crank, every coordinate otherwise).
std::vector<int> model_coords(const io::RunConfig& config, Eigen::Index n_z);

/// Restricts a trajectory to the given generalized coordinates.
Trajectory select_coords(const Trajectory& traj, const std::vector<int>& coords);

/// Training set from the first train_steps rows of `truth`, plus any extra
/// episodes (cart-pole in excited mode).
model::Dataset make_dataset(const io::RunConfig& config, const Trajectory& truth,
                            const std::vector<Trajectory>& episodes = {});

/// Learned rollout over the same horizon as `truth`, started from its first
/// row (in model coordinates) and driven by its inputs when it has any.
/// Slider-crank predictions are expanded back to all nine coordinates.
Trajectory predict(const io::RunConfig& config, const model::TrainedModel& model,
                   const Trajectory& truth);

/// Full slider-crank trajectory rebuilt from (theta1, theta1dot) rows.
Trajectory reconstruct_slider_crank(const Trajectory& minimal, const dynamics::SliderCrankParams& p);

}  // namespace fnode::experiment
