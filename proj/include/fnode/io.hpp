#pragma once

// Trajectory CSV files and flat `key = value` run configurations.
//
// Trajectory header: t,q0..q{n-1},v0..v{n-1}[,a0..a{n-1}][,u0..u{m-1}]

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fnode/diffest.hpp"
#include "fnode/dynamics.hpp"
#include "fnode/fnode.hpp"
#include "fnode/integrate.hpp"
#include "fnode/mpc.hpp"

namespace fnode::io {

void write_trajectory(std::ostream& out, const integrate::Trajectory& traj);
void write_trajectory(const integrate::Trajectory& traj, const std::filesystem::path& path);

/// Throws ParseError (with line number) on a missing or malformed header,
/// ragged rows, malformed numbers or a non-uniform time column.
integrate::Trajectory read_trajectory(std::istream& in);
integrate::Trajectory read_trajectory(const std::filesystem::path& path);

/// Plain two-column-or-wider CSV with a header, used for loss histories and metrics.
void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

// ---------------------------------------------------------------------------

enum class Benchmark { Smsd, Tmsd, DoublePendulum, SliderCrank, CartPole };

std::string to_string(Benchmark b);
/// Throws ConfigError for unknown names.
Benchmark benchmark_from_string(const std::string& name);

struct RunConfig {
  Benchmark benchmark = Benchmark::Smsd;
  dynamics::SystemParams params;
  /// (q, qdot) of the ground-truth run. Slider-crank: (theta1, theta1dot).
  std::vector<double> initial_state;
  int train_steps = 0;
  int test_steps = 0;
  integrate::Integrator integrator;
  diffest::DiffConfig diff;
  model::TrainConfig train;
  std::uint64_t seed = 0;

  // Cart-pole control task.
  mpc::MpcConfig mpc;
  int mpc_steps = 500;
  std::vector<double> mpc_initial_state;
  std::string data_mode = "free";  // free | excited
  int episodes = 8;
  int episode_steps = 300;
  double excitation = 2.0;  // N, amplitude of each excitation sinusoid

  int total_steps() const { return train_steps + test_steps; }
  void validate() const;
};

/// Embedded defaults for each benchmark.
RunConfig preset(Benchmark b);

/// Parses `key = value` lines (`#` starts a comment). Unknown, duplicate,
/// malformed or benchmark-inapplicable keys raise ConfigError naming the key.
RunConfig parse_config(std::istream& in);
RunConfig parse_config(const std::filesystem::path& path);

/// All keys accepted for a benchmark, in a stable order.
std::vector<std::string> config_keys(Benchmark b);

/// Canonical text for a configuration; parse_config(write_config(c)) == c.
void write_config(std::ostream& out, const RunConfig& config);

}  // namespace fnode::io
