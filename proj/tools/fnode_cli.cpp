// fnode: command-line driver for generating data, training, rolling out,
// evaluating, closed-loop control and self-verification.
//
// Exit codes: 0 success, 1 verify failure, 2 usage/config/input error,
// 3 numerical divergence or instability.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fnode/errors.hpp"
#include "fnode/experiment.hpp"
#include "fnode/io.hpp"
#include "fnode/mpc.hpp"
#include "fnode/verify.hpp"

namespace fs = std::filesystem;
using namespace fnode;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

fs::path output_dir() {
  if (const char* env = std::getenv("FNODE_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

fs::path default_path(const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  const fs::path dir = output_dir();
  fs::create_directories(dir);
  return dir / fallback;
}

io::RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  io::RunConfig c = io::parse_config(fs::path(path));
  if (seed) {
    c.seed = *seed;
    c.train.seed = *seed;
  } else {
    c.train.seed = c.seed;
  }
  c.mpc.dt = c.integrator.dt;
  return c;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

// ---------------------------------------------------------------------------

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string data;
  std::vector<std::string> episodes;
  std::string out;
  std::string loss;
  std::string checkpoint;
  std::string init;
  std::optional<int> steps;
  std::string pred;
  std::string truth;
  std::optional<int> train_rows;
  std::vector<int> coords;
  bool analytic = false;
  std::string linearization;  // upright | current; empty picks the controller default
};

int cmd_generate(const Options& o) {
  const auto c = load_config(o.config, o.seed);
  const auto traj = experiment::generate(c);
  const fs::path out = default_path(o.out, io::to_string(c.benchmark) + "_truth.csv");
  io::write_trajectory(traj, out);
  std::cout << "wrote " << traj.rows() << " rows to " << out.string() << '\n';
  if (c.benchmark == io::Benchmark::CartPole && c.data_mode == "excited") {
    const auto eps = experiment::cartpole_episodes(c);
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const fs::path p = sibling(out, "_ep" + std::to_string(k) + ".csv");
      io::write_trajectory(eps[k], p);
      std::cout << "wrote episode " << k << " to " << p.string() << '\n';
    }
  }
  return 0;
}

int cmd_targets(const Options& o) {
  const auto c = load_config(o.config, o.seed);
  const auto full = io::read_trajectory(fs::path(o.data));
  auto traj = experiment::select_coords(full, experiment::model_coords(c, full.n_z()));
  traj.accels = diffest::accel_targets(traj, c.diff);
  const fs::path out = default_path(o.out, io::to_string(c.benchmark) + "_targets.csv");
  io::write_trajectory(traj, out);
  std::cout << "wrote " << traj.rows() << " target rows to " << out.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = load_config(o.config, o.seed);
  const auto truth = io::read_trajectory(fs::path(o.data));
  std::vector<integrate::Trajectory> episodes;
  for (const auto& p : o.episodes) episodes.push_back(io::read_trajectory(fs::path(p)));
  if (episodes.empty() && c.benchmark == io::Benchmark::CartPole && c.data_mode == "excited")
    episodes = experiment::cartpole_episodes(c);

  const auto data = experiment::make_dataset(c, truth, episodes);
  const auto evals_before = integrate::field_evaluation_count();
  const auto result = model::train(data, c.train);
  const auto solver_calls = integrate::field_evaluation_count() - evals_before;

  const fs::path ckpt = default_path(o.checkpoint.empty() ? o.out : o.checkpoint,
                                     io::to_string(c.benchmark) + ".ckpt");
  {
    auto out = open_out(ckpt);
    model::save_model(out, result.model);
  }
  const fs::path loss_path = o.loss.empty() ? sibling(ckpt, "_loss.csv") : fs::path(o.loss);
  {
    std::vector<std::vector<double>> rows;
    for (std::size_t e = 0; e < result.loss_history.size(); ++e)
      rows.push_back({static_cast<double>(e), result.loss_history[e]});
    auto out = open_out(loss_path);
    io::write_table(out, {"epoch", "loss"}, rows);
  }
  std::cout << "samples          " << data.size() << '\n'
            << "epochs run       " << result.loss_history.size() << '\n'
            << "initial loss     " << result.initial_loss << '\n'
            << "final loss       " << result.final_loss << '\n'
            << "solver calls     " << solver_calls << '\n'
            << "checkpoint       " << ckpt.string() << '\n'
            << "loss history     " << loss_path.string() << '\n';
  return 0;
}

int cmd_rollout(const Options& o) {
  const auto c = load_config(o.config, o.seed);
  model::TrainedModel m;
  {
    std::ifstream in(o.checkpoint);
    if (!in) throw Error("cannot open checkpoint '" + o.checkpoint + "'");
    m = model::load_model(in);
  }
  auto init = io::read_trajectory(fs::path(o.init));
  if (o.steps) {
    const Eigen::Index rows = *o.steps + 1;
    if (*o.steps < 0) throw InvalidInput("--steps must be non-negative");
    if (rows <= init.rows()) {
      init = init.slice(0, rows);
    } else {
      if (init.inputs) throw InvalidInput("--steps exceeds the input rows of '" + o.init + "'");
      integrate::Trajectory padded;
      padded.t0 = init.t0;
      padded.dt = init.dt;
      padded.states = init.states.row(0).replicate(rows, 1);
      init = padded;
    }
  }
  integrate::Trajectory pred;
  try {
    pred = experiment::predict(c, m, init);
  } catch (const InvalidInput& e) {
    throw InvalidInput("checkpoint '" + o.checkpoint + "' does not fit '" + o.init + "': " + e.what());
  }
  const fs::path out = default_path(o.out, io::to_string(c.benchmark) + "_pred.csv");
  io::write_trajectory(pred, out);
  std::cout << "wrote " << pred.rows() << " predicted rows to " << out.string() << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  auto pred = io::read_trajectory(fs::path(o.pred));
  auto truth = io::read_trajectory(fs::path(o.truth));
  if (!o.coords.empty()) {
    pred = experiment::select_coords(pred, o.coords);
    truth = experiment::select_coords(truth, o.coords);
  }
  if (pred.states.rows() != truth.states.rows() || pred.states.cols() != truth.states.cols())
    throw InvalidInput("'" + o.pred + "' is " + std::to_string(pred.states.rows()) + "x" +
                       std::to_string(pred.states.cols()) + " but '" + o.truth + "' is " +
                       std::to_string(truth.states.rows()) + "x" + std::to_string(truth.states.cols()));
  Eigen::Index train_rows = truth.rows();
  if (o.train_rows) {
    train_rows = *o.train_rows;
  } else if (!o.config.empty()) {
    train_rows = load_config(o.config, o.seed).train_steps;
  }
  train_rows = std::clamp<Eigen::Index>(train_rows, 0, truth.rows());
  const auto w = model::windowed_mse(pred, truth, train_rows);

  std::cout << std::setprecision(6);
  std::cout << "window   rows            mse\n";
  std::cout << "total    " << std::setw(6) << truth.rows() << "  " << std::setw(14) << w.total << '\n';
  std::cout << "train    " << std::setw(6) << train_rows << "  " << std::setw(14) << w.train << '\n';
  std::cout << "test     " << std::setw(6) << truth.rows() - train_rows << "  " << std::setw(14) << w.test << '\n';
  std::cout << std::setprecision(17);
  std::cout << "mse_total,mse_train_window,mse_test_window\n";
  std::cout << w.total << ',' << w.train << ',' << w.test << '\n';
  return 0;
}

int cmd_mpc(const Options& o) {
  const auto c = load_config(o.config, o.seed);
  if (c.benchmark != io::Benchmark::CartPole) throw ConfigError("benchmark", "mpc needs the cartpole benchmark");
  const auto& plant = std::get<dynamics::CartPoleParams>(c.params);

  std::optional<model::TrainedModel> learned;
  mpc::Controller controller = mpc::Controller::analytic(plant, o.linearization == "current");
  if (!o.analytic) {
    std::ifstream in(o.checkpoint);
    if (!in) throw Error("cannot open checkpoint '" + o.checkpoint + "'");
    learned = model::load_model(in);
    controller = mpc::Controller::from_model(*learned, o.linearization != "upright");
  }
  const Eigen::Vector4d z0(c.mpc_initial_state[0], c.mpc_initial_state[1], c.mpc_initial_state[2],
                           c.mpc_initial_state[3]);
  const int steps = o.steps.value_or(c.mpc_steps);
  if (steps < 1) throw InvalidInput("--steps must be positive");
  const auto traj = mpc::closed_loop(plant, controller, c.mpc, z0, static_cast<std::size_t>(steps),
                                     c.integrator.scheme);

  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const auto s = traj.states.row(i);
    rows.push_back({traj.time(i), s[0], s[1], s[2], s[3], (*traj.inputs)(i, 0)});
  }
  const fs::path out = default_path(o.out, std::string("mpc_") + (o.analytic ? "analytic" : "learned") + ".csv");
  auto f = open_out(out);
  io::write_table(f, {"t", "theta", "x", "omega", "v", "u"}, rows);
  const auto last = traj.states.row(traj.rows() - 1);
  std::cout << "final theta " << last[0] << ", x " << last[1] << '\n'
            << "wrote " << traj.rows() << " rows to " << out.string() << '\n';
  return 0;
}

int cmd_verify() {
  bool ok = true;
  for (const auto& r : verify::run_all()) {
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(30) << r.name << std::right
              << std::setw(14) << std::setprecision(6) << r.value << "  (" << r.bound << ")\n";
    ok = ok && r.pass;
  }
  return ok ? 0 : kExitVerifyFailed;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const InstabilityError& e) {
    std::cerr << "instability at step " << e.step() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence at index " << e.index() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DriftError& e) {
    std::cerr << "constraint drift: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConditioningError& e) {
    std::cerr << "ill-conditioned: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SingularConfiguration& e) {
    std::cerr << "singular configuration: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceleration-supervised neural ODEs for multibody dynamics"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", o.config, "run configuration (.cfg)")->check(CLI::ExistingFile);
    if (required) opt->required();
    sub->add_option("--seed", seed, "override the configured seed");
  };

  auto* gen = app.add_subcommand("generate", "simulate the ground-truth trajectory");
  add_config(gen, true);
  gen->add_option("-o,--out", o.out, "output trajectory (.csv)");

  auto* tgt = app.add_subcommand("targets", "estimate acceleration targets from a trajectory");
  add_config(tgt, true);
  tgt->add_option("-d,--data", o.data, "trajectory (.csv)")->required()->check(CLI::ExistingFile);
  tgt->add_option("-o,--out", o.out, "output trajectory with a-columns");

  auto* trn = app.add_subcommand("train", "fit a model to acceleration targets");
  add_config(trn, true);
  trn->add_option("-d,--data", o.data, "ground-truth trajectory")->required()->check(CLI::ExistingFile);
  trn->add_option("--episode", o.episodes, "extra excited episodes")->check(CLI::ExistingFile);
  trn->add_option("-o,--out", o.out, "checkpoint (.ckpt)");
  trn->add_option("--loss", o.loss, "loss history (.csv)");

  auto* rol = app.add_subcommand("rollout", "integrate a trained model");
  add_config(rol, true);
  rol->add_option("-m,--checkpoint", o.checkpoint, "checkpoint (.ckpt)")->required()->check(CLI::ExistingFile);
  rol->add_option("-i,--init", o.init, "trajectory providing the initial state and inputs")
      ->required()
      ->check(CLI::ExistingFile);
  rol->add_option("-n,--steps", o.steps, "number of steps (default: rows of --init minus one)");
  rol->add_option("-o,--out", o.out, "predicted trajectory (.csv)");

  auto* evl = app.add_subcommand("eval", "compare a prediction with the truth");
  add_config(evl, false);
  evl->add_option("-p,--pred", o.pred, "predicted trajectory")->required()->check(CLI::ExistingFile);
  evl->add_option("-t,--truth", o.truth, "reference trajectory")->required()->check(CLI::ExistingFile);
  evl->add_option("--train-rows", o.train_rows, "rows in the training window (default: config train_steps)");
  evl->add_option("--coords", o.coords, "compare only these generalized coordinates")->delimiter(',');

  auto* ctl = app.add_subcommand("mpc", "closed-loop cart-pole control");
  add_config(ctl, true);
  auto* ck = ctl->add_option("-m,--checkpoint", o.checkpoint, "learned model (.ckpt)")->check(CLI::ExistingFile);
  auto* an = ctl->add_flag("--analytic", o.analytic, "use the analytic linearization");
  ck->excludes(an);
  an->excludes(ck);
  ctl->add_option("--linearization", o.linearization,
                  "upright: linearize once at the equilibrium; current: re-linearize every step "
                  "(default: upright for --analytic, current for a checkpoint)")
      ->check(CLI::IsMember({"upright", "current"}));
  ctl->add_option("-n,--steps", o.steps, "closed-loop steps (default: mpc_steps)");
  ctl->add_option("-o,--out", o.out, "output CSV (t,theta,x,omega,v,u)");

  auto* ver = app.add_subcommand("verify", "run the numerical property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  for (auto* sub : {gen, tgt, trn, rol, evl, ctl})
    if (sub->count("--seed")) o.seed = seed;

  if (ctl->parsed() && !o.analytic && o.checkpoint.empty()) {
    std::cerr << "mpc: pass --checkpoint or --analytic\n";
    return kExitUsage;
  }

  return guarded([&]() -> int {
    if (gen->parsed()) return cmd_generate(o);
    if (tgt->parsed()) return cmd_targets(o);
    if (trn->parsed()) return cmd_train(o);
    if (rol->parsed()) return cmd_rollout(o);
    if (evl->parsed()) return cmd_eval(o);
    if (ctl->parsed()) return cmd_mpc(o);
    if (ver->parsed()) return cmd_verify();
    return kExitUsage;
  });
}
