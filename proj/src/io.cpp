#include "fnode/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "fnode/errors.hpp"
#include "text.hpp"

namespace fnode::io {

using detail::format_double;

// ---------------------------------------------------------------------------
// Trajectories

void write_trajectory(std::ostream& out, const integrate::Trajectory& traj) {
  const Eigen::Index nz = traj.n_z();
  if (traj.states.cols() == 0 || traj.states.cols() % 2 != 0)
    throw InvalidInput("trajectory state width must be even and non-zero");
  out << 't';
  for (Eigen::Index i = 0; i < nz; ++i) out << ",q" << i;
  for (Eigen::Index i = 0; i < nz; ++i) out << ",v" << i;
  if (traj.accels)
    for (Eigen::Index i = 0; i < nz; ++i) out << ",a" << i;
  if (traj.inputs)
    for (Eigen::Index i = 0; i < traj.inputs->cols(); ++i) out << ",u" << i;
  out << '\n';
  for (Eigen::Index r = 0; r < traj.rows(); ++r) {
    out << format_double(traj.time(r));
    for (Eigen::Index c = 0; c < traj.states.cols(); ++c) out << ',' << format_double(traj.states(r, c));
    if (traj.accels)
      for (Eigen::Index c = 0; c < traj.accels->cols(); ++c) out << ',' << format_double((*traj.accels)(r, c));
    if (traj.inputs)
      for (Eigen::Index c = 0; c < traj.inputs->cols(); ++c) out << ',' << format_double((*traj.inputs)(r, c));
    out << '\n';
  }
}

void write_trajectory(const integrate::Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_trajectory(out, traj);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

namespace {

struct HeaderLayout {
  Eigen::Index nz = 0;
  bool accels = false;
  Eigen::Index nu = 0;
  std::size_t columns = 0;
};

// Counts a run of prefix0, prefix1, ... starting at `pos`.
Eigen::Index count_run(const std::vector<std::string_view>& cols, std::size_t& pos, char prefix) {
  Eigen::Index n = 0;
  while (pos < cols.size()) {
    const auto name = detail::trim(cols[pos]);
    if (name.empty() || name[0] != prefix) break;
    const auto idx = detail::parse_int(name.substr(1));
    if (!idx || *idx != n) break;
    ++n;
    ++pos;
  }
  return n;
}

HeaderLayout parse_header(const std::string& line) {
  const auto cols = detail::split(line, ',');
  if (cols.empty() || detail::trim(cols[0]) != "t") throw ParseError("header must start with 't'", 1);
  HeaderLayout h;
  std::size_t pos = 1;
  h.nz = count_run(cols, pos, 'q');
  if (h.nz == 0) throw ParseError("header has no position columns q0..", 1);
  if (count_run(cols, pos, 'v') != h.nz) throw ParseError("header velocity columns do not match q columns", 1);
  const std::size_t before_a = pos;
  const Eigen::Index na = count_run(cols, pos, 'a');
  if (na != 0 && na != h.nz) {
    pos = before_a;
    throw ParseError("header acceleration columns do not match q columns", 1);
  }
  h.accels = na == h.nz;
  h.nu = count_run(cols, pos, 'u');
  if (pos != cols.size())
    throw ParseError("unexpected header column '" + std::string(detail::trim(cols[pos])) + "'", 1);
  h.columns = cols.size();
  return h;
}

}  // namespace

integrate::Trajectory read_trajectory(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  // Skip nothing: the first line must be the header.
  if (!std::getline(in, line) || detail::trim(line).empty()) throw ParseError("no header", 1);
  ++lineno;
  const HeaderLayout h = parse_header(line);

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != h.columns)
      throw ParseError("expected " + std::to_string(h.columns) + " columns, found " +
                           std::to_string(fields.size()),
                       lineno);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto f : fields) {
      const auto v = detail::parse_double(f);
      if (!v || !std::isfinite(*v)) throw ParseError("malformed number '" + std::string(detail::trim(f)) + "'", lineno);
      row.push_back(*v);
    }
    if (!rows.empty() && !(row[0] > rows.back()[0]))
      throw ParseError("time column is not strictly increasing", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ParseError("trajectory needs at least two rows", lineno);

  const auto n = static_cast<Eigen::Index>(rows.size());
  integrate::Trajectory traj;
  traj.t0 = rows.front()[0];
  traj.dt = (rows.back()[0] - rows.front()[0]) / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double expected = traj.t0 + static_cast<double>(i) * traj.dt;
    const double t = rows[static_cast<std::size_t>(i)][0];
    if (std::abs(t - expected) > 1e-6 * traj.dt + 1e-12 * std::abs(t))
      throw ParseError("time column is not uniformly spaced", static_cast<std::size_t>(i) + 2);
  }
  traj.states.resize(n, 2 * h.nz);
  if (h.accels) traj.accels = Eigen::MatrixXd(n, h.nz);
  if (h.nu) traj.inputs = Eigen::MatrixXd(n, h.nu);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    std::size_t c = 1;
    for (Eigen::Index j = 0; j < 2 * h.nz; ++j) traj.states(i, j) = r[c++];
    if (h.accels)
      for (Eigen::Index j = 0; j < h.nz; ++j) (*traj.accels)(i, j) = r[c++];
    for (Eigen::Index j = 0; j < h.nu; ++j) (*traj.inputs)(i, j) = r[c++];
  }
  return traj;
}

integrate::Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return read_trajectory(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e);
  }
}

void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configuration

std::string to_string(Benchmark b) {
  switch (b) {
    case Benchmark::Smsd: return "smsd";
    case Benchmark::Tmsd: return "tmsd";
    case Benchmark::DoublePendulum: return "double_pendulum";
    case Benchmark::SliderCrank: return "slider_crank";
    case Benchmark::CartPole: return "cartpole";
  }
  return "?";
}

Benchmark benchmark_from_string(const std::string& name) {
  for (auto b : {Benchmark::Smsd, Benchmark::Tmsd, Benchmark::DoublePendulum, Benchmark::SliderCrank,
                 Benchmark::CartPole})
    if (to_string(b) == name) return b;
  throw ConfigError("benchmark", "unknown benchmark '" + name + "'");
}

RunConfig preset(Benchmark b) {
  constexpr double pi = std::numbers::pi;
  RunConfig c;
  c.benchmark = b;
  c.integrator = {integrate::Scheme::RK4, 0.01};
  c.train.lr = 1e-3;
  c.train.decay = 0.98;
  c.train.width = 256;
  c.train.activation = net::Activation::Tanh;
  c.train.init = net::Init::Xavier;
  c.mpc_initial_state = {pi / 6.0, 1.0, 0.0, 0.0};
  switch (b) {
    case Benchmark::Smsd:
      c.params = dynamics::SmsdParams{};
      c.initial_state = {1.0, 0.0};
      c.train_steps = 700;
      c.test_steps = 300;
      c.train.epochs = 500;
      c.train.depth = 2;
      c.train.batch_size = 32;
      break;
    case Benchmark::Tmsd:
      c.params = dynamics::TmsdParams{};
      c.initial_state = {1.0, 2.0, 3.0, 0.0, 0.0, 0.0};
      c.train_steps = 300;
      c.test_steps = 100;
      c.train.epochs = 5000;
      c.train.depth = 2;
      c.train.batch_size = 32;
      c.train.min_lr = 1e-9;
      break;
    case Benchmark::DoublePendulum:
      c.params = dynamics::DoublePendulumParams{};
      c.initial_state = {3.0 * pi / 7.0, 3.0 * pi / 4.0, 0.0, 0.0};
      c.train_steps = 300;
      c.test_steps = 100;
      c.train.epochs = 10000;
      c.train.depth = 3;
      c.train.decay = 0.7;
      c.train.decay_every = 1000;
      c.train.batch_size = 32;
      c.diff.sigma = 150.0;
      c.train.min_lr = 1e-9;
      break;
    case Benchmark::SliderCrank:
      c.params = dynamics::SliderCrankParams{};
      c.initial_state = {0.0, 0.0};
      c.train_steps = 1500;
      c.test_steps = 3000;
      c.train.epochs = 10000;
      c.train.depth = 3;
      c.train.batch_size = 32;
      c.train.min_lr = 1e-9;
      break;
    case Benchmark::CartPole:
      c.params = dynamics::CartPoleParams{};
      c.initial_state = {pi / 6.0, 1.0, 0.0, 0.0};
      c.integrator.scheme = integrate::Scheme::Midpoint;
      c.data_mode = "excited";
      c.episodes = 120;
      c.episode_steps = 60;
      c.excitation = 6.0;
      c.diff.sigma = 20.0;
      c.mpc.horizon = 100;
      c.mpc.R(0, 0) = 0.01;
      c.mpc.u_max = 20.0;
      c.train_steps = 200;
      c.test_steps = 50;
      c.train.epochs = 10000;
      c.train.depth = 3;
      c.train.batch_size = 32;
      c.train.min_lr = 1e-9;
      break;
  }
  return c;
}

namespace {

std::size_t state_width(const RunConfig& c) {
  switch (c.benchmark) {
    case Benchmark::Smsd: return 2;
    case Benchmark::Tmsd: return 6;
    case Benchmark::DoublePendulum: return 4;
    case Benchmark::SliderCrank: return 2;
    case Benchmark::CartPole: return 4;
  }
  return 0;
}

}  // namespace

void RunConfig::validate() const {
  if (train_steps < 2) throw ConfigError("train_steps", "must be at least 2");
  if (test_steps < 0) throw ConfigError("test_steps", "must be non-negative");
  if (!(integrator.dt > 0.0) || !std::isfinite(integrator.dt)) throw ConfigError("dt", "must be positive");
  if (initial_state.size() != state_width(*this))
    throw ConfigError("initial_state", "expected " + std::to_string(state_width(*this)) + " values");
  try {
    std::visit([](const auto& p) { p.validate(); }, params);
  } catch (const InvalidInput& e) {
    throw ConfigError("params", e.what());
  }
  try {
    diff.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("diff", e.what());
  }
  try {
    train.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("train", e.what());
  }
  if (benchmark == Benchmark::CartPole) {
    try {
      mpc.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError("mpc", e.what());
    }
    if (mpc_steps < 1) throw ConfigError("mpc_steps", "must be at least 1");
    if (mpc_initial_state.size() != 4) throw ConfigError("mpc_initial_state", "expected 4 values");
    if (data_mode != "free" && data_mode != "excited")
      throw ConfigError("data_mode", "expected 'free' or 'excited'");
    if (episodes < 1) throw ConfigError("episodes", "must be at least 1");
    if (episode_steps < 16) throw ConfigError("episode_steps", "must be at least 16");
    if (!(excitation >= 0.0)) throw ConfigError("excitation", "must be non-negative");
  }
}

namespace {

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& key, std::string_view v) {
  const auto d = detail::parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
  return *d;
}

long long to_int(const std::string& key, std::string_view v) {
  const auto i = detail::parse_int(v);
  if (!i) throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
  return *i;
}

std::vector<double> to_list(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (auto part : detail::split(v, ',')) out.push_back(to_double(key, part));
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

KeySpec number(const std::string& name, std::function<double&(RunConfig&)> ref) {
  return {name,
          [name, ref](RunConfig& c, std::string_view v) { ref(c) = to_double(name, v); },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

KeySpec integer(const std::string& name, std::function<int&(RunConfig&)> ref) {
  return {name,
          [name, ref](RunConfig& c, std::string_view v) {
            const long long i = to_int(name, v);
            if (i < INT32_MIN || i > INT32_MAX) throw ConfigError(name, "integer out of range");
            ref(c) = static_cast<int>(i);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

KeySpec optional_number(const std::string& name, std::function<std::optional<double>&(RunConfig&)> ref,
                        const char* none_word) {
  return {name,
          [name, ref, none_word](RunConfig& c, std::string_view v) {
            if (detail::trim(v) == none_word)
              ref(c).reset();
            else
              ref(c) = to_double(name, v);
          },
          [ref, none_word](const RunConfig& c) {
            const auto& o = ref(const_cast<RunConfig&>(c));
            return o ? format_double(*o) : std::string(none_word);
          }};
}

KeySpec optional_integer(const std::string& name, std::function<std::optional<int>&(RunConfig&)> ref) {
  return {name,
          [name, ref](RunConfig& c, std::string_view v) {
            if (detail::trim(v) == "auto") {
              ref(c).reset();
              return;
            }
            ref(c) = static_cast<int>(to_int(name, v));
          },
          [ref](const RunConfig& c) {
            const auto& o = ref(const_cast<RunConfig&>(c));
            return o ? std::to_string(*o) : std::string("auto");
          }};
}

template <typename P>
P& params_of(RunConfig& c) {
  return std::get<P>(c.params);
}

std::vector<KeySpec> key_specs(Benchmark b) {
  std::vector<KeySpec> keys;
  keys.push_back({"benchmark", [](RunConfig&, std::string_view) {},
                  [](const RunConfig& c) { return to_string(c.benchmark); }});
  keys.push_back({"seed",
                  [](RunConfig& c, std::string_view v) {
                    const long long s = to_int("seed", v);
                    if (s < 0) throw ConfigError("seed", "must be non-negative");
                    c.seed = static_cast<std::uint64_t>(s);
                  },
                  [](const RunConfig& c) { return std::to_string(c.seed); }});
  keys.push_back({"initial_state",
                  [](RunConfig& c, std::string_view v) { c.initial_state = to_list("initial_state", v); },
                  [](const RunConfig& c) { return list_text(c.initial_state); }});
  keys.push_back(integer("train_steps", [](RunConfig& c) -> int& { return c.train_steps; }));
  keys.push_back(integer("test_steps", [](RunConfig& c) -> int& { return c.test_steps; }));
  keys.push_back({"integrator",
                  [](RunConfig& c, std::string_view v) {
                    try {
                      c.integrator.scheme = integrate::scheme_from_string(std::string(detail::trim(v)));
                    } catch (const InvalidInput& e) {
                      throw ConfigError("integrator", e.what());
                    }
                  },
                  [](const RunConfig& c) { return integrate::to_string(c.integrator.scheme); }});
  keys.push_back(number("dt", [](RunConfig& c) -> double& { return c.integrator.dt; }));

  keys.push_back({"diff_method",
                  [](RunConfig& c, std::string_view v) {
                    const auto s = detail::trim(v);
                    if (s == "spectral_hybrid")
                      c.diff.method = diffest::Method::SpectralHybrid;
                    else if (s == "finite_difference")
                      c.diff.method = diffest::Method::FiniteDifference;
                    else
                      throw ConfigError("diff_method", "expected spectral_hybrid or finite_difference");
                  },
                  [](const RunConfig& c) {
                    return std::string(c.diff.method == diffest::Method::SpectralHybrid ? "spectral_hybrid"
                                                                                        : "finite_difference");
                  }});
  keys.push_back(number("alpha", [](RunConfig& c) -> double& { return c.diff.alpha; }));
  keys.push_back(optional_number("sigma", [](RunConfig& c) -> std::optional<double>& { return c.diff.sigma; }, "auto"));
  keys.push_back(optional_integer("mirror_len", [](RunConfig& c) -> std::optional<int>& { return c.diff.mirror_len; }));
  keys.push_back(optional_integer("boundary_margin",
                                  [](RunConfig& c) -> std::optional<int>& { return c.diff.boundary_margin; }));
  keys.push_back(integer("fd_order", [](RunConfig& c) -> int& { return c.diff.fd_order; }));

  keys.push_back(integer("epochs", [](RunConfig& c) -> int& { return c.train.epochs; }));
  keys.push_back(number("lr", [](RunConfig& c) -> double& { return c.train.lr; }));
  keys.push_back(number("lr_decay", [](RunConfig& c) -> double& { return c.train.decay; }));
  keys.push_back(integer("decay_every", [](RunConfig& c) -> int& { return c.train.decay_every; }));
  keys.push_back(number("min_lr", [](RunConfig& c) -> double& { return c.train.min_lr; }));
  keys.push_back(integer("width", [](RunConfig& c) -> int& { return c.train.width; }));
  keys.push_back(integer("depth", [](RunConfig& c) -> int& { return c.train.depth; }));
  keys.push_back(integer("batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }));
  keys.push_back({"activation",
                  [](RunConfig& c, std::string_view v) {
                    try {
                      c.train.activation = net::activation_from_string(std::string(detail::trim(v)));
                    } catch (const InvalidInput& e) {
                      throw ConfigError("activation", e.what());
                    }
                  },
                  [](const RunConfig& c) { return net::to_string(c.train.activation); }});
  keys.push_back({"init",
                  [](RunConfig& c, std::string_view v) {
                    try {
                      c.train.init = net::init_from_string(std::string(detail::trim(v)));
                    } catch (const InvalidInput& e) {
                      throw ConfigError("init", e.what());
                    }
                  },
                  [](const RunConfig& c) { return net::to_string(c.train.init); }});

  using namespace dynamics;
  switch (b) {
    case Benchmark::Smsd:
      keys.push_back(number("m", [](RunConfig& c) -> double& { return params_of<SmsdParams>(c).m; }));
      keys.push_back(number("k", [](RunConfig& c) -> double& { return params_of<SmsdParams>(c).k; }));
      keys.push_back(number("d", [](RunConfig& c) -> double& { return params_of<SmsdParams>(c).d; }));
      break;
    case Benchmark::Tmsd:
      for (int i = 0; i < 3; ++i) {
        const std::string s = std::to_string(i + 1);
        keys.push_back(number("m" + s, [i](RunConfig& c) -> double& { return params_of<TmsdParams>(c).m[i]; }));
        keys.push_back(number("k" + s, [i](RunConfig& c) -> double& { return params_of<TmsdParams>(c).k[i]; }));
        keys.push_back(number("d" + s, [i](RunConfig& c) -> double& { return params_of<TmsdParams>(c).d[i]; }));
      }
      break;
    case Benchmark::DoublePendulum:
      keys.push_back(number("m1", [](RunConfig& c) -> double& { return params_of<DoublePendulumParams>(c).m1; }));
      keys.push_back(number("m2", [](RunConfig& c) -> double& { return params_of<DoublePendulumParams>(c).m2; }));
      keys.push_back(number("l1", [](RunConfig& c) -> double& { return params_of<DoublePendulumParams>(c).l1; }));
      keys.push_back(number("l2", [](RunConfig& c) -> double& { return params_of<DoublePendulumParams>(c).l2; }));
      keys.push_back(number("g", [](RunConfig& c) -> double& { return params_of<DoublePendulumParams>(c).g; }));
      break;
    case Benchmark::SliderCrank: {
      for (int body = 1; body <= 3; ++body) {
        const std::string s = std::to_string(body);
        auto block = [body](RunConfig& c) -> Eigen::Vector3d& {
          auto& p = params_of<SliderCrankParams>(c);
          return body == 1 ? p.body1 : body == 2 ? p.body2 : p.body3;
        };
        keys.push_back({"body" + s + "_mass",
                        [block, s](RunConfig& c, std::string_view v) {
                          const double m = to_double("body" + s + "_mass", v);
                          block(c)[0] = m;
                          block(c)[1] = m;
                        },
                        [block](const RunConfig& c) { return format_double(block(const_cast<RunConfig&>(c))[0]); }});
        keys.push_back(number("body" + s + "_inertia", [block](RunConfig& c) -> double& { return block(c)[2]; }));
      }
      keys.push_back(number("r", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).r; }));
      keys.push_back(number("l", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).l; }));
      keys.push_back(number("k", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).k; }));
      keys.push_back(number("c01", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).c01; }));
      keys.push_back(number("c12", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).c12; }));
      keys.push_back(number("c23", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).c23; }));
      keys.push_back(number("c", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).c; }));
      keys.push_back(number("f", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).f; }));
      keys.push_back(number("tau", [](RunConfig& c) -> double& { return params_of<SliderCrankParams>(c).tau; }));
      keys.push_back(optional_number(
          "spring_rest", [](RunConfig& c) -> std::optional<double>& { return params_of<SliderCrankParams>(c).spring_rest; },
          "auto"));
      break;
    }
    case Benchmark::CartPole:
      keys.push_back(number("M", [](RunConfig& c) -> double& { return params_of<CartPoleParams>(c).M; }));
      keys.push_back(number("m", [](RunConfig& c) -> double& { return params_of<CartPoleParams>(c).m; }));
      keys.push_back(number("l", [](RunConfig& c) -> double& { return params_of<CartPoleParams>(c).l; }));
      keys.push_back(number("g", [](RunConfig& c) -> double& { return params_of<CartPoleParams>(c).g; }));
      keys.push_back(integer("horizon", [](RunConfig& c) -> int& { return c.mpc.horizon; }));
      keys.push_back({"q_weights",
                      [](RunConfig& c, std::string_view v) {
                        const auto w = to_list("q_weights", v);
                        if (w.size() != 4) throw ConfigError("q_weights", "expected 4 diagonal weights");
                        c.mpc.Q = Eigen::Vector4d(w[0], w[1], w[2], w[3]).asDiagonal();
                      },
                      [](const RunConfig& c) {
                        const Eigen::VectorXd d = c.mpc.Q.diagonal();
                        return list_text(std::vector<double>(d.data(), d.data() + d.size()));
                      }});
      keys.push_back(number("r_weight", [](RunConfig& c) -> double& { return c.mpc.R(0, 0); }));
      keys.push_back(optional_number("u_max", [](RunConfig& c) -> std::optional<double>& { return c.mpc.u_max; }, "none"));
      keys.push_back(integer("mpc_steps", [](RunConfig& c) -> int& { return c.mpc_steps; }));
      keys.push_back({"mpc_initial_state",
                      [](RunConfig& c, std::string_view v) { c.mpc_initial_state = to_list("mpc_initial_state", v); },
                      [](const RunConfig& c) { return list_text(c.mpc_initial_state); }});
      keys.push_back({"data_mode", [](RunConfig& c, std::string_view v) { c.data_mode = std::string(detail::trim(v)); },
                      [](const RunConfig& c) { return c.data_mode; }});
      keys.push_back(integer("episodes", [](RunConfig& c) -> int& { return c.episodes; }));
      keys.push_back(integer("episode_steps", [](RunConfig& c) -> int& { return c.episode_steps; }));
      keys.push_back(number("excitation", [](RunConfig& c) -> double& { return c.excitation; }));
      break;
  }
  return keys;
}

}  // namespace

std::vector<std::string> config_keys(Benchmark b) {
  std::vector<std::string> names;
  for (const auto& k : key_specs(b)) names.push_back(k.name);
  return names;
}

RunConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string value(detail::trim(s.substr(eq + 1)));
    if (key.empty()) throw ParseError("empty key", lineno);
    if (value.empty()) throw ConfigError(key, "empty value");
    if (seen.count(key)) throw ConfigError(key, "duplicate key (lines " + std::to_string(seen[key]) + " and " +
                                                    std::to_string(lineno) + ")");
    seen[key] = lineno;
    entries.emplace_back(key, value);
  }
  const auto bench = std::find_if(entries.begin(), entries.end(), [](const auto& e) { return e.first == "benchmark"; });
  if (bench == entries.end()) throw ConfigError("benchmark", "missing required key");

  RunConfig c = preset(benchmark_from_string(bench->second));
  const auto specs = key_specs(c.benchmark);
  for (const auto& [key, value] : entries) {
    const auto spec = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& k) { return k.name == key; });
    if (spec == specs.end())
      throw ConfigError(key, "unknown key for benchmark '" + to_string(c.benchmark) + "'");
    spec->set(c, value);
  }
  c.train.seed = c.seed;
  c.mpc.dt = c.integrator.dt;
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const auto& k : key_specs(config.benchmark)) out << k.name << " = " << k.get(config) << '\n';
}

}  // namespace fnode::io
