#include "fnode/net.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "fnode/errors.hpp"
#include "text.hpp"

namespace fnode::net {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
std::string to_string(Init i) { return i == Init::Xavier ? "xavier" : "kaiming"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  throw InvalidInput("unknown activation '" + name + "'");
}

Init init_from_string(const std::string& name) {
  if (name == "xavier") return Init::Xavier;
  if (name == "kaiming") return Init::Kaiming;
  throw InvalidInput("unknown initialization '" + name + "'");
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Mlp::validate() const {
  if (dims.size() < 3) throw InvalidInput("network needs at least one hidden layer");
  for (int d : dims)
    if (d < 1) throw InvalidInput("layer sizes must be positive");
  if (layers.size() != dims.size() - 1) throw InvalidInput("layer count does not match dims");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != dims[i + 1] || layers[i].weight.cols() != dims[i] ||
        layers[i].bias.size() != dims[i + 1])
      throw InvalidInput("layer " + std::to_string(i) + " shape does not match dims");
    if (!layers[i].weight.allFinite() || !layers[i].bias.allFinite())
      throw InvalidInput("layer " + std::to_string(i) + " has non-finite parameters");
  }
}

VectorXd Standardization::standardize_input(const VectorXd& x) const {
  return (x - input_mean).cwiseQuotient(input_std);
}

VectorXd Standardization::destandardize_target(const VectorXd& y) const {
  return y.cwiseProduct(target_std) + target_mean;
}

void Standardization::validate() const {
  if (input_mean.size() != input_std.size() || target_mean.size() != target_std.size())
    throw InvalidInput("standardization vectors have inconsistent sizes");
  if ((input_std.array() <= 0.0).any() || (target_std.array() <= 0.0).any())
    throw InvalidInput("standardization scales must be positive");
}

Mlp init_mlp(const std::vector<int>& dims, Activation activation, Init init, std::uint64_t seed) {
  if (dims.empty()) throw InvalidInput("dims must not be empty");
  Mlp mlp;
  mlp.dims = dims;
  mlp.activation = activation;
  mlp.init = init;
  if (dims.size() < 3) throw InvalidInput("network needs at least one hidden layer");
  for (int d : dims)
    if (d < 1) throw InvalidInput("layer sizes must be positive");

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int fan_in = dims[i], fan_out = dims[i + 1];
    Layer layer{MatrixXd(fan_out, fan_in), VectorXd::Zero(fan_out)};
    if (init == Init::Xavier) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = dist(rng);
    } else {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = dist(rng);
    }
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

namespace {

void activate(MatrixXd& z, Activation a) {
  if (a == Activation::Tanh)
    z = z.array().tanh();
  else
    z = z.cwiseMax(0.0);
}

// Derivative of the activation expressed through its output.
MatrixXd activation_slope(const MatrixXd& out, Activation a) {
  if (a == Activation::Tanh) return (1.0 - out.array().square()).matrix();
  return (out.array() > 0.0).cast<double>().matrix();
}

void check_input(const Mlp& mlp, Eigen::Index rows) {
  if (rows != mlp.input_dim())
    throw InvalidInput("input width " + std::to_string(rows) + " does not match network input " +
                       std::to_string(mlp.input_dim()));
}

// Activations of every layer; acts[0] is the input, acts.back() the output.
std::vector<MatrixXd> forward_all(const Mlp& mlp, const MatrixXd& inputs) {
  std::vector<MatrixXd> acts;
  acts.reserve(mlp.layers.size() + 1);
  acts.push_back(inputs);
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const Layer& l = mlp.layers[i];
    MatrixXd z = l.weight * acts.back();
    z.colwise() += l.bias;
    if (i + 1 < mlp.layers.size()) activate(z, mlp.activation);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

MatrixXd forward_batch(const Mlp& mlp, const MatrixXd& inputs) {
  check_input(mlp, inputs.rows());
  MatrixXd a = inputs;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const Layer& l = mlp.layers[i];
    MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    if (i + 1 < mlp.layers.size()) activate(z, mlp.activation);
    a = std::move(z);
  }
  return a;
}

VectorXd forward(const Mlp& mlp, const VectorXd& input) {
  return forward_batch(mlp, MatrixXd(input));
}

LossAndGrad loss_and_grad(const Mlp& mlp, const MatrixXd& inputs, const MatrixXd& targets) {
  check_input(mlp, inputs.rows());
  if (inputs.cols() == 0) throw InvalidInput("batch must not be empty");
  if (targets.rows() != mlp.output_dim() || targets.cols() != inputs.cols())
    throw InvalidInput("target batch shape does not match the network output");

  const auto acts = forward_all(mlp, inputs);
  const double batch = static_cast<double>(inputs.cols());
  const MatrixXd diff = acts.back() - targets;

  LossAndGrad out;
  out.loss = diff.squaredNorm() / batch;
  out.grad.resize(mlp.layers.size());

  MatrixXd delta = (2.0 / batch) * diff;
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    out.grad[i].weight = delta * acts[i].transpose();
    out.grad[i].bias = delta.rowwise().sum();
    if (i > 0) {
      delta = (mlp.layers[i].weight.transpose() * delta)
                  .cwiseProduct(activation_slope(acts[i], mlp.activation));
    }
  }
  return out;
}

double loss(const Mlp& mlp, const MatrixXd& inputs, const MatrixXd& targets) {
  check_input(mlp, inputs.rows());
  if (targets.rows() != mlp.output_dim() || targets.cols() != inputs.cols())
    throw InvalidInput("target batch shape does not match the network output");
  return (forward_batch(mlp, inputs) - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

MatrixXd input_jacobian(const Mlp& mlp, const VectorXd& input) {
  check_input(mlp, input.size());
  const auto acts = forward_all(mlp, MatrixXd(input));
  // Seed with the identity over outputs and pull back through each layer.
  MatrixXd adj = MatrixXd::Identity(mlp.output_dim(), mlp.output_dim());
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    adj = adj * mlp.layers[i].weight;
    if (i > 0) adj = adj * activation_slope(acts[i], mlp.activation).col(0).asDiagonal();
  }
  return adj;
}

AdamState AdamState::for_model(const Mlp& mlp, double base_lr, double decay) {
  AdamState s;
  s.base_lr = base_lr;
  s.decay = decay;
  for (const auto& l : mlp.layers) {
    s.m.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
    s.v.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
  }
  return s;
}

double decay_lr(const AdamState& state, int epoch) {
  if (epoch < 0) throw InvalidInput("epoch must be non-negative");
  return state.base_lr * std::pow(state.decay, epoch);
}

void adam_step(Mlp& mlp, const Params& grad, AdamState& state, int epoch) {
  if (grad.size() != mlp.layers.size() || state.m.size() != mlp.layers.size())
    throw InvalidInput("gradient does not match the parameter layout");
  const double lr = decay_lr(state, epoch);
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    if (grad[i].weight.rows() != mlp.layers[i].weight.rows() ||
        grad[i].weight.cols() != mlp.layers[i].weight.cols() ||
        grad[i].bias.size() != mlp.layers[i].bias.size())
      throw InvalidInput("gradient does not match the parameter layout");
    update(mlp.layers[i].weight, grad[i].weight, state.m[i].weight, state.v[i].weight);
    update(mlp.layers[i].bias, grad[i].bias, state.m[i].bias, state.v[i].bias);
  }
}

VectorXd flatten(const Params& params) {
  Eigen::Index n = 0;
  for (const auto& l : params) n += l.weight.size() + l.bias.size();
  VectorXd flat(n);
  Eigen::Index off = 0;
  for (const auto& l : params) {
    flat.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    flat.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return flat;
}

void unflatten(Params& params, const VectorXd& flat) {
  Eigen::Index off = 0;
  for (auto& l : params) {
    if (off + l.weight.size() + l.bias.size() > flat.size())
      throw InvalidInput("flat parameter vector is too short");
    l.weight.reshaped() = flat.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = flat.segment(off, l.bias.size());
    off += l.bias.size();
  }
  if (off != flat.size()) throw InvalidInput("flat parameter vector is too long");
}

// ---------------------------------------------------------------------------
// Checkpoint text format

namespace {

constexpr const char* kMagic = "fnode-mlp 1";

template <typename Vec>
void write_row(std::ostream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << detail::format_double(v[i]);
  }
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(std::string("unexpected end of checkpoint, expected ") + expecting, line_ + 1);
    ++line_;
    return line;
  }

  VectorXd numbers(const char* expecting, Eigen::Index count, std::string_view skip_prefix = {}) {
    const std::string line = next(expecting);
    std::string_view body = line;
    if (!skip_prefix.empty()) {
      if (body.substr(0, skip_prefix.size()) != skip_prefix)
        throw ParseError(std::string("expected ") + expecting, line_);
      body.remove_prefix(skip_prefix.size());
    }
    const auto fields = detail::split_ws(body);
    if (static_cast<Eigen::Index>(fields.size()) != count)
      throw ParseError(std::string(expecting) + ": expected " + std::to_string(count) +
                           " values, found " + std::to_string(fields.size()),
                       line_);
    VectorXd v(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto d = detail::parse_double(fields[static_cast<std::size_t>(i)]);
      if (!d) throw ParseError(std::string("malformed number in ") + expecting, line_);
      v[i] = *d;
    }
    return v;
  }

  std::size_t line() const { return line_; }
  bool eof() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string_view after_keyword(const std::string& line, std::string_view keyword, std::size_t lineno) {
  std::string_view s = line;
  if (s.substr(0, keyword.size()) != keyword || (s.size() > keyword.size() && s[keyword.size()] != ' '))
    throw ParseError("expected '" + std::string(keyword) + "'", lineno);
  s.remove_prefix(keyword.size());
  return detail::trim(s);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Mlp& mlp, const Standardization* stats) {
  mlp.validate();
  out << kMagic << '\n';
  out << "dims";
  for (int d : mlp.dims) out << ' ' << d;
  out << '\n';
  out << "activation " << to_string(mlp.activation) << '\n';
  out << "init " << to_string(mlp.init) << '\n';
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const Layer& l = mlp.layers[i];
    out << "layer " << i << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) write_row(out, VectorXd(l.weight.row(r).transpose()));
    write_row(out, l.bias);
  }
  if (stats) {
    stats->validate();
    out << "standardization\n";
    out << "input_mean ";
    write_row(out, stats->input_mean);
    out << "input_std ";
    write_row(out, stats->input_std);
    out << "target_mean ";
    write_row(out, stats->target_mean);
    out << "target_std ";
    write_row(out, stats->target_std);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  LineReader reader(in);
  if (detail::trim(reader.next("header")) != kMagic)
    throw ParseError("not an fnode checkpoint", reader.line());

  Checkpoint ck;
  {
    const std::string line = reader.next("dims");
    for (auto f : detail::split_ws(after_keyword(line, "dims", reader.line()))) {
      const auto v = detail::parse_int(f);
      if (!v || *v < 1) throw ParseError("malformed layer size", reader.line());
      ck.mlp.dims.push_back(static_cast<int>(*v));
    }
    if (ck.mlp.dims.size() < 3) throw ParseError("network needs at least one hidden layer", reader.line());
  }
  try {
    std::string line = reader.next("activation");
    ck.mlp.activation = activation_from_string(std::string(after_keyword(line, "activation", reader.line())));
    line = reader.next("init");
    ck.mlp.init = init_from_string(std::string(after_keyword(line, "init", reader.line())));
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), reader.line());
  }
  for (std::size_t i = 0; i + 1 < ck.mlp.dims.size(); ++i) {
    const std::string header = reader.next("layer header");
    const auto idx = detail::parse_int(after_keyword(header, "layer", reader.line()));
    if (!idx || *idx != static_cast<long long>(i)) throw ParseError("layer index out of order", reader.line());
    const int in_dim = ck.mlp.dims[i], out_dim = ck.mlp.dims[i + 1];
    Layer l{MatrixXd(out_dim, in_dim), VectorXd(out_dim)};
    for (int r = 0; r < out_dim; ++r) l.weight.row(r) = reader.numbers("weight row", in_dim).transpose();
    l.bias = reader.numbers("bias row", out_dim);
    ck.mlp.layers.push_back(std::move(l));
  }
  if (!reader.eof()) {
    const std::string marker = reader.next("standardization");
    if (detail::trim(marker) != "standardization")
      throw ParseError("unexpected trailing content", reader.line());
    Standardization s;
    const Eigen::Index ni = ck.mlp.input_dim(), no = ck.mlp.output_dim();
    s.input_mean = reader.numbers("input_mean", ni, "input_mean ");
    s.input_std = reader.numbers("input_std", ni, "input_std ");
    s.target_mean = reader.numbers("target_mean", no, "target_mean ");
    s.target_std = reader.numbers("target_std", no, "target_std ");
    try {
      s.validate();
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), reader.line());
    }
    ck.stats = std::move(s);
  }
  ck.mlp.validate();
  return ck;
}

}  // namespace fnode::net
