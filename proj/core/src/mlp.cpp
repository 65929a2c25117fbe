#include "scene/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "scene/error.hpp"

namespace scene::nn {

namespace {

void validate_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw Error(ErrorKind::invalid_architecture,
                "need at least an input and an output layer, got " +
                    std::to_string(dims.size()) + " dims");
  }
  for (int d : dims) {
    if (d < 1) {
      throw Error(ErrorKind::invalid_architecture,
                  "layer dims must be positive, got " + std::to_string(d));
    }
  }
  if (dims.back() != 1) {
    throw Error(ErrorKind::invalid_architecture, "output dim must be 1");
  }
}

Eigen::MatrixXd apply_hidden(HiddenActivation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case HiddenActivation::relu: return pre.cwiseMax(0.0);
    case HiddenActivation::tanh: return pre.array().tanh().matrix();
  }
  return pre;
}

// Derivative of the hidden activation evaluated from pre- and post-values.
// ReLU'(0) is taken as 0.
Eigen::ArrayXXd hidden_derivative(HiddenActivation a, const Eigen::MatrixXd& pre,
                                  const Eigen::MatrixXd& post) {
  switch (a) {
    case HiddenActivation::relu: return (pre.array() > 0.0).cast<double>();
    case HiddenActivation::tanh: return 1.0 - post.array().square();
  }
  return Eigen::ArrayXXd::Ones(pre.rows(), pre.cols());
}

double apply_output(OutputActivation a, double z) {
  switch (a) {
    case OutputActivation::exp: return std::exp(std::clamp(z, -kExpClamp, kExpClamp));
    case OutputActivation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case OutputActivation::identity: return z;
  }
  return z;
}

double output_derivative(OutputActivation a, double z, double out) {
  switch (a) {
    case OutputActivation::exp:
      return (z > -kExpClamp && z < kExpClamp) ? out : 0.0;
    case OutputActivation::sigmoid: return out * (1.0 - out);
    case OutputActivation::identity: return 1.0;
  }
  return 1.0;
}

void check_input(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw Error(ErrorKind::shape, "input has " + std::to_string(inputs.rows()) +
                                      " rows, network expects " +
                                      std::to_string(net.input_dim()));
  }
}

}  // namespace

std::string_view to_string(HiddenActivation a) noexcept {
  return a == HiddenActivation::relu ? "relu" : "tanh";
}

std::string_view to_string(OutputActivation a) noexcept {
  switch (a) {
    case OutputActivation::exp: return "exp";
    case OutputActivation::sigmoid: return "sigmoid";
    case OutputActivation::identity: return "identity";
  }
  return "identity";
}

HiddenActivation parse_hidden_activation(std::string_view name) {
  if (name == "relu") return HiddenActivation::relu;
  if (name == "tanh") return HiddenActivation::tanh;
  throw Error(ErrorKind::parse, "unknown hidden activation '" + std::string(name) + "'");
}

OutputActivation parse_output_activation(std::string_view name) {
  if (name == "exp") return OutputActivation::exp;
  if (name == "sigmoid") return OutputActivation::sigmoid;
  if (name == "identity") return OutputActivation::identity;
  throw Error(ErrorKind::parse, "unknown output activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<int> layer_dims, HiddenActivation hidden, OutputActivation output)
    : dims_(std::move(layer_dims)), hidden_(hidden), output_(output) {
  validate_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
  }
}

Mlp Mlp::glorot(std::vector<int> layer_dims, HiddenActivation hidden,
                OutputActivation output, std::uint64_t seed) {
  Mlp net(std::move(layer_dims), hidden, output);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    auto& w = net.weights_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
  }
  return net;
}

Eigen::MatrixXd& Mlp::mutable_weight(std::size_t l) {
  ++version_;
  return weights_.at(l);
}

Eigen::VectorXd& Mlp::mutable_bias(std::size_t l) {
  ++version_;
  return biases_.at(l);
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.dims_ != b.dims_ || a.hidden_ != b.hidden_ || a.output_ != b.output_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const Mlp& net) {
  ParamGrads g;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
  }
  return g;
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

double ParamGrads::norm() const { return std::sqrt(squared_norm()); }

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (other.weights.size() != weights.size()) {
    throw Error(ErrorKind::shape, "gradient layer counts differ");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

ParamGrads& ParamGrads::operator*=(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
  return *this;
}

ForwardCache forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs);
  ForwardCache cache;
  cache.version = net.version();
  cache.layer_dims = net.layer_dims();
  cache.input = inputs;
  const std::size_t layers = net.num_layers();
  cache.pre.reserve(layers);
  cache.post.reserve(layers - 1);
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.post[l - 1];
    Eigen::MatrixXd pre = net.weight(l) * below;
    pre.colwise() += net.bias(l);
    cache.pre.push_back(std::move(pre));
    if (l + 1 < layers) cache.post.push_back(apply_hidden(net.hidden_activation(), cache.pre[l]));
  }
  const Eigen::MatrixXd& last = cache.pre.back();
  cache.output.resize(last.cols());
  for (Eigen::Index j = 0; j < last.cols(); ++j) {
    cache.output(j) = apply_output(net.output_activation(), last(0, j));
  }
  return cache;
}

ForwardResult forward(const Mlp& net, std::span<const double> input) {
  Eigen::MatrixXd column(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) column(static_cast<Eigen::Index>(i), 0) = input[i];
  ForwardCache cache = forward_batch(net, column);
  const double out = cache.output(0);
  return {out, std::move(cache)};
}

Eigen::RowVectorXd evaluate_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs);
  Eigen::MatrixXd act = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd pre = net.weight(l) * act;
    pre.colwise() += net.bias(l);
    act = l + 1 < net.num_layers() ? apply_hidden(net.hidden_activation(), pre) : std::move(pre);
  }
  Eigen::RowVectorXd out(act.cols());
  for (Eigen::Index j = 0; j < act.cols(); ++j) out(j) = apply_output(net.output_activation(), act(0, j));
  return out;
}

BatchBackward backward_batch(const Mlp& net, const ForwardCache& cache,
                             const Eigen::RowVectorXd& upstream, bool want_input_grads) {
  if (cache.version != net.version() || cache.layer_dims != net.layer_dims() ||
      cache.pre.size() != net.num_layers()) {
    throw Error(ErrorKind::contract_violation, "forward cache does not belong to this network state");
  }
  if (upstream.size() != cache.output.size()) {
    throw Error(ErrorKind::contract_violation, "upstream gradient length differs from cached batch");
  }

  const std::size_t layers = net.num_layers();
  BatchBackward result;
  result.grads.weights.resize(layers);
  result.grads.biases.resize(layers);

  Eigen::MatrixXd delta(1, upstream.size());
  const Eigen::MatrixXd& top = cache.pre.back();
  for (Eigen::Index j = 0; j < upstream.size(); ++j) {
    delta(0, j) = upstream(j) * output_derivative(net.output_activation(), top(0, j), cache.output(j));
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.post[l - 1];
    result.grads.weights[l].noalias() = delta * below.transpose();
    result.grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = net.weight(l).transpose() * delta;
      delta = (back.array() *
               hidden_derivative(net.hidden_activation(), cache.pre[l - 1], cache.post[l - 1]))
                  .matrix();
    } else if (want_input_grads) {
      result.input_grads = net.weight(0).transpose() * delta;
    }
  }
  return result;
}

Backward backward(const Mlp& net, const ForwardCache& cache, double upstream) {
  if (cache.output.size() != 1) {
    throw Error(ErrorKind::contract_violation, "single-sample backward needs a single-sample cache");
  }
  Eigen::RowVectorXd up(1);
  up(0) = upstream;
  BatchBackward b = backward_batch(net, cache, up, true);
  return {std::move(b.grads), b.input_grads.col(0)};
}

// ---------------------------------------------------------------------------

std::string_view to_string(OptimizerKind k) noexcept {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd" || name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw Error(ErrorKind::parse, "unknown optimizer kind '" + std::string(name) + "'");
}

OptimizerState::OptimizerState(const Mlp& net, OptimizerSettings settings)
    : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) {
    throw Error(ErrorKind::invalid_parameter, "learning rate must be positive");
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    m_w_.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
    if (settings_.kind == OptimizerKind::adam) {
      v_w_.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
      v_b_.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
    }
  }
}

void OptimizerState::zero_input_column(int column) {
  m_w_.front().col(column).setZero();
  if (!v_w_.empty()) v_w_.front().col(column).setZero();
}

void optimizer_step(Mlp& net, const ParamGrads& grads, OptimizerState& state,
                    Direction direction) {
  const std::size_t layers = net.num_layers();
  if (grads.weights.size() != layers || grads.biases.size() != layers ||
      state.m_w_.size() != layers) {
    throw Error(ErrorKind::shape, "gradient/optimizer state not congruent with network");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (grads.weights[l].rows() != net.weight(l).rows() ||
        grads.weights[l].cols() != net.weight(l).cols() ||
        grads.biases[l].size() != net.bias(l).size()) {
      throw Error(ErrorKind::shape, "gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
      throw DivergedError("non-finite gradient at layer " + std::to_string(l),
                          static_cast<long>(l));
    }
  }

  const OptimizerSettings& s = state.settings_;
  const double sign = direction == Direction::descent ? -1.0 : 1.0;
  ++state.step_;

  if (s.kind == OptimizerKind::sgd_momentum) {
    for (std::size_t l = 0; l < layers; ++l) {
      state.m_w_[l] = s.momentum * state.m_w_[l] + grads.weights[l];
      state.m_b_[l] = s.momentum * state.m_b_[l] + grads.biases[l];
      net.mutable_weight(l) += sign * s.learning_rate * state.m_w_[l];
      net.mutable_bias(l) += sign * s.learning_rate * state.m_b_[l];
    }
    return;
  }

  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double step = sign * s.learning_rate;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param.array() += step * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps_stab);
  };
  for (std::size_t l = 0; l < layers; ++l) {
    update(net.mutable_weight(l), state.m_w_[l], state.v_w_[l], grads.weights[l]);
    update(net.mutable_bias(l), state.m_b_[l], state.v_b_[l], grads.biases[l]);
  }
}

}  // namespace scene::nn
