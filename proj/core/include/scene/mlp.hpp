#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace scene::nn {

enum class HiddenActivation { relu, tanh };
enum class OutputActivation { exp, sigmoid, identity };

/// Pre-activation of an exp head is clipped to [-kExpClamp, kExpClamp].
inline constexpr double kExpClamp = 30.0;

std::string_view to_string(HiddenActivation a) noexcept;
std::string_view to_string(OutputActivation a) noexcept;
HiddenActivation parse_hidden_activation(std::string_view name);
OutputActivation parse_output_activation(std::string_view name);

/// Dense feed-forward network with a scalar output.
///
/// Layer l maps m_l inputs to m_{l+1} outputs with W_l (m_{l+1} x m_l) and
/// b_l. Hidden layers apply the hidden activation; the last layer applies the
/// output activation. Every mutating accessor bumps `version()`, which
/// forward caches record so a stale cache is detected in backward.
class Mlp {
 public:
  Mlp(std::vector<int> layer_dims, HiddenActivation hidden, OutputActivation output);

  /// Glorot-uniform weights, zero biases; deterministic in `seed`.
  static Mlp glorot(std::vector<int> layer_dims, HiddenActivation hidden,
                    OutputActivation output, std::uint64_t seed);

  const std::vector<int>& layer_dims() const noexcept { return dims_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }
  int input_dim() const noexcept { return dims_.front(); }
  HiddenActivation hidden_activation() const noexcept { return hidden_; }
  OutputActivation output_activation() const noexcept { return output_; }

  const Eigen::MatrixXd& weight(std::size_t l) const { return weights_.at(l); }
  const Eigen::VectorXd& bias(std::size_t l) const { return biases_.at(l); }
  Eigen::MatrixXd& mutable_weight(std::size_t l);
  Eigen::VectorXd& mutable_bias(std::size_t l);

  std::uint64_t version() const noexcept { return version_; }
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<int> dims_;
  HiddenActivation hidden_;
  OutputActivation output_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  std::uint64_t version_ = 0;
};

/// Partial derivatives of a scalar loss, shape-congruent with an Mlp.
struct ParamGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ParamGrads zeros_like(const Mlp& net);

  double squared_norm() const;
  double norm() const;
  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double factor);
};

/// Everything backward needs from a batched forward pass. Column j of each
/// matrix belongs to sample j.
struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<int> layer_dims;
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
  std::vector<Eigen::MatrixXd> post;  // hidden activation per non-final layer
  Eigen::RowVectorXd output;
};

ForwardCache forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

struct ForwardResult {
  double output;
  ForwardCache cache;
};

ForwardResult forward(const Mlp& net, std::span<const double> input);

/// Output activation applied to a batch of pre-activations, without caching.
Eigen::RowVectorXd evaluate_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

struct BatchBackward {
  ParamGrads grads;             // summed over the batch
  Eigen::MatrixXd input_grads;  // empty unless requested
};

/// Reverse pass for a batch. `upstream(j)` scales sample j's output gradient.
BatchBackward backward_batch(const Mlp& net, const ForwardCache& cache,
                             const Eigen::RowVectorXd& upstream,
                             bool want_input_grads = false);

struct Backward {
  ParamGrads grads;
  Eigen::VectorXd input_grad;
};

Backward backward(const Mlp& net, const ForwardCache& cache, double upstream);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { sgd_momentum, adam };
enum class Direction { descent, ascent };

std::string_view to_string(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 2e-4;
  double momentum = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps_stab = 1e-8;
};

/// Moment buffers and step counter for one network.
class OptimizerState {
 public:
  OptimizerState(const Mlp& net, OptimizerSettings settings);

  const OptimizerSettings& settings() const noexcept { return settings_; }
  long step_count() const noexcept { return step_; }

  /// Clears every moment entry that feeds input column `column` of layer 0.
  void zero_input_column(int column);

 private:
  friend void optimizer_step(Mlp&, const ParamGrads&, OptimizerState&, Direction);

  OptimizerSettings settings_;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  long step_ = 0;
};

/// One update. SGD-momentum: v <- mu v + g, theta <- theta -/+ lr v.
/// Adam: bias-corrected moments. Ascent flips the sign of the update.
/// Throws DivergedError naming the layer if any gradient is non-finite; in
/// that case nothing is modified.
void optimizer_step(Mlp& net, const ParamGrads& grads, OptimizerState& state,
                    Direction direction);

// ---------------------------------------------------------------------------
// Serialization

std::string to_json(const Mlp& net);
Mlp mlp_from_json(std::string_view text);

}  // namespace scene::nn
