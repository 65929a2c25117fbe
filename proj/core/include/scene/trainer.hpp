#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "scene/generator.hpp"
#include "scene/mlp.hpp"
#include "scene/scene_loss.hpp"
#include "scene/survival.hpp"

namespace scene {

struct NetworkConfig {
  std::vector<int> hidden;
  nn::HiddenActivation activation = nn::HiddenActivation::relu;
};

/// Hyperparameters of the alternating min-max training loop.
///
/// Without variable selection the loop runs `epochs` epochs. With selection,
/// the first phase runs until `epochs` epochs have passed or the mean
/// covariate importance exceeds the auxiliary threshold (checked at epoch
/// boundaries); selection then runs for `vs_epochs` more epochs.
struct TrainConfig {
  int epochs = 50;
  int vs_epochs = 20;
  int batch_size = 5;
  std::optional<int> time_points;  // m; defaults to batch_size
  int k = 400;
  int aux_dim = 5;
  double temperature = 0.1;
  NetworkConfig gen_arch{{1000, 1000, 1000}, nn::HiddenActivation::relu};
  nn::OptimizerSettings gen_optimizer{nn::OptimizerKind::adam, 2e-4, 0.0, 0.0, 0.9, 1e-8};
  NetworkConfig phi_arch{{1000, 1000}, nn::HiddenActivation::relu};
  nn::OptimizerSettings phi_optimizer{nn::OptimizerKind::sgd_momentum, 1e-3, 0.9, 0.0, 0.9, 1e-8};
  bool variable_selection = false;
  std::uint64_t seed = 0;

  int effective_time_points() const noexcept { return time_points.value_or(batch_size); }

  /// Throws ErrorKind::config on non-positive counts or rates.
  void validate() const;

  static TrainConfig low_dim_defaults();
  static TrainConfig high_dim_defaults();
};

/// Parses flat `key = value` text. Blank lines and `#` comments are ignored;
/// unknown keys, duplicates and malformed values throw ErrorKind::config.
/// Keys not present keep the values of `base`; `keys_seen`, if given,
/// receives every key that was set.
TrainConfig parse_train_config(std::string_view text, const TrainConfig& base = TrainConfig{},
                               std::vector<std::string>* keys_seen = nullptr);
std::string format_train_config(const TrainConfig& cfg);

struct ImportanceVector {
  std::vector<double> gamma;  // aux entries first, then covariates
  double threshold = 0.0;     // mean of the auxiliary entries
};

/// gamma = |W_L| ... |W_2| |W_1| as a row vector over generator inputs.
ImportanceVector variable_importance(const GeneratorModel& gen);

/// Zeroes (and marks pruned) every covariate column whose importance is at or
/// below the threshold. Pruning is cumulative. Returns newly pruned indices.
std::vector<int> apply_selection(GeneratorModel& gen, const ImportanceVector& iv);

struct IterationRecord {
  long iter = 0;
  double c_tilde = 0.0;
  double grad_norm_omega = 0.0;
  double grad_norm_zeta = 0.0;
};

struct TrainedModel {
  GeneratorModel generator;
  nn::Mlp phi;
  std::vector<IterationRecord> history;
  long selection_start = -1;  // iteration after which selection ran, -1 if never

  std::vector<int> pruned_covariates() const { return generator.pruned_covariates(); }
};

/// epochs * ceil(n_records / batch_size).
long epochs_to_iterations(int epochs, std::size_t n_records, int batch_size);

/// Randomness consumed by one iteration of the training loop.
struct IterationInputs {
  std::vector<std::size_t> records;  // mini-batch, drawn without replacement
  std::vector<double> time_points;   // observed times of a second draw without replacement
  std::uint64_t generator_seed = 0;  // auxiliary draws for the generator step
  std::uint64_t phi_seed = 0;        // auxiliary draws for the weight-function step
};

/// Deterministic stream of IterationInputs for a config seed.
class IterationSampler {
 public:
  explicit IterationSampler(const TrainConfig& cfg);
  IterationInputs next(const Dataset& data);

 private:
  std::mt19937_64 rng_;
  std::size_t batch_size_;
  std::size_t time_points_;
};

struct OptimizerPair {
  nn::OptimizerState generator;
  nn::OptimizerState phi;
};

/// One alternating update: generator descent with the current weight
/// function, then weight-function ascent against the updated generator.
IterationRecord train_iteration(TrainedModel& model, OptimizerPair& opt, const Dataset& data,
                                const IterationInputs& in, const TrainConfig& cfg, long iter);

/// Optional observer called after every iteration.
using TrainObserver = std::function<void(const IterationRecord&)>;

TrainedModel initial_model(int covariate_dim, const TrainConfig& cfg);

TrainedModel train(const Dataset& data, const TrainConfig& cfg, const TrainObserver& observer = {});

// Serialization of the trained state and its history.
std::string trained_model_to_json(const TrainedModel& model);
TrainedModel trained_model_from_json(std::string_view text);
std::string history_to_csv(const std::vector<IterationRecord>& history);

}  // namespace scene
