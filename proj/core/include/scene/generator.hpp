#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scene/mlp.hpp"
#include "scene/survival.hpp"

namespace scene {

/// Conditional generator T = exp(h(u, x)) with u ~ Uniform[-1,1]^aux_dim.
/// The network input is the auxiliary block followed by the covariates.
/// `pruned[j]` marks covariate j whose first-layer column is held at zero.
struct GeneratorModel {
  nn::Mlp net;
  int aux_dim;
  std::vector<std::uint8_t> pruned;

  GeneratorModel(nn::Mlp net, int aux_dim);

  /// (aux_dim + covariate_dim) -> hidden... -> 1 with an exp head.
  static GeneratorModel create(int covariate_dim, int aux_dim, const std::vector<int>& hidden,
                               nn::HiddenActivation activation, std::uint64_t seed);

  int covariate_dim() const noexcept { return net.input_dim() - aux_dim; }
  std::vector<int> pruned_covariates() const;

  friend bool operator==(const GeneratorModel&, const GeneratorModel&) = default;
};

struct SampleBatch {
  std::vector<double> times;  // T_1..T_K
  Eigen::MatrixXd aux;        // aux_dim x K, column k produced T_k
};

/// aux_dim x count matrix of iid Uniform[-1,1] draws, column-major order of draws.
template <class Rng>
Eigen::MatrixXd draw_aux(int aux_dim, int count, Rng& rng);

/// Stacks [aux; x] into the generator input layout (one column per aux draw).
Eigen::MatrixXd generator_inputs(const Eigen::MatrixXd& aux, std::span<const double> x);

SampleBatch sample_times(const GeneratorModel& model, std::span<const double> x, int k,
                         std::uint64_t seed);

/// Fraction of generated times strictly greater than t.
double empirical_survival(std::span<const double> times, double t);
inline double empirical_survival(const SampleBatch& batch, double t) {
  return empirical_survival(batch.times, t);
}

struct SmoothedSurvival {
  double value;
  nn::ParamGrads grad;  // d value / d generator parameters
};

/// (1/K) sum sigmoid((T_k - t) / temperature) with its exact parameter gradient.
SmoothedSurvival smoothed_survival(const GeneratorModel& model, std::span<const double> x,
                                   const Eigen::MatrixXd& aux, double t, double temperature);

/// Negative mean generated time; larger means earlier expected failure.
double risk_score(const GeneratorModel& model, std::span<const double> x, int k,
                  std::uint64_t seed);

/// Empirical survival of `sample_times(model, x, k, seed)` on each grid time.
std::vector<double> survival_on_grid(const GeneratorModel& model, std::span<const double> x,
                                     std::span<const double> grid, int k, std::uint64_t seed);

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <class Rng>
Eigen::MatrixXd draw_aux(int aux_dim, int count, Rng& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd aux(aux_dim, count);
  for (int c = 0; c < count; ++c) {
    for (int r = 0; r < aux_dim; ++r) aux(r, c) = unif(rng);
  }
  return aux;
}

}  // namespace scene
