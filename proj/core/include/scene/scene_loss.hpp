#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scene/generator.hpp"
#include "scene/mlp.hpp"
#include "scene/survival.hpp"

namespace scene {

/// Inputs of the mini-batch weighted self-consistency loss. Only the values
/// the loss actually reads are stored: S(t_j | x_i) for every record/time
/// point pair and S(t_i | x_i) at each record's own observed time.
struct LossBatch {
  std::vector<double> times;          // observed times of the n records
  std::vector<std::uint8_t> events;   // event indicators of the n records
  std::vector<double> time_points;    // t_1..t_m
  Eigen::MatrixXd point_survival;     // n x m
  Eigen::VectorXd own_survival;       // n
  Eigen::VectorXd phi;                // n, weight function values
  double floor = 0.0;                 // lower bound for S(t_i | x_i)
  DenominatorGuard guard = DenominatorGuard::floor;

  std::size_t size() const noexcept { return times.size(); }
};

struct LossTerms {
  double left;   // (1/n) sum S(t|x_i) phi_i
  double right;  // (1/n) sum {I(t_i > t) + I(d_i = 0, t_i <= t) S(t|x_i)/S(t_i|x_i)} phi_i
};

LossTerms loss_terms(const LossBatch& batch, std::size_t point);

struct LossReport {
  double c_tilde = 0.0;
  std::vector<double> per_time_residuals;
};

/// Mean of squared (left - right) over all time points of the batch.
LossReport loss_report(const LossBatch& batch);

struct LossSettings {
  int k = 400;
  double temperature = 0.1;
  std::uint64_t seed = 0;
  /// Denominator floor; non-positive means 1/k.
  double floor = 0.0;
  DenominatorGuard guard = DenominatorGuard::floor;

  double effective_floor() const noexcept { return floor > 0.0 ? floor : 1.0 / k; }
};

/// Monitoring loss with exact indicator survival (no smoothing).
LossReport scene_loss(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                      std::span<const double> time_points, const LossSettings& settings);

struct GradientStep {
  nn::ParamGrads grads;
  LossReport report;  // exact-indicator loss at the parameters the gradient was taken
};

/// Gradient w.r.t. generator parameters of (1/m) sum_j (L_s(t_j) - R(t_j))^2
/// with R frozen (exact indicators, no gradient) and L_s using the sigmoid
/// relaxation. Columns of pruned covariates are zero.
GradientStep generator_step(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                            std::span<const double> time_points, const LossSettings& settings);

nn::ParamGrads generator_grad(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                              std::span<const double> time_points, const LossSettings& settings);

/// Full gradient of the exact loss w.r.t. the weight-function parameters.
GradientStep phi_step(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                      std::span<const double> time_points, const LossSettings& settings);

nn::ParamGrads phi_grad(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                        std::span<const double> time_points, const LossSettings& settings);

/// Generator inputs for a mini-batch: record i uses aux draws i*K..(i+1)*K-1
/// from a single stream seeded by `seed`.
struct BatchSamples {
  Eigen::MatrixXd inputs;  // (aux + p) x (n K)
};
BatchSamples draw_batch_samples(const GeneratorModel& gen, const Dataset& batch, int k,
                                std::uint64_t seed);

/// Builds the exact-indicator LossBatch from generated times.
LossBatch make_loss_batch(const Dataset& batch, std::span<const double> time_points,
                          const Eigen::MatrixXd& generated_times, const Eigen::VectorXd& phi_values,
                          double floor, DenominatorGuard guard);

/// phi evaluated on every record's covariates.
Eigen::VectorXd phi_values(const nn::Mlp& phi, const Dataset& batch);

}  // namespace scene
