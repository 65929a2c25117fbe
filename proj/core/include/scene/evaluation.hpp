#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scene/generator.hpp"
#include "scene/simulation.hpp"
#include "scene/survival.hpp"
#include "scene/trainer.hpp"

namespace scene {

struct BandSummary {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> mean;
  std::vector<double> upper;
  std::size_t replicates = 0;
};

/// Linear-interpolation sample quantile (type 7) of unsorted values.
double linear_quantile(std::vector<double> values, double level);

/// Pointwise (1-level)/2 and (1+level)/2 quantiles and means of replicate
/// curves evaluated on one shared grid (their knot vectors).
BandSummary empirical_band(std::span<const SurvivalCurve> curves, double level = 0.90);

struct QqSeries {
  std::vector<double> levels;
  std::vector<double> true_quantiles;
  std::vector<double> generated_quantiles;
  std::vector<std::uint8_t> extreme;  // set for q = 1, where the true quantile is infinite
};

/// Nearest-rank quantile: the ceil(q*K)-th smallest value.
double nearest_rank_quantile(std::span<const double> sorted, double q);

/// Levels q_i = i/Q for i = 1..Q. Needs at least Q samples.
QqSeries qq_series(const sim::TruthOracle& truth, std::span<const double> x, const SampleBatch& batch,
                   int levels = 100);

struct CvReport {
  std::vector<double> folds;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
};

/// Shuffles 0..n-1 with `seed` and deals them into k folds whose sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int k, std::uint64_t seed);

/// Produces risk scores for `test` after fitting on `train`.
using FoldScorer = std::function<RiskScores(const Dataset& train, const Dataset& test, int fold)>;

/// Scores every fold with `scorer`. Folds without a comparable pair are
/// rejected with undefined-cindex before any scoring happens. Folds run on up
/// to `jobs` threads.
CvReport kfold_cindex(const Dataset& data, int k, std::uint64_t seed, const FoldScorer& scorer,
                      int jobs = 1);

/// Trains with `cfg` on each training split and scores held-out records with
/// risk_score (K = cfg.k samples).
CvReport kfold_cindex(const Dataset& data, const TrainConfig& cfg, int k = 5, int jobs = 1);

/// Appends `extra` iid Uniform[-1,1] covariate columns.
Dataset add_noise_covariates(const Dataset& data, int extra, std::uint64_t seed);

std::string band_to_csv(const BandSummary& band);
std::string qq_to_csv(const QqSeries& qq);
std::string cv_to_json(const CvReport& report);

}  // namespace scene
