#include "scene/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "scene/error.hpp"
#include "scene/io.hpp"

namespace scene {

double linear_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw Error(ErrorKind::invalid_parameter, "quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw Error(ErrorKind::invalid_quantile, "level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BandSummary empirical_band(std::span<const SurvivalCurve> curves, double level) {
  if (curves.size() < 2) throw Error(ErrorKind::invalid_parameter, "a band needs at least two curves");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::invalid_parameter, "band level must lie in (0,1)");
  const auto& grid = curves.front().times();
  for (std::size_t c = 1; c < curves.size(); ++c) {
    if (curves[c].times() != grid) {
      throw Error(ErrorKind::misaligned_curves, "curve " + std::to_string(c) + " uses a different grid");
    }
  }
  BandSummary band;
  band.grid = grid;
  band.replicates = curves.size();
  const double lo = (1.0 - level) / 2.0;
  std::vector<double> column(curves.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      column[c] = curves[c].probs()[g];
      sum += column[c];
    }
    band.lower.push_back(linear_quantile(column, lo));
    band.upper.push_back(linear_quantile(column, 1.0 - lo));
    // Keep lower <= mean <= upper despite rounding in the sum.
    band.mean.push_back(std::clamp(sum / static_cast<double>(curves.size()), band.lower.back(), band.upper.back()));
  }
  return band;
}

double nearest_rank_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::invalid_parameter, "quantile of an empty sample");
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

QqSeries qq_series(const sim::TruthOracle& truth, std::span<const double> x, const SampleBatch& batch,
                   int levels) {
  if (levels < 1) throw Error(ErrorKind::invalid_parameter, "need at least one quantile level");
  if (batch.times.size() < static_cast<std::size_t>(levels)) {
    throw Error(ErrorKind::invalid_parameter, "batch has fewer samples than quantile levels");
  }
  std::vector<double> sorted = batch.times;
  std::sort(sorted.begin(), sorted.end());
  QqSeries qq;
  for (int i = 1; i <= levels; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(levels);
    qq.levels.push_back(q);
    const bool top = i == levels;
    qq.true_quantiles.push_back(top ? std::numeric_limits<double>::infinity() : truth.quantile(q, x));
    qq.generated_quantiles.push_back(top ? sorted.back() : nearest_rank_quantile(sorted, q));
    qq.extreme.push_back(top ? 1 : 0);
  }
  return qq;
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::invalid_parameter, "need at least two folds");
  if (n < static_cast<std::size_t>(k)) throw Error(ErrorKind::invalid_parameter, "fewer records than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % folds.size()].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

bool has_comparable_pair(const Dataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.event(i)) continue;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (d.time(i) < d.time(j)) return true;
    }
  }
  return false;
}

}  // namespace

CvReport kfold_cindex(const Dataset& data, int k, std::uint64_t seed, const FoldScorer& scorer, int jobs) {
  const auto folds = fold_partition(data.size(), k, seed);
  std::vector<Dataset> train_sets, test_sets;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(rest.begin(), rest.end());
    test_sets.push_back(data.subset(folds[f]));
    train_sets.push_back(data.subset(rest));
    if (!has_comparable_pair(test_sets.back())) {
      throw Error(ErrorKind::undefined_cindex, "fold " + std::to_string(f) + " has no comparable pairs");
    }
  }

  CvReport report;
  report.folds.assign(folds.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t f = next++; f < folds.size(); f = next++) {
      try {
        const RiskScores scores = scorer(train_sets[f], test_sets[f], static_cast<int>(f));
        report.folds[f] = concordance_index(test_sets[f], scores);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = folds.size();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(folds.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const double n = static_cast<double>(report.folds.size());
  report.mean = std::accumulate(report.folds.begin(), report.folds.end(), 0.0) / n;
  double ss = 0.0;
  for (double c : report.folds) ss += (c - report.mean) * (c - report.mean);
  report.sd = std::sqrt(ss / (n - 1.0));
  return report;
}

CvReport kfold_cindex(const Dataset& data, const TrainConfig& cfg, int k, int jobs) {
  cfg.validate();
  auto scorer = [&cfg](const Dataset& train_set, const Dataset& test_set, int fold) {
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + static_cast<std::uint64_t>(fold) + 1;
    const TrainedModel model = train(train_set, fold_cfg);
    RiskScores scores;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      scores.scores.push_back(risk_score(model.generator, test_set.covariates(i), cfg.k, fold_cfg.seed + i));
    }
    return scores;
  };
  return kfold_cindex(data, k, cfg.seed, scorer, jobs);
}

Dataset add_noise_covariates(const Dataset& data, int extra, std::uint64_t seed) {
  if (extra < 0) throw Error(ErrorKind::invalid_parameter, "noise column count must be non-negative");
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.covariate_dim();
  RowMatrix x(n, p + extra);
  x.leftCols(p) = data.covariate_matrix();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < extra; ++j) x(i, p + j) = unit(rng);
  }
  return Dataset(data.times(), data.events(), std::move(x));
}

std::string band_to_csv(const BandSummary& band) {
  std::string out = "t,lower,mean,upper\n";
  for (std::size_t g = 0; g < band.grid.size(); ++g) {
    out += io::format_double(band.grid[g]) + ',' + io::format_double(band.lower[g]) + ',' +
           io::format_double(band.mean[g]) + ',' + io::format_double(band.upper[g]) + '\n';
  }
  return out;
}

std::string qq_to_csv(const QqSeries& qq) {
  std::string out = "q,true_q,gen_q\n";
  for (std::size_t i = 0; i < qq.levels.size(); ++i) {
    out += io::format_double(qq.levels[i]) + ',' + io::format_double(qq.true_quantiles[i]) + ',' +
           io::format_double(qq.generated_quantiles[i]) + '\n';
  }
  return out;
}

std::string cv_to_json(const CvReport& report) {
  nlohmann::json doc{{"folds", report.folds}, {"mean", report.mean}, {"sd", report.sd}};
  return doc.dump(1) + "\n";
}

}  // namespace scene
