#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace scene {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Right-censored observations {time, event, covariates}. Immutable once built.
class Dataset {
 public:
  Dataset() = default;

  /// Validates: times positive and finite, one covariate row per record.
  Dataset(std::vector<double> times, std::vector<std::uint8_t> events, RowMatrix covariates);

  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  int covariate_dim() const noexcept { return static_cast<int>(covariates_.cols()); }

  double time(std::size_t i) const { return times_[i]; }
  bool event(std::size_t i) const { return events_[i] != 0; }
  std::span<const double> covariates(std::size_t i) const {
    return {covariates_.data() + static_cast<std::ptrdiff_t>(i) * covariates_.cols(),
            static_cast<std::size_t>(covariates_.cols())};
  }

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<std::uint8_t>& events() const noexcept { return events_; }
  const RowMatrix& covariate_matrix() const noexcept { return covariates_; }

  Dataset subset(std::span<const std::size_t> indices) const;
  double censoring_rate() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<double> times_;
  std::vector<std::uint8_t> events_;
  RowMatrix covariates_;
};

/// Right-continuous, non-increasing step function. Equals 1 before the first
/// knot and the value of the last knot at or below t otherwise.
class SurvivalCurve {
 public:
  SurvivalCurve() = default;
  SurvivalCurve(std::vector<double> times, std::vector<double> probs);

  double operator()(double t) const;

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::vector<double> times_;
  std::vector<double> probs_;
};

/// Higher score means higher risk, aligned with Dataset records.
struct RiskScores {
  std::vector<double> scores;
};

/// Product-limit estimator with knots at every distinct observed time. At a
/// tied time events are processed before censorings.
SurvivalCurve km_estimate(const Dataset& data);

enum class DenominatorGuard { raise, floor };

inline constexpr double kCurveFloor = 1e-12;

/// S(t) - (1/N) sum { I(t_i > t) + (1 - d_i) I(t_i <= t) S(t) / S(t_i) }.
double km_residual(const SurvivalCurve& curve, const Dataset& data, double t,
                   DenominatorGuard guard = DenominatorGuard::raise);

/// Harrell's C over pairs with t_i < t_j and d_i = 1; score ties count 1/2.
double concordance_index(const Dataset& data, const RiskScores& scores);

}  // namespace scene
