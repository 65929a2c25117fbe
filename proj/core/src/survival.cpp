#include "scene/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scene/error.hpp"

namespace scene {

Dataset::Dataset(std::vector<double> times, std::vector<std::uint8_t> events, RowMatrix covariates)
    : times_(std::move(times)), events_(std::move(events)), covariates_(std::move(covariates)) {
  if (events_.size() != times_.size() ||
      static_cast<std::size_t>(covariates_.rows()) != times_.size()) {
    throw Error(ErrorKind::shape, "times, events and covariate rows must have equal length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(times_[i] > 0.0) || !std::isfinite(times_[i])) {
      throw Error(ErrorKind::invalid_parameter,
                  "record " + std::to_string(i) + ": time must be positive and finite");
    }
    if (events_[i] > 1) {
      throw Error(ErrorKind::invalid_parameter,
                  "record " + std::to_string(i) + ": event must be 0 or 1");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> t;
  std::vector<std::uint8_t> e;
  RowMatrix x(static_cast<Eigen::Index>(indices.size()), covariates_.cols());
  t.reserve(indices.size());
  e.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    t.push_back(times_.at(i));
    e.push_back(events_[i]);
    x.row(static_cast<Eigen::Index>(k)) = covariates_.row(static_cast<Eigen::Index>(i));
  }
  return Dataset(std::move(t), std::move(e), std::move(x));
}

double Dataset::censoring_rate() const {
  if (empty()) return 0.0;
  const auto events = std::count(events_.begin(), events_.end(), std::uint8_t{1});
  return 1.0 - static_cast<double>(events) / static_cast<double>(size());
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.times_ == b.times_ && a.events_ == b.events_ &&
         a.covariates_.rows() == b.covariates_.rows() &&
         a.covariates_.cols() == b.covariates_.cols() && a.covariates_ == b.covariates_;
}

SurvivalCurve::SurvivalCurve(std::vector<double> times, std::vector<double> probs)
    : times_(std::move(times)), probs_(std::move(probs)) {
  if (times_.size() != probs_.size()) {
    throw Error(ErrorKind::shape, "curve times and probabilities differ in length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw Error(ErrorKind::invalid_parameter, "curve times must be strictly increasing");
    }
    if (!(probs_[i] >= 0.0 && probs_[i] <= 1.0)) {
      throw Error(ErrorKind::invalid_parameter, "curve probabilities must lie in [0,1]");
    }
    if (i > 0 && probs_[i] > probs_[i - 1]) {
      throw Error(ErrorKind::invalid_parameter, "curve probabilities must be non-increasing");
    }
  }
}

double SurvivalCurve::operator()(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 1.0;
  return probs_[static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1];
}

SurvivalCurve km_estimate(const Dataset& data) {
  if (data.empty()) throw Error(ErrorKind::empty_dataset, "cannot estimate from an empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.time(a) < data.time(b);
  });

  std::vector<double> knots;
  std::vector<double> probs;
  double s = 1.0;
  std::size_t at_risk = data.size();
  for (std::size_t k = 0; k < order.size();) {
    const double t = data.time(order[k]);
    std::size_t deaths = 0;
    std::size_t leaving = 0;
    while (k < order.size() && data.time(order[k]) == t) {
      deaths += data.event(order[k]) ? 1 : 0;
      ++leaving;
      ++k;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
    }
    knots.push_back(t);
    probs.push_back(s);
    at_risk -= leaving;
  }
  return SurvivalCurve(std::move(knots), std::move(probs));
}

double km_residual(const SurvivalCurve& curve, const Dataset& data, double t,
                   DenominatorGuard guard) {
  if (data.empty()) throw Error(ErrorKind::empty_dataset, "residual of an empty dataset");
  const double s_t = curve(t);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double ti = data.time(i);
    if (ti > t) {
      total += 1.0;
    } else if (!data.event(i)) {
      double denom = curve(ti);
      if (denom <= 0.0) {
        if (guard == DenominatorGuard::raise) {
          throw Error(ErrorKind::singular_curve,
                      "curve is zero at censored time " + std::to_string(ti));
        }
        denom = kCurveFloor;
      }
      denom = std::max(denom, kCurveFloor);
      total += s_t / denom;
    }
  }
  return s_t - total / static_cast<double>(data.size());
}

double concordance_index(const Dataset& data, const RiskScores& scores) {
  if (scores.scores.size() != data.size()) {
    throw Error(ErrorKind::shape, "risk scores are not aligned with the dataset");
  }
  double comparable = 0.0;
  double concordant = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.event(i)) continue;
    const double ti = data.time(i);
    const double si = scores.scores[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (!(data.time(j) > ti)) continue;
      comparable += 1.0;
      const double sj = scores.scores[j];
      if (si > sj) {
        concordant += 1.0;
      } else if (si == sj) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0.0) {
    throw Error(ErrorKind::undefined_cindex, "no comparable pairs");
  }
  return concordant / comparable;
}

}  // namespace scene
