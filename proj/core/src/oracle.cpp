#include "scene/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>

#include "scene/error.hpp"

namespace scene {

GridSolution solve_self_consistent(const Dataset& data, double tol, long max_iter,
                                   std::vector<double>* trace) {
  if (data.empty()) throw Error(ErrorKind::empty_dataset, "cannot solve on an empty dataset");
  if (!(tol > 0.0)) throw Error(ErrorKind::invalid_parameter, "tolerance must be positive");

  GridSolution sol;
  sol.grid = data.times();
  std::sort(sol.grid.begin(), sol.grid.end());
  sol.grid.erase(std::unique(sol.grid.begin(), sol.grid.end()), sol.grid.end());
  const std::size_t g = sol.grid.size();
  const double t_max = sol.grid.back();
  const double n = static_cast<double>(data.size());

  // Per grid point: records observed exactly there, records strictly later,
  // and censored records exactly there (contributing 1/S at that point).
  std::vector<double> at(g, 0.0), censored_at(g, 0.0), beyond(g, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(sol.grid.begin(), sol.grid.end(), data.time(i)) - sol.grid.begin());
    if (!data.event(i) && data.time(i) == t_max) {
      // Treated as surviving past every grid point.
      for (double& b : beyond) b += 1.0;
      continue;
    }
    at[pos] += 1.0;
    if (!data.event(i)) censored_at[pos] += 1.0;
  }
  double later = 0.0;
  for (std::size_t k = g; k-- > 0;) {
    beyond[k] += later;
    later += at[k];
  }

  // All-event empirical survival: fraction of observed times > t.
  std::vector<double> s(g);
  for (std::size_t k = 0; k < g; ++k) s[k] = beyond[k] / n;

  std::vector<double> next(g);
  for (long it = 1; it <= max_iter; ++it) {
    double cumulative = 0.0;  // sum over censored t_i <= t of 1 / S(t_i)
    double change = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
      if (censored_at[k] > 0.0) cumulative += censored_at[k] / std::max(s[k], kCurveFloor);
      next[k] = (beyond[k] + s[k] * cumulative) / n;
      change = std::max(change, std::abs(next[k] - s[k]));
    }
    s.swap(next);
    sol.iterations = it;
    sol.final_sup_residual = change;
    if (trace) trace->push_back(change);
    if (change < tol) {
      sol.values = std::move(s);
      for (std::size_t k = 1; k < g; ++k) {
        // Monotone up to rounding; clamp so the result is a valid curve.
        sol.values[k] = std::clamp(sol.values[k], 0.0, sol.values[k - 1]);
      }
      sol.values[0] = std::clamp(sol.values[0], 0.0, 1.0);
      return sol;
    }
  }
  throw NonConvergenceError("self-consistency iteration did not converge in " +
                                std::to_string(max_iter) + " iterations (last change " +
                                std::to_string(sol.final_sup_residual) + ")",
                            sol.final_sup_residual);
}

ConditionalCurve generator_curve(const GeneratorModel& model, int k, std::uint64_t seed) {
  // Sorted samples cached per covariate vector so repeated t queries are cheap.
  auto cache = std::make_shared<std::map<std::vector<double>, std::vector<double>>>();
  return [model, k, seed, cache](double t, std::span<const double> x) {
    std::vector<double> key(x.begin(), x.end());
    auto it = cache->find(key);
    if (it == cache->end()) {
      SampleBatch b = sample_times(model, x, k, seed);
      std::sort(b.times.begin(), b.times.end());
      it = cache->emplace(std::move(key), std::move(b.times)).first;
    }
    const auto& times = it->second;
    const auto above = std::distance(std::upper_bound(times.begin(), times.end(), t), times.end());
    return static_cast<double>(above) / static_cast<double>(times.size());
  };
}

std::vector<double> conditional_residual_profile(const ConditionalCurve& model, const Dataset& data,
                                                 std::span<const double> x_probe,
                                                 double kernel_bandwidth, std::span<const double> grid,
                                                 double min_support) {
  if (!(kernel_bandwidth > 0.0)) {
    throw Error(ErrorKind::invalid_parameter, "kernel bandwidth must be positive");
  }
  if (static_cast<int>(x_probe.size()) != data.covariate_dim()) {
    throw Error(ErrorKind::shape, "probe dimension does not match dataset covariates");
  }
  const std::size_t n = data.size();
  std::vector<double> w(n);
  double sum_w = 0.0, sum_w2 = 0.0;
  const double inv_2h2 = 1.0 / (2.0 * kernel_bandwidth * kernel_bandwidth);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.covariates(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - x_probe[j]) * (x[j] - x_probe[j]);
    w[i] = std::exp(-d2 * inv_2h2);
    sum_w += w[i];
    sum_w2 += w[i] * w[i];
  }
  const double ess = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
  if (!(ess >= min_support)) {
    throw Error(ErrorKind::insufficient_support,
                "effective local sample " + std::to_string(ess) + " below " + std::to_string(min_support));
  }

  std::vector<double> own(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!data.event(i)) own[i] = std::max(model(data.time(i), data.covariates(i)), kCurveFloor);
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] == 0.0) continue;
      const double s_t = model(t, data.covariates(i));
      double rhs = 0.0;
      if (data.time(i) > t) {
        rhs = 1.0;
      } else if (!data.event(i)) {
        rhs = s_t / own[i];
      }
      acc += w[i] * (s_t - rhs);
    }
    out.push_back(acc / sum_w);
  }
  return out;
}

std::vector<double> conditional_residual_profile(const GeneratorModel& model, const Dataset& data,
                                                 std::span<const double> x_probe,
                                                 double kernel_bandwidth, std::span<const double> grid,
                                                 int k, std::uint64_t seed) {
  return conditional_residual_profile(generator_curve(model, k, seed), data, x_probe, kernel_bandwidth,
                                      grid);
}

}  // namespace scene
