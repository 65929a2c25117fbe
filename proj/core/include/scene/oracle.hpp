#pragma once

#include <functional>
#include <span>
#include <vector>

#include "scene/generator.hpp"
#include "scene/survival.hpp"

namespace scene {

struct GridSolution {
  std::vector<double> grid;    // sorted distinct observed times
  std::vector<double> values;  // survival value at each grid time
  long iterations = 0;
  double final_sup_residual = 0.0;

  SurvivalCurve curve() const { return SurvivalCurve(grid, values); }
};

/// Iterates the empirical self-consistency map
///   S'(t) = (1/N) sum { I(t_i > t) + (1 - d_i) I(t_i <= t) S(t) / S(t_i) }
/// on the grid of distinct observed times, starting from the all-event
/// empirical survival, until the sup-norm change drops below `tol`.
///
/// The equation places no constraint on S at the largest observed time when
/// only censored records remain there (any value is a fixed point), so
/// censored records at the maximum time are counted as surviving past it.
/// Denominators are floored at 1e-12. If `trace` is given it receives the
/// sup-norm change of every iteration.
GridSolution solve_self_consistent(const Dataset& data, double tol = 1e-10, long max_iter = 10000,
                                   std::vector<double>* trace = nullptr);

/// Conditional survival source S(t | x).
using ConditionalCurve = std::function<double(double t, std::span<const double> x)>;

/// A generator evaluated through its empirical survival, K samples per
/// distinct covariate vector drawn with `seed`.
ConditionalCurve generator_curve(const GeneratorModel& model, int k, std::uint64_t seed);

/// Kernel-localized self-consistency imbalance around `x_probe`:
///   sum_i w_i [S(t|x_i) - I(t_i > t) - (1-d_i) I(t_i <= t) S(t|x_i)/S(t_i|x_i)] / sum_i w_i
/// with Gaussian product weights w_i of the given bandwidth. Throws
/// insufficient-support if the effective sample size (sum w)^2 / sum w^2 is
/// below `min_support`.
std::vector<double> conditional_residual_profile(const ConditionalCurve& model, const Dataset& data,
                                                 std::span<const double> x_probe,
                                                 double kernel_bandwidth, std::span<const double> grid,
                                                 double min_support = 30.0);

std::vector<double> conditional_residual_profile(const GeneratorModel& model, const Dataset& data,
                                                 std::span<const double> x_probe,
                                                 double kernel_bandwidth, std::span<const double> grid,
                                                 int k = 400, std::uint64_t seed = 0);

}  // namespace scene
