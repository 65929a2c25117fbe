#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scene/survival.hpp"

namespace scene::sim {

enum class Model { ph, po };

std::string_view to_string(Model m) noexcept;
Model parse_model(std::string_view name);

/// Data-generating process. Covariates iid Uniform[-1,1]^p, censoring
/// Uniform[0, tau], event times by inverse CDF.
struct SimulationSpec {
  Model model = Model::ph;
  std::size_t n = 4000;
  int p = 5;
  double tau = 5.0;
  double r = 0.7;
  double lambda = -2.302585092994046;  // log(0.1)
  std::uint64_t seed = 0;

  /// r = 0.7 for PH and 0.5 for PO, lambda = log(0.1).
  static SimulationSpec defaults(Model model);
  void validate() const;
};

/// f(x) = -(x_1^2 + x_2^2) / (2 r^2).
double risk_exponent(std::span<const double> x, double r);

/// PH hazard exp(lambda * e^{f(x)}); constant in t.
double ph_hazard(std::span<const double> x, const SimulationSpec& spec);

/// S(t|x) = exp(-t * ph_hazard(x)).
double ph_true_survival(double t, std::span<const double> x, const SimulationSpec& spec);

/// S(t|x) = 1 / (1 + t e^{f(x)}).
double po_true_survival(double t, std::span<const double> x, const SimulationSpec& spec);

/// Ground-truth conditional law of the event time for a given spec.
class TruthOracle {
 public:
  explicit TruthOracle(SimulationSpec spec);

  const SimulationSpec& spec() const noexcept { return spec_; }
  double survival(double t, std::span<const double> x) const;
  /// Time t with S(t|x) = 1 - q, q in (0,1).
  double quantile(double q, std::span<const double> x) const;

 private:
  SimulationSpec spec_;
};

double true_quantile(double q, std::span<const double> x, const SimulationSpec& spec);

Dataset simulate(const SimulationSpec& spec);

/// Subject 1 drawn Uniform[-1,1]^p from the spec seed; subjects 2-4 constant
/// 0.25, 0.5 and 0.75 in every coordinate.
std::array<std::vector<double>, 4> test_subjects(const SimulationSpec& spec);

/// `{model, N, p, tau, r, seed, realized_censoring_rate}` sidecar document.
std::string sidecar_json(const SimulationSpec& spec, const Dataset& data);

}  // namespace scene::sim
