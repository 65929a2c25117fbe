#include "scene/simulation.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "scene/error.hpp"

namespace scene::sim {

namespace {

// Independent sub-streams for covariates, event-time uniforms and censoring.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

// Uniform on the open interval (0, 1).
double open_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = 0.0;
  do {
    v = u(rng);
  } while (v <= 0.0);
  return v;
}

}  // namespace

std::string_view to_string(Model m) noexcept { return m == Model::ph ? "ph" : "po"; }

Model parse_model(std::string_view name) {
  if (name == "ph") return Model::ph;
  if (name == "po") return Model::po;
  throw Error(ErrorKind::invalid_spec, "unknown model '" + std::string(name) + "', expected ph or po");
}

SimulationSpec SimulationSpec::defaults(Model model) {
  SimulationSpec s;
  s.model = model;
  s.r = model == Model::ph ? 0.7 : 0.5;
  return s;
}

void SimulationSpec::validate() const {
  if (n < 1) throw Error(ErrorKind::invalid_spec, "N must be at least 1");
  if (p < 2) throw Error(ErrorKind::invalid_spec, "p must be at least 2 (risk uses x1 and x2)");
  if (!(tau > 0.0)) throw Error(ErrorKind::invalid_spec, "tau must be positive");
  if (!(r > 0.0)) throw Error(ErrorKind::invalid_spec, "r must be positive");
}

double risk_exponent(std::span<const double> x, double r) {
  if (x.size() < 2) throw Error(ErrorKind::invalid_spec, "risk exponent needs at least two covariates");
  return -(x[0] * x[0] + x[1] * x[1]) / (2.0 * r * r);
}

double ph_hazard(std::span<const double> x, const SimulationSpec& spec) {
  return std::exp(spec.lambda * std::exp(risk_exponent(x, spec.r)));
}

double ph_true_survival(double t, std::span<const double> x, const SimulationSpec& spec) {
  return std::exp(-t * ph_hazard(x, spec));
}

double po_true_survival(double t, std::span<const double> x, const SimulationSpec& spec) {
  return 1.0 / (1.0 + t * std::exp(risk_exponent(x, spec.r)));
}

TruthOracle::TruthOracle(SimulationSpec spec) : spec_(spec) {}

double TruthOracle::survival(double t, std::span<const double> x) const {
  return spec_.model == Model::ph ? ph_true_survival(t, x, spec_) : po_true_survival(t, x, spec_);
}

double TruthOracle::quantile(double q, std::span<const double> x) const {
  return true_quantile(q, x, spec_);
}

double true_quantile(double q, std::span<const double> x, const SimulationSpec& spec) {
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(ErrorKind::invalid_quantile, "quantile level must lie in (0,1)");
  }
  if (spec.model == Model::ph) return -std::log1p(-q) / ph_hazard(x, spec);
  return (q / (1.0 - q)) * std::exp(-risk_exponent(x, spec.r));
}

Dataset simulate(const SimulationSpec& spec) {
  spec.validate();
  auto x_rng = stream(spec.seed, 1);
  auto t_rng = stream(spec.seed, 2);
  auto c_rng = stream(spec.seed, 3);
  std::uniform_real_distribution<double> cov(-1.0, 1.0);

  RowMatrix x(static_cast<Eigen::Index>(spec.n), spec.p);
  std::vector<double> times(spec.n);
  std::vector<std::uint8_t> events(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (int j = 0; j < spec.p; ++j) x(row, j) = cov(x_rng);
    const std::span<const double> xi(x.data() + row * spec.p, static_cast<std::size_t>(spec.p));
    const double event_time = true_quantile(open_unit(t_rng), xi, spec);
    const double censor_time = spec.tau * open_unit(c_rng);
    events[i] = event_time <= censor_time ? 1 : 0;
    times[i] = events[i] ? event_time : censor_time;
  }
  return Dataset(std::move(times), std::move(events), std::move(x));
}

std::array<std::vector<double>, 4> test_subjects(const SimulationSpec& spec) {
  if (spec.p < 2) throw Error(ErrorKind::invalid_spec, "test subjects need p >= 2");
  const auto p = static_cast<std::size_t>(spec.p);
  auto rng = stream(spec.seed, 4);
  std::uniform_real_distribution<double> cov(-1.0, 1.0);
  std::vector<double> first(p);
  for (double& v : first) v = cov(rng);
  return {first, std::vector<double>(p, 0.25), std::vector<double>(p, 0.5), std::vector<double>(p, 0.75)};
}

std::string sidecar_json(const SimulationSpec& spec, const Dataset& data) {
  nlohmann::json doc{{"model", to_string(spec.model)},
                     {"N", spec.n},
                     {"p", spec.p},
                     {"tau", spec.tau},
                     {"r", spec.r},
                     {"seed", spec.seed},
                     {"realized_censoring_rate", data.censoring_rate()}};
  return doc.dump(1) + "\n";
}

}  // namespace scene::sim
