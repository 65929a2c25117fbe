#include "scene/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "scene/error.hpp"

namespace scene {

GeneratorModel::GeneratorModel(nn::Mlp network, int aux)
    : net(std::move(network)), aux_dim(aux) {
  if (aux_dim < 1 || aux_dim >= net.input_dim()) {
    throw Error(ErrorKind::invalid_architecture,
                "auxiliary dim " + std::to_string(aux_dim) + " does not fit input dim " +
                    std::to_string(net.input_dim()));
  }
  if (net.output_activation() != nn::OutputActivation::exp) {
    throw Error(ErrorKind::invalid_architecture, "generator needs an exp output head");
  }
  pruned.assign(static_cast<std::size_t>(net.input_dim() - aux_dim), 0);
}

GeneratorModel GeneratorModel::create(int covariate_dim, int aux_dim, const std::vector<int>& hidden,
                                      nn::HiddenActivation activation, std::uint64_t seed) {
  std::vector<int> dims;
  dims.push_back(aux_dim + covariate_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  return GeneratorModel(nn::Mlp::glorot(std::move(dims), activation, nn::OutputActivation::exp, seed),
                        aux_dim);
}

std::vector<int> GeneratorModel::pruned_covariates() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < pruned.size(); ++j) {
    if (pruned[j]) out.push_back(static_cast<int>(j));
  }
  return out;
}

Eigen::MatrixXd generator_inputs(const Eigen::MatrixXd& aux, std::span<const double> x) {
  Eigen::MatrixXd in(aux.rows() + static_cast<Eigen::Index>(x.size()), aux.cols());
  in.topRows(aux.rows()) = aux;
  for (std::size_t j = 0; j < x.size(); ++j) {
    in.row(aux.rows() + static_cast<Eigen::Index>(j)).setConstant(x[j]);
  }
  return in;
}

namespace {

void check_covariates(const GeneratorModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.covariate_dim()) {
    throw Error(ErrorKind::shape, "covariate vector has length " + std::to_string(x.size()) +
                                      ", generator expects " + std::to_string(model.covariate_dim()));
  }
}

void check_finite(const Eigen::RowVectorXd& out) {
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    if (!std::isfinite(out(k))) {
      throw DivergedError("generator produced a non-finite time", static_cast<long>(k));
    }
  }
}

}  // namespace

SampleBatch sample_times(const GeneratorModel& model, std::span<const double> x, int k,
                         std::uint64_t seed) {
  check_covariates(model, x);
  if (k < 1) throw Error(ErrorKind::invalid_parameter, "K must be at least 1");
  std::mt19937_64 rng(seed);
  SampleBatch batch;
  batch.aux = draw_aux(model.aux_dim, k, rng);
  const Eigen::RowVectorXd out = nn::evaluate_batch(model.net, generator_inputs(batch.aux, x));
  check_finite(out);
  batch.times.assign(out.data(), out.data() + out.size());
  return batch;
}

double empirical_survival(std::span<const double> times, double t) {
  if (times.empty()) return 1.0;
  std::size_t above = 0;
  for (double v : times) above += v > t ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(times.size());
}

SmoothedSurvival smoothed_survival(const GeneratorModel& model, std::span<const double> x,
                                   const Eigen::MatrixXd& aux, double t, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::invalid_parameter, "temperature must be positive");
  }
  check_covariates(model, x);
  const nn::ForwardCache cache = nn::forward_batch(model.net, generator_inputs(aux, x));
  check_finite(cache.output);
  const auto k = cache.output.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  double value = 0.0;
  Eigen::RowVectorXd upstream(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double s = logistic((cache.output(i) - t) / temperature);
    value += s;
    upstream(i) = inv_k * s * (1.0 - s) / temperature;
  }
  nn::BatchBackward back = nn::backward_batch(model.net, cache, upstream);
  return {value * inv_k, std::move(back.grads)};
}

double risk_score(const GeneratorModel& model, std::span<const double> x, int k,
                  std::uint64_t seed) {
  const SampleBatch batch = sample_times(model, x, k, seed);
  double sum = 0.0;
  for (double t : batch.times) sum += t;
  return -sum / static_cast<double>(batch.times.size());
}

std::vector<double> survival_on_grid(const GeneratorModel& model, std::span<const double> x,
                                     std::span<const double> grid, int k, std::uint64_t seed) {
  SampleBatch batch = sample_times(model, x, k, seed);
  std::sort(batch.times.begin(), batch.times.end());
  std::vector<double> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(batch.times.size());
  for (double t : grid) {
    const auto it = std::upper_bound(batch.times.begin(), batch.times.end(), t);
    out.push_back(static_cast<double>(std::distance(it, batch.times.end())) / n);
  }
  return out;
}

}  // namespace scene
