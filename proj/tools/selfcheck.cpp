#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "cli.hpp"
#include "scene/generator.hpp"
#include "scene/io.hpp"
#include "scene/mlp.hpp"
#include "scene/oracle.hpp"
#include "scene/scene_loss.hpp"
#include "scene/simulation.hpp"
#include "scene/survival.hpp"
#include "scene/trainer.hpp"

namespace scene::cli {

namespace {

Dataset fuzz_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(10, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = size(rng);
  const double censor_prob = 0.8 * unit(rng);
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  RowMatrix x(n, 1);
  for (int i = 0; i < n; ++i) {
    // Coarse rounding produces ties.
    times.push_back(std::round(1.0 + 50.0 * unit(rng)) / 10.0);
    events.push_back(unit(rng) >= censor_prob ? 1 : 0);
    x(i, 0) = unit(rng);
  }
  return Dataset(std::move(times), std::move(events), std::move(x));
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

// Worst relative error of `analytic` against central differences of `f`
// over every parameter of `net`.
double fd_worst(nn::Mlp net, const nn::ParamGrads& analytic, const std::function<double(const nn::Mlp&)>& f,
                double h) {
  double worst = 0.0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.weight(l).size(); ++i) {
      const double saved = net.weight(l)(i);
      net.mutable_weight(l)(i) = saved + h;
      const double up = f(net);
      net.mutable_weight(l)(i) = saved - h;
      const double down = f(net);
      net.mutable_weight(l)(i) = saved;
      worst = std::max(worst, relative_error((up - down) / (2.0 * h), analytic.weights[l](i)));
    }
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) {
      const double saved = net.bias(l)(i);
      net.mutable_bias(l)(i) = saved + h;
      const double up = f(net);
      net.mutable_bias(l)(i) = saved - h;
      const double down = f(net);
      net.mutable_bias(l)(i) = saved;
      worst = std::max(worst, relative_error((up - down) / (2.0 * h), analytic.biases[l](i)));
    }
  }
  return worst;
}

CheckResult check(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, std::move(detail)};
}

CheckResult check_km_self_consistency() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset d = fuzz_dataset(rng);
    const SurvivalCurve km = km_estimate(d);
    for (double t : km.times()) {
      if (km(t) == 0.0) continue;
      worst = std::max(worst, std::abs(km_residual(km, d, t, DenominatorGuard::floor)));
    }
  }
  return check("kaplan-meier is self-consistent", worst < 1e-10, "max residual " + io::format_double(worst));
}

CheckResult check_oracle_matches_km() {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset d = fuzz_dataset(rng);
    const SurvivalCurve km = km_estimate(d);
    const GridSolution sol = solve_self_consistent(d, 1e-13, 1'000'000);
    for (std::size_t g = 0; g < sol.grid.size(); ++g) {
      worst = std::max(worst, std::abs(sol.values[g] - km(sol.grid[g])));
    }
  }
  return check("fixed-point oracle matches kaplan-meier", worst < 1e-8, "sup gap " + io::format_double(worst));
}

CheckResult check_mlp_backward() {
  double worst = 0.0;
  for (auto act : {nn::HiddenActivation::relu, nn::HiddenActivation::tanh}) {
    nn::Mlp net = nn::Mlp::glorot({3, 6, 5, 1}, act, nn::OutputActivation::exp, 21);
    std::mt19937_64 rng(22);
    // Nonzero biases keep ReLU pre-activations away from the kink at 0.
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) {
        net.mutable_bias(l)(i) = std::uniform_real_distribution<double>(0.05, 0.3)(rng);
      }
    }
    Eigen::MatrixXd in(3, 4);
    for (Eigen::Index i = 0; i < in.size(); ++i) in(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
    Eigen::RowVectorXd up(4);
    up << 0.3, -1.2, 0.7, 2.0;
    const nn::BatchBackward back = nn::backward_batch(net, nn::forward_batch(net, in), up);
    worst = std::max(worst, fd_worst(net, back.grads, [&](const nn::Mlp& m) {
      return nn::evaluate_batch(m, in).dot(up);
    }, 1e-6));
  }
  return check("mlp backward matches finite differences", worst < 1e-5, "max rel err " + io::format_double(worst));
}

struct LossFixture {
  Dataset batch;
  std::vector<double> points;
  GeneratorModel gen;
  nn::Mlp phi;
  LossSettings settings;
};

LossFixture loss_fixture() {
  sim::SimulationSpec spec = sim::SimulationSpec::defaults(sim::Model::ph);
  spec.n = 6;
  spec.p = 2;
  spec.tau = 19.0;
  spec.seed = 31;
  LossFixture fx{sim::simulate(spec), {},
                 GeneratorModel::create(2, 2, {8, 8}, nn::HiddenActivation::tanh, 32),
                 nn::Mlp::glorot({2, 6, 1}, nn::HiddenActivation::tanh, nn::OutputActivation::sigmoid, 33),
                 {}};
  fx.points = fx.batch.times();
  fx.settings.k = 50;
  fx.settings.temperature = 0.5;
  fx.settings.seed = 34;
  return fx;
}

CheckResult check_generator_grad() {
  const LossFixture fx = loss_fixture();
  const GradientStep step = generator_step(fx.gen, fx.phi, fx.batch, fx.points, fx.settings);
  const BatchSamples samples = draw_batch_samples(fx.gen, fx.batch, fx.settings.k, fx.settings.seed);
  const Eigen::VectorXd phis = phi_values(fx.phi, fx.batch);
  const auto n = static_cast<Eigen::Index>(fx.batch.size());
  const int k = fx.settings.k;

  // Right-hand terms at the current generator are held fixed.
  const Eigen::RowVectorXd base = nn::evaluate_batch(fx.gen.net, samples.inputs);
  Eigen::MatrixXd base_times(n, k);
  for (Eigen::Index i = 0; i < n; ++i) base_times.row(i) = base.segment(i * k, k);
  const LossBatch exact = make_loss_batch(fx.batch, fx.points, base_times, phis, fx.settings.effective_floor(),
                                          fx.settings.guard);
  std::vector<double> right;
  for (std::size_t j = 0; j < fx.points.size(); ++j) right.push_back(loss_terms(exact, j).right);

  auto objective = [&](const nn::Mlp& net) {
    const Eigen::RowVectorXd out = nn::evaluate_batch(net, samples.inputs);
    double total = 0.0;
    for (std::size_t j = 0; j < fx.points.size(); ++j) {
      double left = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < k; ++c) s += logistic((out(i * k + c) - fx.points[j]) / fx.settings.temperature);
        left += s / k * phis(i);
      }
      const double r = left / static_cast<double>(n) - right[j];
      total += r * r;
    }
    return total / static_cast<double>(fx.points.size());
  };
  const double worst = fd_worst(fx.gen.net, step.grads, objective, 1e-6);
  return check("generator gradient matches finite differences", worst < 1e-4,
               "max rel err " + io::format_double(worst));
}

CheckResult check_phi_grad() {
  const LossFixture fx = loss_fixture();
  const nn::ParamGrads g = phi_grad(fx.gen, fx.phi, fx.batch, fx.points, fx.settings);
  auto objective = [&](const nn::Mlp& phi) { return scene_loss(fx.gen, phi, fx.batch, fx.points, fx.settings).c_tilde; };
  const double worst = fd_worst(fx.phi, g, objective, 1e-6);
  return check("weight-function gradient matches finite differences", worst < 1e-5,
               "max rel err " + io::format_double(worst));
}

CheckResult check_model_round_trip() {
  TrainConfig cfg;
  cfg.gen_arch.hidden = {4, 3};
  cfg.phi_arch.hidden = {3};
  cfg.aux_dim = 2;
  cfg.seed = 41;
  TrainedModel model = initial_model(3, cfg);
  model.generator.pruned[1] = 1;
  const std::string text = trained_model_to_json(model);
  const TrainedModel back = trained_model_from_json(text);
  const bool ok = back.generator == model.generator && back.phi == model.phi && trained_model_to_json(back) == text;
  return check("model json round trip", ok);
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<std::function<CheckResult()>> checks{check_km_self_consistency, check_oracle_matches_km,
                                                   check_mlp_backward,        check_generator_grad,
                                                   check_phi_grad,            check_model_round_trip};
  std::vector<CheckResult> results;
  for (const auto& c : checks) {
    try {
      results.push_back(c());
    } catch (const std::exception& e) {
      results.push_back({"check raised", false, e.what()});
    }
  }
  return results;
}

}  // namespace scene::cli
