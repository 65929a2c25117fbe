#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "finite_diff.hpp"
#include "fixtures.hpp"
#include "scene/error.hpp"
#include "scene/simulation.hpp"
#include "scene/trainer.hpp"

using namespace scene;

namespace {

TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  cfg.k = 30;
  cfg.aux_dim = 2;
  cfg.temperature = 0.3;
  cfg.gen_arch.hidden = {8, 8};
  cfg.phi_arch.hidden = {6};
  cfg.seed = seed;
  return cfg;
}

Dataset ph_data(std::size_t n, int p, std::uint64_t seed) {
  sim::SimulationSpec spec = sim::SimulationSpec::defaults(sim::Model::ph);
  spec.n = n;
  spec.p = p;
  spec.tau = 19.0;
  spec.seed = seed;
  return sim::simulate(spec);
}

// Sum over every input-to-output path of the product of absolute weights.
std::vector<double> path_importance(const nn::Mlp& net) {
  std::vector<double> gamma(static_cast<std::size_t>(net.input_dim()), 0.0);
  const auto& w1 = net.weight(0);
  const auto& w2 = net.weight(1);
  const auto& w3 = net.weight(2);
  for (Eigen::Index in = 0; in < w1.cols(); ++in) {
    for (Eigen::Index a = 0; a < w1.rows(); ++a) {
      for (Eigen::Index b = 0; b < w2.rows(); ++b) {
        gamma[static_cast<std::size_t>(in)] += std::abs(w3(0, b)) * std::abs(w2(b, a)) * std::abs(w1(a, in));
      }
    }
  }
  return gamma;
}

}  // namespace

TEST_CASE("importance of a two-layer net by hand") {
  nn::Mlp net({2, 2, 1}, nn::HiddenActivation::relu, nn::OutputActivation::exp);
  net.mutable_weight(0) << 1, 0, 0, -3;
  net.mutable_weight(1) << -1, 2;
  const ImportanceVector iv = variable_importance(GeneratorModel(net, 1));
  CHECK(iv.gamma == std::vector<double>{1.0, 6.0});
  CHECK(iv.threshold == 1.0);
}

TEST_CASE("importance equals path enumeration on random nets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GeneratorModel g = GeneratorModel::create(4, 3, {5, 6}, nn::HiddenActivation::relu, seed);
    const ImportanceVector iv = variable_importance(g);
    const std::vector<double> brute = path_importance(g.net);
    REQUIRE(iv.gamma.size() == brute.size());
    for (std::size_t j = 0; j < brute.size(); ++j) CHECK(iv.gamma[j] == doctest::Approx(brute[j]).epsilon(1e-12));
    CHECK(iv.threshold == doctest::Approx((brute[0] + brute[1] + brute[2]) / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("zero first-layer column has zero importance") {
  GeneratorModel g = GeneratorModel::create(3, 2, {4}, nn::HiddenActivation::relu, 1);
  g.net.mutable_weight(0).col(3).setZero();
  CHECK(variable_importance(g).gamma[3] == 0.0);
}

TEST_CASE("selection leaves important covariates alone") {
  GeneratorModel g = GeneratorModel::create(2, 2, {4}, nn::HiddenActivation::relu, 1);
  g.net.mutable_weight(0).col(2).setConstant(10.0);
  g.net.mutable_weight(0).col(3).setConstant(10.0);
  const GeneratorModel before = g;
  CHECK(apply_selection(g, variable_importance(g)).empty());
  CHECK(g == before);
}

TEST_CASE("selection masks weak covariates and makes the output ignore them") {
  GeneratorModel g = GeneratorModel::create(3, 2, {6}, nn::HiddenActivation::tanh, 2);
  g.net.mutable_weight(0).col(2 + 0) *= 10.0;
  g.net.mutable_weight(0).col(2 + 1) *= 1e-4;  // covariate 1 is weak
  g.net.mutable_weight(0).col(2 + 2) *= 10.0;
  const std::vector<int> pruned = apply_selection(g, variable_importance(g));
  CHECK(pruned == std::vector<int>{1});
  CHECK(g.pruned_covariates() == std::vector<int>{1});
  CHECK(g.net.weight(0).col(3).isZero());
  CHECK(variable_importance(g).gamma[3] == 0.0);
  const Eigen::MatrixXd aux = testing::uniform_matrix(2, 10, 4);
  const std::vector<double> a{0.1, -0.9, 0.4}, b{0.1, 0.7, 0.4};
  CHECK(nn::evaluate_batch(g.net, generator_inputs(aux, a)) == nn::evaluate_batch(g.net, generator_inputs(aux, b)));
  // Masks are cumulative.
  CHECK(apply_selection(g, variable_importance(g)).empty());
  CHECK(g.pruned[1] == 1);
}

TEST_CASE("epochs convert to iterations with a ceiling") {
  CHECK(epochs_to_iterations(50, 4000, 5) == 40000);
  CHECK(epochs_to_iterations(1, 5, 5) == 1);
  CHECK(epochs_to_iterations(1, 7, 5) == 2);
  CHECK_THROWS_AS(epochs_to_iterations(1, 0, 5), Error);
}

TEST_CASE("zero epochs returns the initial model") {
  const Dataset d = ph_data(20, 2, 1);
  TrainConfig cfg = tiny_config(3);
  cfg.epochs = 0;
  const TrainedModel m = train(d, cfg);
  const TrainedModel init = initial_model(2, cfg);
  CHECK(m.history.empty());
  CHECK(m.generator == init.generator);
  CHECK(m.phi == init.phi);
}

TEST_CASE("training is bit-reproducible") {
  const Dataset d = ph_data(40, 3, 2);
  const TrainConfig cfg = tiny_config(5);
  const TrainedModel a = train(d, cfg);
  const TrainedModel b = train(d, cfg);
  CHECK(a.generator == b.generator);
  CHECK(a.phi == b.phi);
  CHECK(trained_model_to_json(a) == trained_model_to_json(b));
  CHECK(history_to_csv(a.history) == history_to_csv(b.history));
  CHECK(a.history.size() == 16);
  TrainConfig other = cfg;
  other.seed = 6;
  CHECK_FALSE(train(d, other).generator == a.generator);
}

TEST_CASE("one iteration updates the generator first, then the weight function against it") {
  const Dataset d = ph_data(12, 2, 4);
  TrainConfig cfg = tiny_config(9);
  cfg.gen_optimizer.learning_rate = 0.5;  // large enough to move samples across time points
  IterationSampler sampler(cfg);
  const IterationInputs in = sampler.next(d);
  CHECK(in.records.size() == 5);
  CHECK(in.time_points.size() == 5);
  std::vector<std::size_t> sorted = in.records;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

  TrainedModel model = initial_model(2, cfg);
  const TrainedModel start = model;
  OptimizerPair opt{nn::OptimizerState(model.generator.net, cfg.gen_optimizer),
                    nn::OptimizerState(model.phi, cfg.phi_optimizer)};
  train_iteration(model, opt, d, in, cfg, 1);

  // Replay by hand.
  const Dataset batch = d.subset(in.records);
  LossSettings s;
  s.k = cfg.k;
  s.temperature = cfg.temperature;
  s.seed = in.generator_seed;
  GeneratorModel gen = start.generator;
  nn::Mlp phi = start.phi;
  nn::OptimizerState gs(gen.net, cfg.gen_optimizer), ps(phi, cfg.phi_optimizer);
  nn::optimizer_step(gen.net, generator_grad(gen, phi, batch, in.time_points, s), gs, nn::Direction::descent);
  s.seed = in.phi_seed;
  nn::optimizer_step(phi, phi_grad(gen, phi, batch, in.time_points, s), ps, nn::Direction::ascent);
  CHECK(model.generator == gen);
  CHECK(model.phi == phi);

  // The weight-function step must not use the stale generator.
  nn::Mlp stale = start.phi;
  nn::OptimizerState ss(stale, cfg.phi_optimizer);
  nn::optimizer_step(stale, phi_grad(start.generator, start.phi, batch, in.time_points, s), ss, nn::Direction::ascent);
  CHECK_FALSE(stale == model.phi);
}

TEST_CASE("selection keeps masked columns at zero for the rest of training") {
  const Dataset d = ph_data(60, 6, 3);
  TrainConfig cfg = tiny_config(11);
  cfg.epochs = 1;
  cfg.vs_epochs = 2;
  cfg.variable_selection = true;
  cfg.gen_optimizer = {nn::OptimizerKind::sgd_momentum, 5e-2, 0.9, 0.0, 0.0, 1e-8};
  const TrainedModel m = train(d, cfg);
  CHECK(m.selection_start == 12);
  CHECK(m.history.size() == 36);
  for (int j : m.pruned_covariates()) CHECK(m.generator.net.weight(0).col(cfg.aux_dim + j).isZero());
  // Masks never shrink: every column pruned is still zero after all steps.
  const ImportanceVector iv = variable_importance(m.generator);
  for (int j : m.pruned_covariates()) CHECK(iv.gamma[static_cast<std::size_t>(cfg.aux_dim + j)] == 0.0);
}

TEST_CASE("training rejects undersized data") {
  const Dataset d = ph_data(4, 2, 1);
  CHECK_THROWS_AS(train(d, tiny_config(1)), Error);
  TrainConfig cfg = tiny_config(1);
  cfg.time_points = 10;
  CHECK_THROWS_AS(train(ph_data(8, 2, 1), cfg), Error);
}

TEST_CASE("config parsing") {
  const std::string text =
      "# desk scale\n"
      "model.gen_arch = 256,256,256\n"
      "model.phi_arch = tanh:64-64\n"
      "train.epochs = 10\n"
      "train.K = 200\n"
      "train.temperature = 0.25\n"
      "train.variable_selection = true\n"
      "opt.phi.kind = adam\n"
      "opt.phi.beta1 = 0.5\n"
      "seed = 42\n";
  std::vector<std::string> keys;
  const TrainConfig cfg = parse_train_config(text, TrainConfig{}, &keys);
  CHECK(cfg.gen_arch.hidden == std::vector<int>{256, 256, 256});
  CHECK(cfg.phi_arch.hidden == std::vector<int>{64, 64});
  CHECK(cfg.phi_arch.activation == nn::HiddenActivation::tanh);
  CHECK(cfg.epochs == 10);
  CHECK(cfg.k == 200);
  CHECK(cfg.temperature == 0.25);
  CHECK(cfg.variable_selection);
  CHECK(cfg.phi_optimizer.kind == nn::OptimizerKind::adam);
  CHECK(cfg.phi_optimizer.beta1 == 0.5);
  CHECK(cfg.seed == 42);
  CHECK(keys.size() == 9);
  CHECK(cfg.batch_size == 5);

  const TrainConfig back = parse_train_config(format_train_config(cfg));
  CHECK(format_train_config(back) == format_train_config(cfg));

  auto kind = [](const std::string& t) {
    try {
      parse_train_config(t);
    } catch (const Error& e) {
      return std::string(kind_name(e.kind())) + ": " + e.what();
    }
    return std::string("ok");
  };
  CHECK(kind("train.bogus = 1\n").starts_with("config: unknown key"));
  CHECK(kind("seed = 1\nseed = 2\n").starts_with("config: duplicate key"));
  CHECK(kind("train.epochs = -1\n").starts_with("config:"));
  CHECK(kind("train.K = many\n").starts_with("config:"));
  CHECK(kind("just words\n").starts_with("config:"));
  CHECK(kind("opt.gen.lr = 0\n").starts_with("config:"));
}

TEST_CASE("low- and high-dimensional defaults") {
  const TrainConfig low = TrainConfig::low_dim_defaults();
  CHECK(low.gen_arch.hidden == std::vector<int>{1000, 1000, 1000});
  CHECK(low.phi_arch.hidden == std::vector<int>{1000, 1000});
  CHECK(low.gen_optimizer.kind == nn::OptimizerKind::adam);
  CHECK(low.gen_optimizer.learning_rate == 2e-4);
  CHECK(low.gen_optimizer.beta1 == 0.0);
  CHECK(low.gen_optimizer.beta2 == 0.9);
  CHECK(low.phi_optimizer.kind == nn::OptimizerKind::sgd_momentum);
  CHECK(low.phi_optimizer.momentum == 0.9);
  CHECK(low.k == 400);
  CHECK(low.aux_dim == 5);
  CHECK(low.epochs == 50);
  const TrainConfig high = TrainConfig::high_dim_defaults();
  CHECK(high.gen_arch.hidden == std::vector<int>{100, 100, 100});
  CHECK(high.phi_optimizer.kind == nn::OptimizerKind::adam);
  CHECK(high.phi_optimizer.beta1 == 0.5);
  CHECK(high.phi_optimizer.beta2 == 0.999);
  CHECK(high.variable_selection);
  CHECK(high.epochs == 120);
  CHECK(high.vs_epochs == 20);
}

TEST_CASE("trained model json round trip") {
  const Dataset d = ph_data(20, 3, 8);
  TrainedModel m = train(d, tiny_config(2));
  m.generator.pruned[2] = 1;
  const std::string text = trained_model_to_json(m);
  const TrainedModel back = trained_model_from_json(text);
  CHECK(back.generator == m.generator);
  CHECK(back.phi == m.phi);
  CHECK(trained_model_to_json(back) == text);
  CHECK_THROWS_AS(trained_model_from_json("{}"), Error);
  const std::string csv = history_to_csv(m.history);
  CHECK(csv.starts_with("iter,c_tilde,grad_norm_omega,grad_norm_zeta\n1,"));
}
