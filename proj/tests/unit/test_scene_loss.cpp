#include <doctest.h>

#include <cmath>
#include <random>

#include "finite_diff.hpp"
#include "fixtures.hpp"
#include "scene/error.hpp"
#include "scene/scene_loss.hpp"
#include "scene/simulation.hpp"

using namespace scene;

namespace {

LossBatch batch_from_curve(const Dataset& d, const SurvivalCurve& s, std::vector<double> points, double phi) {
  LossBatch b;
  b.times = d.times();
  b.events = d.events();
  b.time_points = std::move(points);
  const auto n = static_cast<Eigen::Index>(d.size());
  const auto m = static_cast<Eigen::Index>(b.time_points.size());
  b.point_survival.resize(n, m);
  b.own_survival.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.own_survival(i) = s(d.time(static_cast<std::size_t>(i)));
    for (Eigen::Index j = 0; j < m; ++j) b.point_survival(i, j) = s(b.time_points[static_cast<std::size_t>(j)]);
  }
  b.phi = Eigen::VectorXd::Constant(n, phi);
  b.floor = kCurveFloor;
  b.guard = DenominatorGuard::floor;
  return b;
}

Eigen::MatrixXd generated_times(const GeneratorModel& g, const Dataset& d, int k, std::uint64_t seed) {
  const BatchSamples s = draw_batch_samples(g, d, k, seed);
  const Eigen::RowVectorXd out = nn::evaluate_batch(g.net, s.inputs);
  Eigen::MatrixXd t(static_cast<Eigen::Index>(d.size()), k);
  for (Eigen::Index i = 0; i < t.rows(); ++i) t.row(i) = out.segment(i * k, k);
  return t;
}

Dataset small_ph(std::size_t n, std::uint64_t seed, int p = 2) {
  sim::SimulationSpec spec = sim::SimulationSpec::defaults(sim::Model::ph);
  spec.n = n;
  spec.p = p;
  spec.tau = 19.0;
  spec.seed = seed;
  return sim::simulate(spec);
}

nn::Mlp constant_phi(int p, double bias) {
  nn::Mlp phi({p, 3, 1}, nn::HiddenActivation::relu, nn::OutputActivation::sigmoid);
  phi.mutable_bias(1)(0) = bias;
  return phi;
}

}  // namespace

TEST_CASE("kaplan-meier collapses the weighted loss with constant weights") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Dataset d = testing::fuzz_dataset(rng, {.min_n = 10, .max_n = 200});
    const LossBatch b = batch_from_curve(d, km_estimate(d), d.times(), 1.0);
    const LossReport r = loss_report(b);
    for (double res : r.per_time_residuals) REQUIRE(std::abs(res) < 1e-10);
  }
}

TEST_CASE("zero weights zero both terms") {
  const Dataset d = testing::make_dataset({1, 2, 3}, {1, 0, 1});
  const LossBatch b = batch_from_curve(d, km_estimate(d), {1.5, 2.5}, 0.0);
  const LossTerms t = loss_terms(b, 1);
  CHECK(t.left == 0.0);
  CHECK(t.right == 0.0);
}

TEST_CASE("single censored record by hand") {
  LossBatch b;
  b.times = {2.0};
  b.events = {0};
  b.time_points = {3.0};
  b.point_survival = Eigen::MatrixXd::Constant(1, 1, 0.8);
  b.own_survival = Eigen::VectorXd::Constant(1, 0.8);
  b.phi = Eigen::VectorXd::Ones(1);
  b.floor = 1e-3;
  const LossTerms t = loss_terms(b, 0);
  CHECK(t.left == doctest::Approx(0.8));
  CHECK(t.right == doctest::Approx(1.0));
  const LossReport r = loss_report(b);
  CHECK(r.per_time_residuals.size() == 1);
  CHECK(r.c_tilde == doctest::Approx(0.04));
  CHECK_THROWS_AS(loss_terms(b, 1), Error);
}

TEST_CASE("singular denominators raise when the guard is off") {
  LossBatch b;
  b.times = {2.0};
  b.events = {0};
  b.time_points = {3.0};
  b.point_survival = Eigen::MatrixXd::Constant(1, 1, 0.0);
  b.own_survival = Eigen::VectorXd::Constant(1, 0.0);
  b.phi = Eigen::VectorXd::Ones(1);
  b.floor = 0.0025;
  b.guard = DenominatorGuard::raise;
  try {
    loss_terms(b, 0);
    FAIL("expected singular-survival");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_survival);
  }
  b.guard = DenominatorGuard::floor;
  CHECK(loss_terms(b, 0).right == 0.0);
}

TEST_CASE("constant weights scale the loss quadratically") {
  const Dataset d = small_ph(8, 1);
  const GeneratorModel g = GeneratorModel::create(2, 3, {8}, nn::HiddenActivation::relu, 2);
  const std::vector<double> points(d.times().begin(), d.times().begin() + 4);
  LossSettings s;
  s.k = 50;
  s.seed = 7;
  const LossReport half = scene_loss(g, constant_phi(2, 0.0), d, points, s);
  const Eigen::MatrixXd times = generated_times(g, d, s.k, s.seed);
  const LossBatch ones = make_loss_batch(d, points, times, Eigen::VectorXd::Ones(8), s.effective_floor(), s.guard);
  const LossReport full = loss_report(ones);
  CHECK(half.c_tilde == doctest::Approx(0.25 * full.c_tilde).epsilon(1e-12));
  for (std::size_t j = 0; j < points.size(); ++j) {
    CHECK(half.per_time_residuals[j] == doctest::Approx(0.5 * full.per_time_residuals[j]).epsilon(1e-12));
  }
  double mean_sq = 0.0;
  for (double r : full.per_time_residuals) {
    mean_sq += r * r;
  }
  CHECK(full.c_tilde == doctest::Approx(mean_sq / points.size()));
  CHECK(full.c_tilde >= 0.0);
}

TEST_CASE("one time point gives the squared residual") {
  const Dataset d = small_ph(6, 3);
  const GeneratorModel g = GeneratorModel::create(2, 3, {8}, nn::HiddenActivation::relu, 4);
  const std::vector<double> point{d.time(0)};
  const LossReport r = scene_loss(g, constant_phi(2, 0.3), d, point, {});
  CHECK(r.c_tilde == doctest::Approx(r.per_time_residuals[0] * r.per_time_residuals[0]).epsilon(1e-15));
}

TEST_CASE("generator gradient matches the frozen-right-term objective") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = small_ph(5, rng());
    GeneratorModel g = GeneratorModel::create(2, 2, {6, 5}, nn::HiddenActivation::tanh, rng());
    testing::randomize_biases(g.net, rng(), -0.2, 0.2);
    nn::Mlp phi = nn::Mlp::glorot({2, 4, 1}, nn::HiddenActivation::tanh, nn::OutputActivation::sigmoid, rng());
    LossSettings s;
    s.k = 40;
    s.temperature = 0.5;
    s.seed = rng();
    const std::vector<double> points = d.times();

    const GradientStep step = generator_step(g, phi, d, points, s);
    const BatchSamples samples = draw_batch_samples(g, d, s.k, s.seed);
    const Eigen::VectorXd phis = phi_values(phi, d);
    const LossBatch exact = make_loss_batch(d, points, generated_times(g, d, s.k, s.seed), phis,
                                            s.effective_floor(), s.guard);
    std::vector<double> frozen;
    for (std::size_t j = 0; j < points.size(); ++j) frozen.push_back(loss_terms(exact, j).right);

    auto objective = [&](const nn::Mlp& net) {
      const Eigen::RowVectorXd out = nn::evaluate_batch(net, samples.inputs);
      double total = 0.0;
      for (std::size_t j = 0; j < points.size(); ++j) {
        double left = 0.0;
        for (Eigen::Index i = 0; i < phis.size(); ++i) {
          double sm = 0.0;
          for (int k = 0; k < s.k; ++k) sm += logistic((out(i * s.k + k) - points[j]) / s.temperature);
          left += sm / s.k * phis(i);
        }
        const double r = left / static_cast<double>(phis.size()) - frozen[j];
        total += r * r;
      }
      return total / static_cast<double>(points.size());
    };
    const auto cmp = testing::compare_with_fd(g.net, step.grads, objective, 1e-6);
    CHECK(cmp.max_rel_error < 1e-4);
    CHECK(step.report.c_tilde == doctest::Approx(loss_report(exact).c_tilde).epsilon(1e-15));
  }
}

TEST_CASE("generator gradient vanishes with vanishing residuals or weights") {
  // T == 1 for every draw; all observed times exceed every time point below 1.
  const GeneratorModel g(nn::Mlp({4, 3, 1}, nn::HiddenActivation::relu, nn::OutputActivation::exp), 2);
  const Dataset d = testing::make_dataset({2.0, 3.0, 4.0}, {1, 0, 1}, 2);
  const std::vector<double> points{0.4, 0.5};
  LossSettings s;
  s.k = 20;
  s.temperature = 0.01;
  const GradientStep step = generator_step(g, constant_phi(2, 0.7), d, points, s);
  CHECK(step.report.c_tilde == 0.0);
  CHECK(step.grads.norm() < 1e-15);

  const GeneratorModel random = GeneratorModel::create(2, 2, {5}, nn::HiddenActivation::relu, 3);
  const nn::Mlp zero_phi = constant_phi(2, -1000.0);
  CHECK(phi_values(zero_phi, d).isZero());
  CHECK(generator_grad(random, zero_phi, d, d.times(), s).norm() == 0.0);
}

TEST_CASE("pruned covariate columns receive no generator gradient") {
  const Dataset d = small_ph(5, 8);
  GeneratorModel g = GeneratorModel::create(2, 3, {6}, nn::HiddenActivation::relu, 9);
  g.pruned[1] = 1;
  g.net.mutable_weight(0).col(4).setZero();
  const nn::ParamGrads grads = generator_grad(g, constant_phi(2, 0.2), d, d.times(), {});
  CHECK(grads.weights[0].col(4).isZero());
  CHECK_FALSE(grads.weights[0].col(3).isZero());
}

TEST_CASE("weight-function gradient matches central differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = small_ph(6, rng());
    const GeneratorModel g = GeneratorModel::create(2, 3, {8}, nn::HiddenActivation::relu, rng());
    nn::Mlp phi = nn::Mlp::glorot({2, 5, 4, 1}, nn::HiddenActivation::tanh, nn::OutputActivation::sigmoid, rng());
    testing::randomize_biases(phi, rng(), -0.5, 0.5);
    LossSettings s;
    s.k = 30;
    s.seed = rng();
    const std::vector<double> points = d.times();
    const GradientStep step = phi_step(g, phi, d, points, s);
    const auto cmp = testing::compare_with_fd(phi, step.grads, [&](const nn::Mlp& net) {
      return scene_loss(g, net, d, points, s).c_tilde;
    });
    CHECK(cmp.max_rel_error < 1e-5);
  }
}

TEST_CASE("weight-function gradient through the sigmoid head by hand") {
  const Dataset d = testing::make_dataset({2.0}, {0}, 1);
  const GeneratorModel g = GeneratorModel::create(1, 2, {4}, nn::HiddenActivation::relu, 5);
  nn::Mlp phi({1, 1}, nn::HiddenActivation::relu, nn::OutputActivation::sigmoid);
  phi.mutable_bias(0)(0) = 0.4;
  LossSettings s;
  s.k = 25;
  s.seed = 3;
  const std::vector<double> point{1.1};
  const Eigen::MatrixXd times = generated_times(g, d, s.k, s.seed);
  const std::vector<double> row(times.data(), times.data() + times.size());
  // Record is censored after t, so the right integrand is the indicator 1.
  const double a = empirical_survival(row, 1.1) - 1.0;
  const double p = logistic(0.4);
  const nn::ParamGrads grads = phi_grad(g, phi, d, point, s);
  CHECK(grads.biases[0](0) == doctest::Approx(2.0 * a * a * p * p * (1.0 - p)).epsilon(1e-12));
}

TEST_CASE("weight-function gradient vanishes with the residuals") {
  const GeneratorModel g(nn::Mlp({4, 3, 1}, nn::HiddenActivation::relu, nn::OutputActivation::exp), 2);
  const Dataset d = testing::make_dataset({2.0, 3.0, 4.0}, {1, 0, 1}, 2);
  const std::vector<double> points{0.4, 0.5};
  const nn::Mlp phi = nn::Mlp::glorot({2, 4, 1}, nn::HiddenActivation::relu, nn::OutputActivation::sigmoid, 1);
  CHECK(phi_grad(g, phi, d, points, {}).norm() == 0.0);
}

TEST_CASE("loss inputs are validated") {
  const Dataset d = small_ph(4, 1);
  const GeneratorModel g = GeneratorModel::create(2, 3, {4}, nn::HiddenActivation::relu, 1);
  const std::vector<double> none;
  CHECK_THROWS_AS(scene_loss(g, constant_phi(2, 0.0), d, none, {}), Error);
  CHECK_THROWS_AS(scene_loss(g, constant_phi(3, 0.0), d, d.times(), {}), Error);
  CHECK_THROWS_AS(scene_loss(g, constant_phi(2, 0.0), Dataset{}, d.times(), {}), Error);
  LossSettings cold;
  cold.temperature = 0.0;
  CHECK_THROWS_AS(generator_grad(g, constant_phi(2, 0.0), d, d.times(), cold), Error);
}
