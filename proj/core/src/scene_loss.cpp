#include "scene/scene_loss.hpp"

#include <cmath>
#include <random>
#include <string>

#include "scene/error.hpp"

namespace scene {

namespace {

void check_inputs(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                  std::span<const double> time_points, const LossSettings& settings) {
  if (batch.empty()) throw Error(ErrorKind::empty_dataset, "loss needs a non-empty batch");
  if (time_points.empty()) throw Error(ErrorKind::invalid_parameter, "loss needs at least one time point");
  if (settings.k < 1) throw Error(ErrorKind::invalid_parameter, "K must be at least 1");
  if (batch.covariate_dim() != gen.covariate_dim() || phi.input_dim() != batch.covariate_dim()) {
    throw Error(ErrorKind::shape, "covariate dim " + std::to_string(batch.covariate_dim()) +
                                      " does not match generator/phi inputs");
  }
}

double guarded_denominator(const LossBatch& b, std::size_t i) {
  const double s = b.own_survival(static_cast<Eigen::Index>(i));
  if (s < b.floor) {
    if (b.guard == DenominatorGuard::raise) {
      throw Error(ErrorKind::singular_survival,
                  "S(t_i|x_i) = " + std::to_string(s) + " below floor for record " + std::to_string(i));
    }
    return std::max(b.floor, kCurveFloor);
  }
  return std::max(s, kCurveFloor);
}

// Per-record integrand of the right-hand term before multiplying by phi.
double right_integrand(const LossBatch& b, std::size_t i, std::size_t j) {
  const double t = b.time_points[j];
  if (b.times[i] > t) return 1.0;
  if (b.events[i] == 0) {
    return b.point_survival(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) /
           guarded_denominator(b, i);
  }
  return 0.0;
}

}  // namespace

LossTerms loss_terms(const LossBatch& b, std::size_t point) {
  if (point >= b.time_points.size()) {
    throw Error(ErrorKind::invalid_parameter, "time point index out of range");
  }
  const std::size_t n = b.size();
  double left = 0.0;
  double right = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = b.phi(static_cast<Eigen::Index>(i));
    left += b.point_survival(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(point)) * phi;
    right += right_integrand(b, i, point) * phi;
  }
  return {left / static_cast<double>(n), right / static_cast<double>(n)};
}

LossReport loss_report(const LossBatch& b) {
  LossReport report;
  report.per_time_residuals.reserve(b.time_points.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < b.time_points.size(); ++j) {
    const LossTerms terms = loss_terms(b, j);
    const double r = terms.left - terms.right;
    report.per_time_residuals.push_back(r);
    sum += r * r;
  }
  report.c_tilde = sum / static_cast<double>(b.time_points.size());
  return report;
}

BatchSamples draw_batch_samples(const GeneratorModel& gen, const Dataset& batch, int k,
                                std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int p = batch.covariate_dim();
  std::mt19937_64 rng(seed);
  BatchSamples out;
  out.inputs.resize(gen.aux_dim + p, n * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.inputs.block(0, i * k, gen.aux_dim, k) = draw_aux(gen.aux_dim, k, rng);
    const auto x = batch.covariates(static_cast<std::size_t>(i));
    for (int j = 0; j < p; ++j) {
      out.inputs.block(gen.aux_dim + j, i * k, 1, k).setConstant(x[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

Eigen::VectorXd phi_values(const nn::Mlp& phi, const Dataset& batch) {
  Eigen::MatrixXd in = batch.covariate_matrix().transpose();
  return nn::evaluate_batch(phi, in).transpose();
}

LossBatch make_loss_batch(const Dataset& batch, std::span<const double> time_points,
                          const Eigen::MatrixXd& generated, const Eigen::VectorXd& phi,
                          double floor, DenominatorGuard guard) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto m = static_cast<Eigen::Index>(time_points.size());
  LossBatch b;
  b.times = batch.times();
  b.events = batch.events();
  b.time_points.assign(time_points.begin(), time_points.end());
  b.point_survival.resize(n, m);
  b.own_survival.resize(n);
  b.phi = phi;
  b.floor = floor;
  b.guard = guard;
  const double inv_k = 1.0 / static_cast<double>(generated.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = generated.row(i);
    b.own_survival(i) = static_cast<double>((row.array() > b.times[static_cast<std::size_t>(i)]).count()) * inv_k;
    for (Eigen::Index j = 0; j < m; ++j) {
      b.point_survival(i, j) =
          static_cast<double>((row.array() > time_points[static_cast<std::size_t>(j)]).count()) * inv_k;
    }
  }
  return b;
}

namespace {

struct Generated {
  nn::ForwardCache cache;
  Eigen::MatrixXd times;  // n x K
};

Generated generate(const GeneratorModel& gen, const Dataset& batch, const LossSettings& settings) {
  BatchSamples s = draw_batch_samples(gen, batch, settings.k, settings.seed);
  Generated g{nn::forward_batch(gen.net, s.inputs), {}};
  const auto n = static_cast<Eigen::Index>(batch.size());
  g.times.resize(n, settings.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < settings.k; ++k) {
      const double t = g.cache.output(i * settings.k + k);
      if (!std::isfinite(t)) {
        throw DivergedError("generator produced a non-finite time", static_cast<long>(i));
      }
      g.times(i, k) = t;
    }
  }
  return g;
}

Eigen::MatrixXd generate_times(const GeneratorModel& gen, const Dataset& batch,
                               const LossSettings& settings) {
  BatchSamples s = draw_batch_samples(gen, batch, settings.k, settings.seed);
  const Eigen::RowVectorXd out = nn::evaluate_batch(gen.net, s.inputs);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd times(n, settings.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < settings.k; ++k) {
      const double t = out(i * settings.k + k);
      if (!std::isfinite(t)) {
        throw DivergedError("generator produced a non-finite time", static_cast<long>(i));
      }
      times(i, k) = t;
    }
  }
  return times;
}

}  // namespace

LossReport scene_loss(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                      std::span<const double> time_points, const LossSettings& settings) {
  check_inputs(gen, phi, batch, time_points, settings);
  const Eigen::MatrixXd times = generate_times(gen, batch, settings);
  return loss_report(make_loss_batch(batch, time_points, times, phi_values(phi, batch),
                                     settings.effective_floor(), settings.guard));
}

GradientStep generator_step(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                            std::span<const double> time_points, const LossSettings& settings) {
  check_inputs(gen, phi, batch, time_points, settings);
  if (!(settings.temperature > 0.0)) {
    throw Error(ErrorKind::invalid_parameter, "temperature must be positive");
  }
  const Generated g = generate(gen, batch, settings);
  const Eigen::VectorXd phis = phi_values(phi, batch);
  const LossBatch exact = make_loss_batch(batch, time_points, g.times, phis,
                                          settings.effective_floor(), settings.guard);

  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto m = static_cast<Eigen::Index>(time_points.size());
  const int k = settings.k;
  const double tau = settings.temperature;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_k = 1.0 / static_cast<double>(k);

  // Residual of each time point with the smoothed left term and frozen right term.
  Eigen::VectorXd coef(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double t = time_points[static_cast<std::size_t>(j)];
    double left = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += logistic((g.times(i, kk) - t) / tau);
      left += s * inv_k * phis(i);
    }
    left *= inv_n;
    const double right = loss_terms(exact, static_cast<std::size_t>(j)).right;
    coef(j) = 2.0 / static_cast<double>(m) * (left - right);
  }

  Eigen::RowVectorXd upstream(n * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = phis(i) * inv_n * inv_k / tau;
    for (int kk = 0; kk < k; ++kk) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double s = logistic((g.times(i, kk) - time_points[static_cast<std::size_t>(j)]) / tau);
        acc += coef(j) * s * (1.0 - s);
      }
      upstream(i * k + kk) = acc * w;
    }
  }

  nn::BatchBackward back = nn::backward_batch(gen.net, g.cache, upstream);
  for (std::size_t j = 0; j < gen.pruned.size(); ++j) {
    if (gen.pruned[j]) back.grads.weights.front().col(gen.aux_dim + static_cast<Eigen::Index>(j)).setZero();
  }
  return {std::move(back.grads), loss_report(exact)};
}

nn::ParamGrads generator_grad(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                              std::span<const double> time_points, const LossSettings& settings) {
  return generator_step(gen, phi, batch, time_points, settings).grads;
}

GradientStep phi_step(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                      std::span<const double> time_points, const LossSettings& settings) {
  check_inputs(gen, phi, batch, time_points, settings);
  const Eigen::MatrixXd times = generate_times(gen, batch, settings);
  const Eigen::MatrixXd inputs = batch.covariate_matrix().transpose();
  const nn::ForwardCache cache = nn::forward_batch(phi, inputs);
  const Eigen::VectorXd phis = cache.output.transpose();
  const LossBatch b = make_loss_batch(batch, time_points, times, phis, settings.effective_floor(),
                                      settings.guard);

  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto m = static_cast<Eigen::Index>(time_points.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  // d_ij = S(t_j|x_i) - right integrand; residual r_j = (1/n) sum_i d_ij phi_i.
  Eigen::MatrixXd d(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      d(i, j) = b.point_survival(i, j) -
                right_integrand(b, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  const Eigen::VectorXd r = inv_n * (d.transpose() * phis);
  const Eigen::RowVectorXd upstream = (2.0 / static_cast<double>(m) * inv_n) * (d * r).transpose();

  nn::BatchBackward back = nn::backward_batch(phi, cache, upstream);
  return {std::move(back.grads), loss_report(b)};
}

nn::ParamGrads phi_grad(const GeneratorModel& gen, const nn::Mlp& phi, const Dataset& batch,
                        std::span<const double> time_points, const LossSettings& settings) {
  return phi_step(gen, phi, batch, time_points, settings).grads;
}

}  // namespace scene
