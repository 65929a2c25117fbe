#include "scene/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "scene/error.hpp"
#include "scene/io.hpp"

namespace scene {

ImportanceVector variable_importance(const GeneratorModel& gen) {
  const nn::Mlp& net = gen.net;
  Eigen::RowVectorXd acc = net.weight(net.num_layers() - 1).cwiseAbs();
  for (std::size_t l = net.num_layers() - 1; l-- > 0;) {
    acc = acc * net.weight(l).cwiseAbs();
  }
  ImportanceVector iv;
  iv.gamma.assign(acc.data(), acc.data() + acc.size());
  double aux_sum = 0.0;
  for (int i = 0; i < gen.aux_dim; ++i) aux_sum += iv.gamma[static_cast<std::size_t>(i)];
  iv.threshold = aux_sum / gen.aux_dim;
  return iv;
}

std::vector<int> apply_selection(GeneratorModel& gen, const ImportanceVector& iv) {
  const int p = gen.covariate_dim();
  if (static_cast<int>(iv.gamma.size()) != gen.aux_dim + p) {
    throw Error(ErrorKind::shape, "importance vector does not match generator inputs");
  }
  std::vector<int> newly;
  for (int j = 0; j < p; ++j) {
    const auto col = gen.aux_dim + j;
    if (iv.gamma[static_cast<std::size_t>(col)] <= iv.threshold) {
      if (!gen.pruned[static_cast<std::size_t>(j)]) newly.push_back(j);
      gen.pruned[static_cast<std::size_t>(j)] = 1;
    }
  }
  if (!newly.empty()) {
    Eigen::MatrixXd& w = gen.net.mutable_weight(0);
    for (int j : newly) w.col(gen.aux_dim + j).setZero();
  }
  return newly;
}

long epochs_to_iterations(int epochs, std::size_t n_records, int batch_size) {
  if (batch_size < 1 || n_records == 0) {
    throw Error(ErrorKind::invalid_parameter, "record count and batch size must be positive");
  }
  const auto per_epoch = static_cast<long>((n_records + static_cast<std::size_t>(batch_size) - 1) /
                                           static_cast<std::size_t>(batch_size));
  return static_cast<long>(epochs) * per_epoch;
}

TrainedModel initial_model(int covariate_dim, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 seeder(cfg.seed);
  const std::uint64_t gen_seed = seeder();
  const std::uint64_t phi_seed = seeder();
  GeneratorModel gen = GeneratorModel::create(covariate_dim, cfg.aux_dim, cfg.gen_arch.hidden,
                                              cfg.gen_arch.activation, gen_seed);
  std::vector<int> phi_dims{covariate_dim};
  phi_dims.insert(phi_dims.end(), cfg.phi_arch.hidden.begin(), cfg.phi_arch.hidden.end());
  phi_dims.push_back(1);
  nn::Mlp phi = nn::Mlp::glorot(std::move(phi_dims), cfg.phi_arch.activation,
                                nn::OutputActivation::sigmoid, phi_seed);
  return TrainedModel{std::move(gen), std::move(phi), {}, -1};
}

namespace {

std::vector<std::size_t> draw_without_replacement(std::size_t population, std::size_t count,
                                                  std::mt19937_64& rng) {
  // Partial Fisher-Yates on an index vector.
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

bool covariates_dominate(const GeneratorModel& gen) {
  const ImportanceVector iv = variable_importance(gen);
  double sum = 0.0;
  for (std::size_t j = static_cast<std::size_t>(gen.aux_dim); j < iv.gamma.size(); ++j) sum += iv.gamma[j];
  return sum / gen.covariate_dim() > iv.threshold;
}

void step_or_diverge(nn::Mlp& net, const nn::ParamGrads& grads, nn::OptimizerState& state, nn::Direction dir,
                     long iter) {
  try {
    nn::optimizer_step(net, grads, state, dir);
  } catch (const DivergedError& e) {
    throw DivergedError(std::string(e.what()) + " at iteration " + std::to_string(iter), iter);
  }
}

}  // namespace

IterationSampler::IterationSampler(const TrainConfig& cfg)
    : rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL),
      batch_size_(static_cast<std::size_t>(cfg.batch_size)),
      time_points_(static_cast<std::size_t>(cfg.effective_time_points())) {}

IterationInputs IterationSampler::next(const Dataset& data) {
  if (data.size() < batch_size_ || data.size() < time_points_) {
    throw Error(ErrorKind::invalid_parameter, "dataset smaller than the batch or time-point count");
  }
  IterationInputs in;
  in.records = draw_without_replacement(data.size(), batch_size_, rng_);
  for (std::size_t i : draw_without_replacement(data.size(), time_points_, rng_)) {
    in.time_points.push_back(data.time(i));
  }
  in.generator_seed = rng_();
  in.phi_seed = rng_();
  return in;
}

IterationRecord train_iteration(TrainedModel& model, OptimizerPair& opt, const Dataset& data,
                                const IterationInputs& in, const TrainConfig& cfg, long iter) {
  const Dataset batch = data.subset(in.records);
  LossSettings loss;
  loss.k = cfg.k;
  loss.temperature = cfg.temperature;

  loss.seed = in.generator_seed;
  const GradientStep g = generator_step(model.generator, model.phi, batch, in.time_points, loss);
  if (!std::isfinite(g.report.c_tilde)) {
    throw DivergedError("non-finite loss at iteration " + std::to_string(iter), iter);
  }
  step_or_diverge(model.generator.net, g.grads, opt.generator, nn::Direction::descent, iter);

  loss.seed = in.phi_seed;
  const GradientStep f = phi_step(model.generator, model.phi, batch, in.time_points, loss);
  step_or_diverge(model.phi, f.grads, opt.phi, nn::Direction::ascent, iter);

  return {iter, g.report.c_tilde, g.grads.norm(), f.grads.norm()};
}

TrainedModel train(const Dataset& data, const TrainConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  if (data.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw Error(ErrorKind::invalid_parameter, "dataset has fewer records than the batch size");
  }
  if (static_cast<std::size_t>(cfg.effective_time_points()) > data.size()) {
    throw Error(ErrorKind::invalid_parameter, "more time points requested than observed times");
  }

  TrainedModel model = initial_model(data.covariate_dim(), cfg);
  OptimizerPair opt{nn::OptimizerState(model.generator.net, cfg.gen_optimizer),
                    nn::OptimizerState(model.phi, cfg.phi_optimizer)};
  IterationSampler sampler(cfg);

  const long per_epoch = epochs_to_iterations(1, data.size(), cfg.batch_size);
  const long phase_one = static_cast<long>(cfg.epochs) * per_epoch;
  const long phase_two = cfg.variable_selection ? static_cast<long>(cfg.vs_epochs) * per_epoch : 0;

  // Iteration after which selection runs; decided at an epoch boundary.
  long selection_after = cfg.variable_selection && phase_one == 0 ? 0 : -1;
  long total = phase_one + phase_two;

  for (long h = 1; h <= total; ++h) {
    const IterationRecord rec = train_iteration(model, opt, data, sampler.next(data), cfg, h);

    if (cfg.variable_selection && selection_after >= 0 && h > selection_after) {
      for (int j : apply_selection(model.generator, variable_importance(model.generator))) {
        opt.generator.zero_input_column(model.generator.aux_dim + j);
      }
    }

    model.history.push_back(rec);
    if (observer) observer(rec);

    if (cfg.variable_selection && selection_after < 0 && h % per_epoch == 0) {
      if (h >= phase_one || covariates_dominate(model.generator)) {
        selection_after = h;
        total = h + phase_two;
      }
    }
  }
  model.selection_start = selection_after;
  return model;
}

std::string history_to_csv(const std::vector<IterationRecord>& history) {
  std::string out = "iter,c_tilde,grad_norm_omega,grad_norm_zeta\n";
  for (const auto& r : history) {
    out += std::to_string(r.iter);
    out += ',';
    out += io::format_double(r.c_tilde);
    out += ',';
    out += io::format_double(r.grad_norm_omega);
    out += ',';
    out += io::format_double(r.grad_norm_zeta);
    out += '\n';
  }
  return out;
}

}  // namespace scene
