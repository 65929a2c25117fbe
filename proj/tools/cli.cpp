#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "scene/error.hpp"
#include "scene/evaluation.hpp"
#include "scene/generator.hpp"
#include "scene/io.hpp"
#include "scene/oracle.hpp"
#include "scene/simulation.hpp"
#include "scene/survival.hpp"
#include "scene/trainer.hpp"

namespace scene::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> make_logger() {
  auto log = std::make_shared<spdlog::logger>("scene", std::make_shared<spdlog::sinks::stderr_sink_st>());
  log->set_pattern("[%l] %v");
  const char* level = std::getenv("SCENE_LOG");
  const std::string name = level ? level : "info";
  if (name == "debug") {
    log->set_level(spdlog::level::debug);
  } else if (name == "quiet") {
    log->set_level(spdlog::level::off);
  } else {
    log->set_level(spdlog::level::info);
  }
  return log;
}

void require_file(const fs::path& p, std::string_view flag) {
  if (!fs::is_regular_file(p)) {
    throw Error(ErrorKind::io, std::string(flag) + ": no such file '" + p.string() + "'");
  }
}

void require_dir(const fs::path& p, std::string_view flag) {
  if (!fs::is_directory(p)) {
    throw Error(ErrorKind::io, std::string(flag) + ": no such directory '" + p.string() + "'");
  }
}

void require_writable(const fs::path& p, std::string_view flag) {
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw Error(ErrorKind::io, std::string(flag) + ": directory '" + parent.string() + "' does not exist");
  }
  if (fs::is_directory(p)) {
    throw Error(ErrorKind::io, std::string(flag) + ": '" + p.string() + "' is a directory");
  }
}

std::vector<double> parse_list(const std::string& text, std::string_view flag) {
  std::vector<double> out;
  for (std::string_view part : io::split(text, ',')) {
    try {
      out.push_back(io::parse_double(io::trim(part), flag));
    } catch (const Error& e) {
      throw UsageError(std::string(flag) + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid = parse_list(text, "--grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw UsageError("--grid: times must be non-negative and strictly increasing");
    }
  }
  return grid;
}

TrainConfig load_config(const fs::path& path) {
  std::vector<std::string> keys;
  TrainConfig cfg = parse_train_config(io::read_text(path), TrainConfig::low_dim_defaults(), &keys);
  if (std::find(keys.begin(), keys.end(), "seed") == keys.end()) {
    throw Error(ErrorKind::config, "missing required key 'seed'");
  }
  return cfg;
}

TrainedModel load_model(const fs::path& path) { return trained_model_from_json(io::read_text(path)); }

void check_x(const std::vector<double>& x, const GeneratorModel& gen) {
  if (static_cast<int>(x.size()) != gen.covariate_dim()) {
    throw UsageError("--x: expected " + std::to_string(gen.covariate_dim()) + " values, got " +
                     std::to_string(x.size()));
  }
}

struct Flags {
  std::string model_name = "ph", data, config, out, out_model, out_history, model, x, grid, curves_dir,
              truth, sidecar;
  std::size_t n = 0;
  int p = 0, folds = 5, jobs = 1, k = 0, levels = 100, noise_columns = 0;
  double tau = 0.0, level = 0.90;
  std::uint64_t seed = 0;
};

int cmd_simulate(const Flags& f, spdlog::logger& log) {
  sim::SimulationSpec spec = sim::SimulationSpec::defaults(sim::parse_model(f.model_name));
  spec.n = f.n;
  spec.p = f.p;
  spec.tau = f.tau;
  spec.seed = f.seed;
  spec.validate();
  const fs::path sidecar = f.sidecar.empty() ? fs::path(f.out).replace_extension(".json") : fs::path(f.sidecar);
  require_writable(f.out, "--out");
  require_writable(sidecar, "--sidecar");
  const Dataset data = sim::simulate(spec);
  io::write_dataset(data, f.out);
  io::write_text_atomic(sidecar, sim::sidecar_json(spec, data));
  log.info("simulated {} records, censoring rate {:.4f}", data.size(), data.censoring_rate());
  return kExitOk;
}

int cmd_train(const Flags& f, spdlog::logger& log) {
  require_file(f.data, "--data");
  require_file(f.config, "--config");
  require_writable(f.out_model, "--out-model");
  require_writable(f.out_history, "--out-history");
  const TrainConfig cfg = load_config(f.config);
  const Dataset data = io::load_dataset(f.data);
  log.info("training on {} records, {} covariates", data.size(), data.covariate_dim());
  const long total = epochs_to_iterations(cfg.epochs, data.size(), cfg.batch_size);
  auto observer = [&log, total](const IterationRecord& r) {
    if (r.iter % 100 == 0) {
      log.debug("iter {}/{} c_tilde {:.6g} |grad w| {:.3g} |grad z| {:.3g}", r.iter, total, r.c_tilde,
                r.grad_norm_omega, r.grad_norm_zeta);
    }
  };
  const TrainedModel model = train(data, cfg, observer);
  io::write_text_atomic(f.out_model, trained_model_to_json(model));
  io::write_text_atomic(f.out_history, history_to_csv(model.history));
  log.info("finished after {} iterations", model.history.size());
  return kExitOk;
}

int cmd_predict(const Flags& f, spdlog::logger&) {
  require_file(f.model, "--model");
  require_writable(f.out, "--out");
  const std::vector<double> x = parse_list(f.x, "--x");
  const std::vector<double> grid = parse_grid(f.grid);
  const TrainedModel model = load_model(f.model);
  check_x(x, model.generator);
  const std::vector<double> s = survival_on_grid(model.generator, x, grid, f.k, f.seed);
  io::write_text_atomic(f.out, io::series_to_csv({grid, s}, "t,s"));
  return kExitOk;
}

int cmd_km(const Flags& f, spdlog::logger&) {
  require_file(f.data, "--data");
  require_writable(f.out, "--out");
  const SurvivalCurve km = km_estimate(io::load_dataset(f.data));
  io::write_text_atomic(f.out, io::series_to_csv({km.times(), km.probs()}, "t,s"));
  return kExitOk;
}

int cmd_importance(const Flags& f, spdlog::logger&) {
  require_file(f.model, "--model");
  require_writable(f.out, "--out");
  const TrainedModel model = load_model(f.model);
  const ImportanceVector iv = variable_importance(model.generator);
  const auto aux = static_cast<std::ptrdiff_t>(model.generator.aux_dim);
  nlohmann::json doc{{"aux", std::vector<double>(iv.gamma.begin(), iv.gamma.begin() + aux)},
                     {"covariates", std::vector<double>(iv.gamma.begin() + aux, iv.gamma.end())},
                     {"threshold", iv.threshold},
                     {"pruned", model.generator.pruned_covariates()}};
  io::write_text_atomic(f.out, doc.dump(1) + "\n");
  return kExitOk;
}

int cmd_band(const Flags& f, spdlog::logger& log) {
  require_dir(f.curves_dir, "--curves-dir");
  require_writable(f.out, "--out");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(f.curves_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SurvivalCurve> curves;
  for (const auto& path : files) {
    io::Series s = io::parse_series_csv(io::read_text(path), "t,s");
    try {
      curves.emplace_back(std::move(s.x), std::move(s.y));
    } catch (const Error& e) {
      throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
  }
  const BandSummary band = empirical_band(curves, f.level);
  io::write_text_atomic(f.out, band_to_csv(band));
  log.info("band over {} curves", curves.size());
  return kExitOk;
}

int cmd_qq(const Flags& f, spdlog::logger&) {
  require_file(f.model, "--model");
  require_writable(f.out, "--out");
  const std::vector<double> x = parse_list(f.x, "--x");
  const TrainedModel model = load_model(f.model);
  check_x(x, model.generator);
  const sim::TruthOracle truth(sim::SimulationSpec::defaults(sim::parse_model(f.truth)));
  const SampleBatch batch = sample_times(model.generator, x, f.k, f.seed);
  io::write_text_atomic(f.out, qq_to_csv(qq_series(truth, x, batch, f.levels)));
  return kExitOk;
}

int cmd_cv(const Flags& f, spdlog::logger& log) {
  require_file(f.data, "--data");
  require_file(f.config, "--config");
  require_writable(f.out, "--out");
  const TrainConfig cfg = load_config(f.config);
  Dataset data = io::load_dataset(f.data);
  if (f.noise_columns > 0) data = add_noise_covariates(data, f.noise_columns, cfg.seed);
  const CvReport report = kfold_cindex(data, cfg, f.folds, f.jobs);
  io::write_text_atomic(f.out, cv_to_json(report));
  log.info("mean C-index {:.4f} (sd {:.4f})", report.mean, report.sd);
  return kExitOk;
}

int cmd_selfcheck(std::ostream& out) {
  bool ok = true;
  for (const CheckResult& r : run_selfcheck()) {
    out << (r.passed ? "pass" : "FAIL") << ": " << r.name;
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitRuntime;
}

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::config ? kExitUsage : kExitRuntime; }

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional survival estimation with self-consistent generators", "scene"};
  app.require_subcommand(1);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "Simulate a PH or PO dataset");
  simulate->add_option("--model", f.model_name, "ph or po")->required()->check(CLI::IsMember({"ph", "po"}));
  simulate->add_option("--n", f.n, "Number of records")->required();
  simulate->add_option("--p", f.p, "Number of covariates")->required();
  simulate->add_option("--tau", f.tau, "Censoring upper bound")->required();
  simulate->add_option("--seed", f.seed, "Random seed")->required();
  simulate->add_option("--out", f.out, "Dataset CSV")->required();
  simulate->add_option("--sidecar", f.sidecar, "Sidecar JSON (default: --out with .json extension)");

  auto* train_cmd = app.add_subcommand("train", "Train generator and weight networks");
  train_cmd->add_option("--data", f.data, "Dataset CSV")->required();
  train_cmd->add_option("--config", f.config, "key = value config file")->required();
  train_cmd->add_option("--out-model", f.out_model, "Model JSON")->required();
  train_cmd->add_option("--out-history", f.out_history, "History CSV")->required();

  auto* predict = app.add_subcommand("predict", "Evaluate a survival curve for one subject");
  predict->add_option("--model", f.model, "Model JSON")->required();
  predict->add_option("--x", f.x, "Comma-separated covariates")->required();
  predict->add_option("--grid", f.grid, "Comma-separated time grid")->required();
  predict->add_option("--seed", f.seed, "Sampling seed")->required();
  predict->add_option("--k", f.k, "Generated samples")->default_val(1000)->check(CLI::PositiveNumber);
  predict->add_option("--out", f.out, "Curve CSV")->required();

  auto* km = app.add_subcommand("km", "Kaplan-Meier estimate");
  km->add_option("--data", f.data, "Dataset CSV")->required();
  km->add_option("--out", f.out, "Curve CSV")->required();

  auto* importance = app.add_subcommand("importance", "Variable importance of a trained generator");
  importance->add_option("--model", f.model, "Model JSON")->required();
  importance->add_option("--out", f.out, "Importance JSON")->required();

  auto* band = app.add_subcommand("band", "Pointwise empirical band over replicate curves");
  band->add_option("--curves-dir", f.curves_dir, "Directory of t,s curve CSVs")->required();
  band->add_option("--level", f.level, "Band level")->default_val(0.90);
  band->add_option("--out", f.out, "Band CSV")->required();

  auto* qq = app.add_subcommand("qq", "Quantile pairs against the simulation truth");
  qq->add_option("--model", f.model, "Model JSON")->required();
  qq->add_option("--truth", f.truth, "ph or po")->required()->check(CLI::IsMember({"ph", "po"}));
  qq->add_option("--x", f.x, "Comma-separated covariates")->required();
  qq->add_option("--seed", f.seed, "Sampling seed")->required();
  qq->add_option("--k", f.k, "Generated samples")->default_val(10000)->check(CLI::PositiveNumber);
  qq->add_option("--levels", f.levels, "Number of quantile levels")->default_val(100)->check(CLI::PositiveNumber);
  qq->add_option("--out", f.out, "QQ CSV")->required();

  auto* cv = app.add_subcommand("cv", "Cross-validated C-index");
  cv->add_option("--data", f.data, "Dataset CSV")->required();
  cv->add_option("--config", f.config, "key = value config file")->required();
  cv->add_option("--folds", f.folds, "Number of folds")->default_val(5);
  cv->add_option("--jobs", f.jobs, "Parallel folds")->default_val(1)->check(CLI::PositiveNumber);
  cv->add_option("--noise-columns", f.noise_columns, "Append this many U[-1,1] noise covariates")
      ->default_val(0)
      ->check(CLI::NonNegativeNumber);
  cv->add_option("--out", f.out, "Report JSON")->required();

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the built-in invariant checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  auto log = make_logger();
  try {
    if (simulate->parsed()) return cmd_simulate(f, *log);
    if (train_cmd->parsed()) return cmd_train(f, *log);
    if (predict->parsed()) return cmd_predict(f, *log);
    if (km->parsed()) return cmd_km(f, *log);
    if (importance->parsed()) return cmd_importance(f, *log);
    if (band->parsed()) return cmd_band(f, *log);
    if (qq->parsed()) return cmd_qq(f, *log);
    if (cv->parsed()) return cmd_cv(f, *log);
    if (selfcheck->parsed()) return cmd_selfcheck(out);
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << kind_name(e.kind()) << ": " << one_line(e.what()) << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return kExitRuntime;
  }
  err << "error: usage: no subcommand\n";
  return kExitUsage;
}

}  // namespace scene::cli
