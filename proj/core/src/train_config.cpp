#include <map>
#include <set>
#include <string>

#include "scene/error.hpp"
#include "scene/io.hpp"
#include "scene/trainer.hpp"

namespace scene {

namespace {

[[noreturn]] void config_error(const std::string& detail) { throw Error(ErrorKind::config, detail); }

int parse_count(std::string_view key, std::string_view value, int min) {
  long v = 0;
  try {
    v = io::parse_long(value, key);
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (v < min || v > 1'000'000'000L) {
    config_error(std::string(key) + " must be an integer >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    return io::parse_double(value, key);
  } catch (const Error& e) {
    config_error(e.what());
  }
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  config_error(std::string(key) + " must be true or false");
}

// Hidden widths "256,256,256" (or "256-256-256"), optionally "relu:"/"tanh:" prefixed.
NetworkConfig parse_arch(std::string_view key, std::string_view value) {
  NetworkConfig arch;
  const auto colon = value.find(':');
  if (colon != std::string_view::npos) {
    try {
      arch.activation = nn::parse_hidden_activation(io::trim(value.substr(0, colon)));
    } catch (const Error& e) {
      config_error(std::string(key) + ": " + e.what());
    }
    value = value.substr(colon + 1);
  }
  std::string normalized(value);
  for (char& c : normalized) {
    if (c == '-') c = ',';
  }
  for (std::string_view part : io::split(normalized, ',')) {
    arch.hidden.push_back(parse_count(key, part, 1));
  }
  return arch;
}

std::string format_arch(const NetworkConfig& arch) {
  std::string out(nn::to_string(arch.activation));
  out += ':';
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(arch.hidden[i]);
  }
  return out;
}

void set_optimizer_field(nn::OptimizerSettings& opt, std::string_view field, std::string_view key,
                         std::string_view value) {
  if (field == "kind") {
    try {
      opt.kind = nn::parse_optimizer_kind(value);
    } catch (const Error& e) {
      config_error(std::string(key) + ": " + e.what());
    }
  } else if (field == "lr") {
    opt.learning_rate = parse_real(key, value);
  } else if (field == "beta1") {
    opt.beta1 = parse_real(key, value);
  } else if (field == "beta2") {
    opt.beta2 = parse_real(key, value);
  } else if (field == "momentum") {
    opt.momentum = parse_real(key, value);
  } else {
    config_error("unknown key '" + std::string(key) + "'");
  }
}

void validate_optimizer(const nn::OptimizerSettings& opt, std::string_view which) {
  if (!(opt.learning_rate > 0.0)) config_error(std::string(which) + ".lr must be positive");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0) || !(opt.beta2 >= 0.0 && opt.beta2 < 1.0)) {
    config_error(std::string(which) + " betas must lie in [0,1)");
  }
  if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) {
    config_error(std::string(which) + ".momentum must lie in [0,1)");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) config_error("train.epochs must be >= 0");
  if (vs_epochs < 0) config_error("train.vs_epochs must be >= 0");
  if (variable_selection && vs_epochs < 1) {
    config_error("train.vs_epochs must be positive when variable selection is on");
  }
  if (batch_size < 1) config_error("train.batch_size must be positive");
  if (time_points && *time_points < 1) config_error("train.time_points must be positive");
  if (k < 1) config_error("train.K must be positive");
  if (aux_dim < 1) config_error("train.p_u must be positive");
  if (!(temperature > 0.0)) config_error("train.temperature must be positive");
  validate_optimizer(gen_optimizer, "opt.gen");
  validate_optimizer(phi_optimizer, "opt.phi");
}

TrainConfig TrainConfig::low_dim_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::high_dim_defaults() {
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.vs_epochs = 20;
  cfg.gen_arch = {{100, 100, 100}, nn::HiddenActivation::relu};
  cfg.phi_arch = {{1000, 1000}, nn::HiddenActivation::relu};
  cfg.phi_optimizer = {nn::OptimizerKind::adam, 1e-4, 0.0, 0.5, 0.999, 1e-8};
  cfg.variable_selection = true;
  return cfg;
}

TrainConfig parse_train_config(std::string_view text, const TrainConfig& base,
                               std::vector<std::string>* keys_seen) {
  TrainConfig cfg = base;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      config_error("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = io::trim(line.substr(0, eq));
    const std::string_view value = io::trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      config_error("duplicate key '" + std::string(key) + "'");
    }

    if (key == "model.gen_arch") {
      cfg.gen_arch = parse_arch(key, value);
    } else if (key == "model.phi_arch") {
      cfg.phi_arch = parse_arch(key, value);
    } else if (key == "train.epochs") {
      cfg.epochs = parse_count(key, value, 0);
    } else if (key == "train.vs_epochs") {
      cfg.vs_epochs = parse_count(key, value, 0);
    } else if (key == "train.batch_size") {
      cfg.batch_size = parse_count(key, value, 1);
    } else if (key == "train.time_points") {
      cfg.time_points = parse_count(key, value, 1);
    } else if (key == "train.K") {
      cfg.k = parse_count(key, value, 1);
    } else if (key == "train.p_u") {
      cfg.aux_dim = parse_count(key, value, 1);
    } else if (key == "train.temperature") {
      cfg.temperature = parse_real(key, value);
    } else if (key == "train.variable_selection") {
      cfg.variable_selection = parse_bool(key, value);
    } else if (key == "seed") {
      long v = 0;
      try {
        v = io::parse_long(value, key);
      } catch (const Error& e) {
        config_error(e.what());
      }
      if (v < 0) config_error("seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key.starts_with("opt.gen.")) {
      set_optimizer_field(cfg.gen_optimizer, key.substr(8), key, value);
    } else if (key.starts_with("opt.phi.")) {
      set_optimizer_field(cfg.phi_optimizer, key.substr(8), key, value);
    } else {
      config_error("unknown key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  if (keys_seen) keys_seen->assign(seen.begin(), seen.end());
  return cfg;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::string out;
  auto line = [&](std::string_view k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  line("model.gen_arch", format_arch(cfg.gen_arch));
  line("model.phi_arch", format_arch(cfg.phi_arch));
  line("train.epochs", std::to_string(cfg.epochs));
  line("train.vs_epochs", std::to_string(cfg.vs_epochs));
  line("train.batch_size", std::to_string(cfg.batch_size));
  line("train.time_points", std::to_string(cfg.effective_time_points()));
  line("train.K", std::to_string(cfg.k));
  line("train.p_u", std::to_string(cfg.aux_dim));
  line("train.temperature", io::format_double(cfg.temperature));
  for (const auto& [prefix, opt] : {std::pair{"opt.gen.", &cfg.gen_optimizer}, std::pair{"opt.phi.", &cfg.phi_optimizer}}) {
    line(std::string(prefix) + "kind", std::string(nn::to_string(opt->kind)));
    line(std::string(prefix) + "lr", io::format_double(opt->learning_rate));
    line(std::string(prefix) + "beta1", io::format_double(opt->beta1));
    line(std::string(prefix) + "beta2", io::format_double(opt->beta2));
    line(std::string(prefix) + "momentum", io::format_double(opt->momentum));
  }
  line("train.variable_selection", cfg.variable_selection ? "true" : "false");
  line("seed", std::to_string(cfg.seed));
  return out;
}

}  // namespace scene
