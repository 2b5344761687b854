#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "laco/encoder.hpp"
#include "laco/error.hpp"
#include "laco/pml.hpp"

namespace laco {

using OrderedJson = nlohmann::ordered_json;

enum class RunMode { Shapes, Flops, Bench, GradCheck, Train, Sweep };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Shapes: return "shapes";
    case RunMode::Flops: return "flops";
    case RunMode::Bench: return "bench";
    case RunMode::GradCheck: return "gradcheck";
    case RunMode::Train: return "train";
    case RunMode::Sweep: return "sweep";
  }
  throw ContractError("to_string: unknown run mode");
}

inline RunMode run_mode_from_string(const std::string& name) {
  if (name == "shapes") return RunMode::Shapes;
  if (name == "flops") return RunMode::Flops;
  if (name == "bench") return RunMode::Bench;
  if (name == "gradcheck") return RunMode::GradCheck;
  if (name == "train") return RunMode::Train;
  if (name == "sweep") return RunMode::Sweep;
  throw ConfigError("unknown mode '" + name + "' (expected shapes, flops, bench, gradcheck, train or sweep)");
}

enum class ReportFormat { Json, Csv };

inline const char* to_string(ReportFormat f) { return f == ReportFormat::Json ? "json" : "csv"; }

inline ReportFormat report_format_from_string(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw ConfigError("unknown format '" + name + "' (expected json or csv)");
}

// Accepts "a/b" with positive integer parts, or a plain decimal.
inline double parse_fraction(const std::string& text) {
  const auto bad = [&] { return ConfigError("cannot parse fraction '" + text + "'"); };
  const std::size_t slash = text.find('/');
  if (slash != std::string::npos) {
    std::size_t num_end = 0, den_end = 0;
    unsigned long long num = 0, den = 0;
    try {
      num = std::stoull(text.substr(0, slash), &num_end);
      den = std::stoull(text.substr(slash + 1), &den_end);
    } catch (const std::exception&) {
      throw bad();
    }
    if (num_end != slash || den_end != text.size() - slash - 1 || den == 0) throw bad();
    return static_cast<double>(num) / static_cast<double>(den);
  }
  std::size_t end = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &end);
  } catch (const std::exception&) {
    throw bad();
  }
  if (end != text.size() || !std::isfinite(value)) throw bad();
  return value;
}

// One resolved run: encoder geometry, merge placement, mode and reporting
// knobs. Exactly one of fraction / k selects the insertion point in the
// single-run modes; sweep takes its own fraction list instead.
struct RunConfig {
  EncoderConfig enc;
  std::optional<double> fraction;
  std::optional<std::size_t> k;
  std::size_t r = 2;
  std::size_t hidden_width = 0;  // 0 resolves to r^2 * width
  MergerVariant variant = MergerVariant::PmlWithResidual;
  RunMode mode = RunMode::Shapes;
  std::uint64_t seed = 0;
  std::string out;  // empty writes to stdout
  ReportFormat format = ReportFormat::Json;
  std::size_t trials = 7;
  std::size_t warmup = 2;
  std::size_t steps = 200;
  double lr = 0.03;
  std::size_t batch = 4;
  std::vector<double> fractions = {1.0 / 12, 1.0 / 6, 0.25, 0.5, 1.0};
  bool sweep_bench = false;  // sweep also measures latency per point, sequentially

  std::size_t resolved_k() const {
    if (k) return *k;
    if (fraction) return resolve_insertion(enc.layers, *fraction);
    throw ContractError("run config: no insertion point is set");
  }

  std::size_t resolved_hidden_width() const { return hidden_width == 0 ? r * r * enc.width : hidden_width; }

  void validate() const {
    enc.validate();
    if (r == 0) throw ConfigError("config: r must be at least 1");
    if (r > 1 && enc.grid_edge() % r != 0) {
      throw ShapeError("config: ratio " + std::to_string(r) + " does not divide token grid edge " +
                       std::to_string(enc.grid_edge()));
    }
    if (fraction && (!(*fraction > 0.0) || *fraction > 1.0)) {
      throw ConfigError("config: fraction must lie in (0, 1], got " + std::to_string(*fraction));
    }
    if (k && *k > enc.layers) {
      throw ConfigError("config: insertion layer k = " + std::to_string(*k) + " exceeds depth L = " +
                        std::to_string(enc.layers));
    }
    if (mode == RunMode::Sweep) {
      if (fractions.empty()) throw ConfigError("config: sweep needs a non-empty fractions list");
    } else if (k.has_value() == fraction.has_value()) {
      throw ConfigError(k.has_value() ? "config: fraction and k are mutually exclusive"
                                      : "config: one of fraction or k is required");
    }
    if (mode == RunMode::Bench || (mode == RunMode::Sweep && sweep_bench)) {
      if (trials < 5) throw ConfigError("config: bench needs at least 5 trials, got " + std::to_string(trials));
      if (warmup < 1) throw ConfigError("config: bench needs at least 1 warmup run");
    }
    if (mode == RunMode::Train) {
      if (steps == 0) throw ConfigError("config: at least one training step is required");
      if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("config: learning rate must be finite and >= 0");
      if (batch == 0) throw ConfigError("config: batch size must be positive");
    }
  }
};

namespace detail {

inline std::size_t config_size(const OrderedJson& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ConfigError("config: key '" + key + "' must be a non-negative integer");
  }
  const auto signed_value = v.get<long long>();
  if (signed_value < 0) throw ConfigError("config: key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(signed_value);
}

inline double config_double(const OrderedJson& v, const std::string& key) {
  if (v.is_string()) return parse_fraction(v.get<std::string>());
  if (!v.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
  return v.get<double>();
}

inline std::string config_string(const OrderedJson& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config: key '" + key + "' must be a string");
  return v.get<std::string>();
}

inline bool config_bool(const OrderedJson& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config: key '" + key + "' must be a boolean");
  return v.get<bool>();
}

// Applies one layer of keys onto cfg. A layer that sets k or fraction clears
// any insertion choice from layers below, so a flag can retarget a file.
inline void apply_config_layer(RunConfig& cfg, const OrderedJson& layer, bool& mode_set) {
  if (!layer.is_object()) throw ConfigError("config: expected a JSON object of settings");
  if (layer.contains("k") && layer.contains("fraction")) {
    throw ConfigError("config: fraction and k are mutually exclusive");
  }
  if (layer.contains("k") || layer.contains("fraction")) {
    cfg.k.reset();
    cfg.fraction.reset();
  }
  for (const auto& [key, value] : layer.items()) {
    if (key == "mode") {
      cfg.mode = run_mode_from_string(config_string(value, key));
      mode_set = true;
    } else if (key == "L") {
      cfg.enc.layers = config_size(value, key);
    } else if (key == "d") {
      cfg.enc.width = config_size(value, key);
    } else if (key == "heads") {
      cfg.enc.heads = config_size(value, key);
    } else if (key == "mlp_width") {
      cfg.enc.mlp_width = config_size(value, key);
    } else if (key == "patch") {
      cfg.enc.patch = config_size(value, key);
    } else if (key == "image_edge") {
      cfg.enc.image_edge = config_size(value, key);
    } else if (key == "r") {
      cfg.r = config_size(value, key);
    } else if (key == "hidden_width") {
      cfg.hidden_width = config_size(value, key);
    } else if (key == "k") {
      cfg.k = config_size(value, key);
    } else if (key == "fraction") {
      cfg.fraction = config_double(value, key);
    } else if (key == "variant") {
      cfg.variant = merger_variant_from_string(config_string(value, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(config_size(value, key));
    } else if (key == "out") {
      cfg.out = config_string(value, key);
    } else if (key == "format") {
      cfg.format = report_format_from_string(config_string(value, key));
    } else if (key == "trials") {
      cfg.trials = config_size(value, key);
    } else if (key == "warmup") {
      cfg.warmup = config_size(value, key);
    } else if (key == "steps") {
      cfg.steps = config_size(value, key);
    } else if (key == "lr") {
      cfg.lr = config_double(value, key);
    } else if (key == "batch") {
      cfg.batch = config_size(value, key);
    } else if (key == "fractions") {
      if (!value.is_array() || value.empty()) {
        throw ConfigError("config: key 'fractions' must be a non-empty array");
      }
      cfg.fractions.clear();
      for (const auto& entry : value) cfg.fractions.push_back(config_double(entry, key));
    } else if (key == "bench") {
      cfg.sweep_bench = config_bool(value, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace detail

// Builds a validated RunConfig from defaults, a config-file layer and an
// override layer (CLI flags). Later layers win key by key.
inline RunConfig parse_run_config(const OrderedJson& file, const OrderedJson& overrides) {
  RunConfig cfg;
  bool mode_set = false;
  detail::apply_config_layer(cfg, file, mode_set);
  detail::apply_config_layer(cfg, overrides, mode_set);
  if (!mode_set) throw ConfigError("config: mode is required (give a subcommand or the mode key)");
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path, const OrderedJson& overrides) {
  OrderedJson file = OrderedJson::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file '" + path + "'");
    try {
      file = OrderedJson::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
  }
  return parse_run_config(file, overrides);
}

}  // namespace laco
