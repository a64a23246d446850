#include "chanest/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "chanest/serialization.hpp"

namespace chanest {

namespace {

const std::set<std::string> kEstimators{"lse", "lse_smp", "genie_lse", "lasso"};
const std::set<std::string> kBounds{"crlb_lse", "crlb_lse_smp"};

using Setter = std::function<void(ExperimentConfig&, const YAML::Node&)>;

template <typename T>
T as(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key + ": cannot convert value '" + YAML::Dump(node) + "'");
  }
}

template <typename T>
std::vector<T> as_list(const YAML::Node& node, const std::string& key) {
  if (node.IsScalar()) {
    return {as<T>(node, key)};
  }
  if (!node.IsSequence()) {
    throw ConfigError(key + ": expected a list");
  }
  std::vector<T> out;
  for (std::size_t k = 0; k < node.size(); ++k) {
    out.push_back(as<T>(node[k], key + "[" + std::to_string(k) + "]"));
  }
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"name", [](auto& c, const auto& n) { c.name = as<std::string>(n, "name"); }},
      {"dims.n_r", [](auto& c, const auto& n) { c.dims.n_r = as<int>(n, "dims.n_r"); }},
      {"dims.n_t", [](auto& c, const auto& n) { c.dims.n_t = as<int>(n, "dims.n_t"); }},
      {"dims.t_blocks",
       [](auto& c, const auto& n) { c.dims.t_blocks = as<int>(n, "dims.t_blocks"); }},
      {"sparsity_ratios",
       [](auto& c, const auto& n) { c.sparsity_ratios = as_list<double>(n, "sparsity_ratios"); }},
      {"snr_grid_db",
       [](auto& c, const auto& n) { c.snr_grid_db = as_list<double>(n, "snr_grid_db"); }},
      {"trials", [](auto& c, const auto& n) { c.trials = as<int>(n, "trials"); }},
      {"turbo.max_turbo_iters",
       [](auto& c, const auto& n) {
         c.turbo.max_turbo_iters = as<int>(n, "turbo.max_turbo_iters");
       }},
      {"turbo.inner_iters",
       [](auto& c, const auto& n) { c.turbo.inner_iters = as<int>(n, "turbo.inner_iters"); }},
      {"turbo.damping",
       [](auto& c, const auto& n) { c.turbo.damping = as<double>(n, "turbo.damping"); }},
      {"turbo.support_rule",
       [](auto& c, const auto& n) {
         try {
           c.turbo.support_rule =
               support_rule_from_string(as<std::string>(n, "turbo.support_rule"));
         } catch (const InvalidArgument& e) {
           throw ConfigError(std::string("turbo.support_rule: ") + e.what());
         }
       }},
      {"turbo.threshold",
       [](auto& c, const auto& n) { c.turbo.threshold = as<double>(n, "turbo.threshold"); }},
      {"turbo.top_l", [](auto& c, const auto& n) { c.turbo.top_l = as<int>(n, "turbo.top_l"); }},
      {"turbo.stop_tol",
       [](auto& c, const auto& n) { c.turbo.stop_tol = as<double>(n, "turbo.stop_tol"); }},
      {"turbo.refresh_prior",
       [](auto& c, const auto& n) { c.turbo.refresh_prior = as<bool>(n, "turbo.refresh_prior"); }},
      {"estimators",
       [](auto& c, const auto& n) { c.estimators = as_list<std::string>(n, "estimators"); }},
      {"bounds", [](auto& c, const auto& n) { c.bounds = as_list<std::string>(n, "bounds"); }},
      {"value_var", [](auto& c, const auto& n) { c.value_var = as<double>(n, "value_var"); }},
      {"energy_norm",
       [](auto& c, const auto& n) {
         try {
           c.energy_norm = energy_norm_from_string(as<std::string>(n, "energy_norm"));
         } catch (const InvalidArgument& e) {
           throw ConfigError(std::string("energy_norm: ") + e.what());
         }
       }},
      {"training_kind",
       [](auto& c, const auto& n) {
         try {
           c.training_kind = training_kind_from_string(as<std::string>(n, "training_kind"));
         } catch (const InvalidArgument& e) {
           throw ConfigError(std::string("training_kind: ") + e.what());
         }
       }},
      {"base_seed",
       [](auto& c, const auto& n) { c.base_seed = as<std::uint64_t>(n, "base_seed"); }},
      {"complex", [](auto& c, const auto& n) { c.complex = as<bool>(n, "complex"); }},
      {"lasso_grid",
       [](auto& c, const auto& n) { c.lasso_grid = as_list<double>(n, "lasso_grid"); }},
      {"lasso_max_iters",
       [](auto& c, const auto& n) { c.lasso_max_iters = as<int>(n, "lasso_max_iters"); }},
      {"lasso_tol", [](auto& c, const auto& n) { c.lasso_tol = as<double>(n, "lasso_tol"); }},
      {"workers", [](auto& c, const auto& n) { c.workers = as<int>(n, "workers"); }},
      {"record_wall_time",
       [](auto& c, const auto& n) { c.record_wall_time = as<bool>(n, "record_wall_time"); }},
  };
  return table;
}

/// Resolves a flat alias (n_r) or a full dotted path (dims.n_r).
std::string canonical_key(const std::string& key) {
  const auto& table = setters();
  if (table.count(key) != 0) {
    return key;
  }
  std::string match;
  for (const auto& [name, setter] : table) {
    const auto dot = name.rfind('.');
    if (dot != std::string::npos && name.substr(dot + 1) == key) {
      match = name;
    }
  }
  if (match.empty()) {
    throw ConfigError(key + ": unknown configuration key");
  }
  return match;
}

void flatten(const YAML::Node& node, const std::string& prefix,
             std::vector<std::pair<std::string, YAML::Node>>& out) {
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (kv.second.IsMap()) {
      flatten(kv.second, path, out);
    } else {
      out.emplace_back(path, kv.second);
    }
  }
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML parse error: ") + e.what());
  }
}

void check_names(const std::vector<std::string>& names, const std::set<std::string>& allowed,
                 const std::string& field) {
  std::set<std::string> seen;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string path = field + "[" + std::to_string(k) + "]";
    if (allowed.count(names[k]) == 0) {
      throw ConfigError(path + ": unknown name '" + names[k] + "'");
    }
    if (!seen.insert(names[k]).second) {
      throw ConfigError(path + ": duplicate name '" + names[k] + "'");
    }
  }
}

}  // namespace

std::string to_string(EnergyNorm norm) {
  switch (norm) {
    case EnergyNorm::none:
      return "none";
    case EnergyNorm::expected:
      return "expected";
    case EnergyNorm::fixed:
      return "fixed";
  }
  return "none";
}

EnergyNorm energy_norm_from_string(const std::string& name) {
  if (name == "none") {
    return EnergyNorm::none;
  }
  if (name == "expected") {
    return EnergyNorm::expected;
  }
  if (name == "fixed") {
    return EnergyNorm::fixed;
  }
  throw InvalidArgument("unknown energy normalisation '" + name +
                        "' (expected none, expected or fixed)");
}

void ExperimentConfig::validate() const {
  if (dims.n_r < 1) {
    throw ConfigError("dims.n_r: must be >= 1");
  }
  if (dims.n_t < 1) {
    throw ConfigError("dims.n_t: must be >= 1");
  }
  if (dims.t_blocks < 2) {
    throw ConfigError("dims.t_blocks: must be >= 2");
  }
  if (training_kind == TrainingKind::orthogonal && dims.t_blocks < dims.n_t) {
    throw ConfigError("dims.t_blocks: orthogonal training needs t_blocks >= n_t");
  }
  if (sparsity_ratios.empty()) {
    throw ConfigError("sparsity_ratios: must not be empty");
  }
  for (std::size_t k = 0; k < sparsity_ratios.size(); ++k) {
    try {
      (void)sparsity_count(dims, sparsity_ratios[k]);
    } catch (const InvalidArgument& e) {
      throw ConfigError("sparsity_ratios[" + std::to_string(k) + "]: " + e.what());
    }
  }
  if (snr_grid_db.empty()) {
    throw ConfigError("snr_grid_db: must not be empty");
  }
  for (std::size_t k = 0; k < snr_grid_db.size(); ++k) {
    if (!std::isfinite(snr_grid_db[k])) {
      throw ConfigError("snr_grid_db[" + std::to_string(k) + "]: must be finite");
    }
  }
  if (trials < 1) {
    throw ConfigError("trials: must be >= 1");
  }
  try {
    turbo.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (estimators.empty()) {
    throw ConfigError("estimators: must not be empty");
  }
  check_names(estimators, kEstimators, "estimators");
  check_names(bounds, kBounds, "bounds");
  if (!(value_var > 0.0) || !std::isfinite(value_var)) {
    throw ConfigError("value_var: must be finite and > 0");
  }
  if (std::find(estimators.begin(), estimators.end(), "lasso") != estimators.end()) {
    if (lasso_grid.empty()) {
      throw ConfigError("lasso_grid: must not be empty when lasso is enabled");
    }
    for (std::size_t k = 0; k < lasso_grid.size(); ++k) {
      if (!(lasso_grid[k] >= 0.0) || !std::isfinite(lasso_grid[k])) {
        throw ConfigError("lasso_grid[" + std::to_string(k) + "]: must be finite and >= 0");
      }
    }
  }
  if (lasso_max_iters < 1) {
    throw ConfigError("lasso_max_iters: must be >= 1");
  }
  if (!(lasso_tol >= 0.0)) {
    throw ConfigError("lasso_tol: must be >= 0");
  }
  if (workers < 0) {
    throw ConfigError("workers: must be >= 0 (0 = all hardware threads)");
  }
}

double ExperimentConfig::expected_energy(int sparsity) const {
  if (energy_norm == EnergyNorm::fixed) {
    return static_cast<double>(dims.n_coeffs()) * value_var;
  }
  return static_cast<double>(sparsity) * value_var;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "fig4") {
    return c;
  }
  if (name == "fig5") {
    c.sparsity_ratios = {0.8, 0.5, 0.125, 0.007};
    c.estimators = {"lse", "lse_smp"};
    c.bounds = {"crlb_lse", "crlb_lse_smp"};
    c.value_var = 1.0;
    c.energy_norm = EnergyNorm::fixed;
    return c;
  }
  if (name == "fig6") {
    c.sparsity_ratios = {0.031};
    c.turbo.max_turbo_iters = 8;
    c.estimators = {"lse_smp"};
    c.bounds = {"crlb_lse_smp"};
    return c;
  }
  throw ConfigError("preset: unknown preset '" + name + "' (expected fig4, fig5 or fig6)");
}

void apply_yaml(ExperimentConfig& config, const std::string& yaml_text) {
  const YAML::Node root = parse_yaml(yaml_text);
  if (!root || root.IsNull()) {
    return;
  }
  if (!root.IsMap()) {
    throw ConfigError("config: top level must be a key/value map");
  }
  std::vector<std::pair<std::string, YAML::Node>> entries;
  flatten(root, "", entries);
  const auto& table = setters();
  for (const auto& [key, node] : entries) {
    if (key == "preset") {
      continue;
    }
    table.at(canonical_key(key))(config, node);
  }
}

ExperimentConfig load_config(const std::string& path, const std::string& preset) {
  std::string text;
  if (!path.empty()) {
    try {
      text = read_text_file(path);
    } catch (const std::runtime_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  std::string chosen = preset;
  if (chosen.empty() && !text.empty()) {
    const YAML::Node root = parse_yaml(text);
    if (root && root.IsMap() && root["preset"]) {
      chosen = as<std::string>(root["preset"], "preset");
    }
  }
  ExperimentConfig config = chosen.empty() ? ExperimentConfig{} : preset_config(chosen);
  apply_yaml(config, text);
  return config;
}

}  // namespace chanest
