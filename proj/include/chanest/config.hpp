#pragma once

#include "chanest/channel_model.hpp"
#include "chanest/estimators.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanest {

/// Invalid experiment configuration; the message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How each drawn channel is rescaled before observation.
///   none:     raw Gaussian draw
///   expected: ||h_v||^2 = L * value_var
///   fixed:    ||h_v||^2 = n_r * n_t * value_var, independent of L
enum class EnergyNorm { none, expected, fixed };

std::string to_string(EnergyNorm norm);
EnergyNorm energy_norm_from_string(const std::string& name);

struct ExperimentConfig {
  std::string name = "custom";
  SystemDims dims{32, 64, 64};
  std::vector<double> sparsity_ratios{0.007};
  std::vector<double> snr_grid_db{-10, 0, 10, 20, 30, 40};
  int trials = 200;
  TurboConfig turbo;
  std::vector<std::string> estimators{"lse", "lse_smp", "genie_lse", "lasso"};
  std::vector<std::string> bounds{"crlb_lse", "crlb_lse_smp"};
  double value_var = 10.0;
  EnergyNorm energy_norm = EnergyNorm::expected;
  TrainingKind training_kind = TrainingKind::orthogonal;
  std::uint64_t base_seed = 20240601;
  bool complex = false;
  /// LASSO lambda candidates as multiples of sigma_n * max_col_norm(S) * sqrt(2 ln N).
  std::vector<double> lasso_grid{0.25, 0.3, 0.35, 0.42, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5};
  int lasso_max_iters = 5000;
  double lasso_tol = 1e-10;
  int workers = 1;
  /// Wall time varies run to run; off by default so CSV output is byte-stable.
  bool record_wall_time = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// ||h_v||^2 expected under energy_norm for sparsity L; normalises bounds.
  [[nodiscard]] double expected_energy(int sparsity) const;
};

/// "fig4", "fig5" or "fig6"; throws ConfigError otherwise.
ExperimentConfig preset_config(const std::string& name);

/// Overlay YAML keys onto `config`. Keys are either flat field names
/// (n_r, threshold, ...) or dotted/nested paths (dims.n_r, turbo.threshold).
void apply_yaml(ExperimentConfig& config, const std::string& yaml_text);

/// defaults < preset (if non-empty) < file (if non-empty). A `preset` key in the
/// file is honoured when no preset argument is given.
ExperimentConfig load_config(const std::string& path, const std::string& preset = "");

}  // namespace chanest
