#pragma once

// Monte-Carlo driver: for every (eta, snr, trial) draw a channel, observe it,
// run the configured estimators and aggregate NMSE per grid point.

#include "chanest/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace chanest {

struct ResultRecord {
  std::string estimator;  ///< estimator or bound name
  double eta = 0.0;
  double snr_db = 0.0;
  int turbo_iter = 0;     ///< 1-based for lse_smp, 0 otherwise
  double nmse_mean = 0.0;  ///< linear
  double nmse_std_err = 0.0;
  int trials = 0;
  double wall_time = 0.0;  ///< seconds; 0 unless record_wall_time
};

/// The training block shared by every trial of an experiment.
template <typename Scalar>
TrainingDesign<Scalar> experiment_training(const ExperimentConfig& config);

/// Per-trial seed for grid point g and trial r.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t grid_point, std::size_t trial);

/// Runs the whole sweep. lse_smp yields one record per turbo iteration; when
/// the turbo loop stops early at its fixed point, later iterations repeat the
/// final NMSE. Output does not depend on the worker count. `progress`, when
/// given, receives one line per finished grid point.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         std::ostream* progress = nullptr);

/// Header plus one row per record, sorted by (estimator, eta, snr, iter).
std::string format_csv(std::vector<ResultRecord> records);
void emit_csv(const std::vector<ResultRecord>& records, const std::string& path);
std::vector<ResultRecord> read_csv(const std::string& path);
std::vector<ResultRecord> parse_csv(const std::string& text);

/// NMSE per estimator and SNR, estimator-to-bound gaps, and the convergence
/// iteration (first turbo iteration within 0.5 dB of the last one).
std::string summarize(const std::vector<ResultRecord>& records);

/// gnuplot script plotting every (estimator, eta, iter) series of `csv_path`.
std::string gnuplot_script(const std::vector<ResultRecord>& records, const std::string& csv_path);

}  // namespace chanest
