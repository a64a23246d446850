#include "chanest/harness.hpp"

#include "chanest/crlb.hpp"
#include "chanest/estimators.hpp"
#include "chanest/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace chanest {

namespace {

constexpr const char* kCsvHeader =
    "estimator,eta,snr_db,turbo_iter,nmse_mean_db,nmse_stderr_db,trials,wall_time_s";

// Stream tags mixed into the per-trial seed.
constexpr std::uint64_t kChannelStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kTrainingStream = 0x7472616e;

struct Column {
  std::string name;
  int iter = 0;
};

struct TrialOutcome {
  std::vector<double> values;  // one per column
  std::vector<double> seconds;
};

std::vector<Column> make_columns(const ExperimentConfig& config) {
  std::vector<Column> cols;
  for (const auto& est : config.estimators) {
    if (est == "lse_smp") {
      for (int k = 1; k <= config.turbo.max_turbo_iters; ++k) {
        cols.push_back({est, k});
      }
    } else {
      cols.push_back({est, 0});
    }
  }
  if (std::find(config.bounds.begin(), config.bounds.end(), "crlb_lse_smp") !=
      config.bounds.end()) {
    cols.push_back({"crlb_lse_smp", 0});
  }
  return cols;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Scalar>
struct Experiment {
  const ExperimentConfig& config;
  std::vector<Column> columns;
  TrainingDesign<Scalar> training;
  ObservationOperator<Scalar> op;
  double max_col_norm = 0.0;

  explicit Experiment(const ExperimentConfig& cfg)
      : config(cfg),
        columns(make_columns(cfg)),
        training(experiment_training<Scalar>(cfg)),
        op(build_observation_operator(training, cfg.dims)) {
    max_col_norm = training.s_block.colwise().norm().maxCoeff();
  }

  TrialOutcome run_trial(double eta, double snr_db, std::uint64_t seed) const {
    const SystemDims& dims = config.dims;
    TrialOutcome out;
    out.values.assign(columns.size(), 0.0);
    out.seconds.assign(columns.size(), 0.0);

    VirtualChannel<Scalar> channel =
        gen_sparse_channel<Scalar>(dims, eta, config.value_var, derive_seed(seed, kChannelStream));
    if (config.energy_norm != EnergyNorm::none) {
      normalize_energy(channel, config.expected_energy(channel.sparsity));
    }
    const double noise_var = snr_to_noise_var(training, dims, snr_db);
    const Observation<Scalar> obs =
        observe(channel, op, noise_var, derive_seed(seed, kNoiseStream), snr_db);
    const Vec<Scalar> truth = channel.composed();

    std::size_t c = 0;
    while (c < columns.size()) {
      const std::string& name = columns[c].name;
      const auto start = Clock::now();
      if (name == "lse") {
        out.values[c] = nmse(coarse_lse(obs, training).estimate, truth);
        out.seconds[c] = seconds_since(start);
        ++c;
      } else if (name == "genie_lse") {
        out.values[c] = nmse(genie_lse(obs, training, channel.support, noise_var).estimate, truth);
        out.seconds[c] = seconds_since(start);
        ++c;
      } else if (name == "lasso") {
        const double universal = std::sqrt(noise_var) * max_col_norm *
                                 std::sqrt(2.0 * std::log(static_cast<double>(dims.n_coeffs())));
        std::vector<double> grid;
        grid.reserve(config.lasso_grid.size());
        for (double m : config.lasso_grid) {
          grid.push_back(m * universal);
        }
        const LambdaChoice best = select_lambda(obs, training, grid, &channel,
                                                {config.lasso_max_iters, config.lasso_tol});
        out.values[c] = best.nmse;
        out.seconds[c] = seconds_since(start);
        ++c;
      } else if (name == "lse_smp") {
        const SmpPrior prior = SmpPrior::from_sparsity(channel.sparsity, dims);
        const EstimationResult<Scalar> res = lse_smp(obs, training, prior, config.turbo, &channel);
        const double elapsed = seconds_since(start);
        // Stopping early means the loop reached a fixed point: later turbo
        // iterations would reproduce the last estimate exactly.
        for (int k = 0; k < config.turbo.max_turbo_iters; ++k, ++c) {
          const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                 res.nmse_trace.size() - 1);
          out.values[c] = res.nmse_trace[idx];
          out.seconds[c] = elapsed;
        }
      } else {  // crlb_lse_smp
        out.values[c] = crlb_lse_smp_trace(training, channel.support, noise_var) /
                        config.expected_energy(channel.sparsity);
        out.seconds[c] = seconds_since(start);
        ++c;
      }
    }
    return out;
  }
};

struct GridPoint {
  double eta;
  double snr_db;
};

template <typename Scalar>
std::vector<ResultRecord> run_typed(const ExperimentConfig& config, std::ostream* progress) {
  const Experiment<Scalar> exp(config);
  std::vector<GridPoint> points;
  for (double eta : config.sparsity_ratios) {
    for (double snr : config.snr_grid_db) {
      points.push_back({eta, snr});
    }
  }
  const auto n_trials = static_cast<std::size_t>(config.trials);
  const std::size_t n_items = points.size() * n_trials;
  std::vector<TrialOutcome> outcomes(n_items);
  std::vector<std::atomic<std::size_t>> done(points.size());
  for (auto& d : done) {
    d = 0;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mutex;
  auto worker = [&]() {
    while (!failed) {
      const std::size_t item = next.fetch_add(1);
      if (item >= n_items) {
        return;
      }
      const std::size_t g = item / n_trials;
      const std::size_t r = item % n_trials;
      try {
        outcomes[item] = exp.run_trial(points[g].eta, points[g].snr_db,
                                       trial_seed(config.base_seed, g, r));
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mutex);
        if (!error) {
          error = std::current_exception();
        }
        failed = true;
        return;
      }
      if (done[g].fetch_add(1) + 1 == n_trials && progress != nullptr) {
        const std::lock_guard<std::mutex> lock(mutex);
        *progress << "eta=" << points[g].eta << " snr=" << points[g].snr_db << " dB done\n";
      }
    }
  };

  unsigned n_workers = config.workers == 0 ? std::thread::hardware_concurrency()
                                           : static_cast<unsigned>(config.workers);
  n_workers = std::max(1U, std::min<unsigned>(n_workers, static_cast<unsigned>(n_items)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }

  const bool want_crlb_lse = std::find(config.bounds.begin(), config.bounds.end(), "crlb_lse") !=
                             config.bounds.end();
  std::vector<ResultRecord> records;
  for (std::size_t g = 0; g < points.size(); ++g) {
    for (std::size_t c = 0; c < exp.columns.size(); ++c) {
      double sum = 0.0;
      double secs = 0.0;
      for (std::size_t r = 0; r < n_trials; ++r) {
        sum += outcomes[g * n_trials + r].values[c];
        secs += outcomes[g * n_trials + r].seconds[c];
      }
      const double mean = sum / static_cast<double>(n_trials);
      double ss = 0.0;
      for (std::size_t r = 0; r < n_trials; ++r) {
        const double d = outcomes[g * n_trials + r].values[c] - mean;
        ss += d * d;
      }
      const double se =
          n_trials > 1 ? std::sqrt(ss / static_cast<double>(n_trials - 1) / n_trials) : 0.0;
      records.push_back({exp.columns[c].name, points[g].eta, points[g].snr_db,
                         exp.columns[c].iter, mean, se, config.trials,
                         config.record_wall_time ? secs : 0.0});
    }
    if (want_crlb_lse) {
      const auto start = Clock::now();
      const double noise_var = snr_to_noise_var(exp.training, config.dims, points[g].snr_db);
      const Bound<Scalar> bound = crlb_lse(exp.training, config.dims.n_r, noise_var);
      const int l = sparsity_count(config.dims, points[g].eta);
      records.push_back({"crlb_lse", points[g].eta, points[g].snr_db, 0,
                         bound.trace / config.expected_energy(l), 0.0, config.trials,
                         config.record_wall_time ? seconds_since(start) : 0.0});
    }
  }
  return records;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

double db_of(double x) { return 10.0 * std::log10(x); }

}  // namespace

template <typename Scalar>
TrainingDesign<Scalar> experiment_training(const ExperimentConfig& config) {
  return make_training<Scalar>(config.training_kind, config.dims.t_blocks, config.dims.n_t,
                               derive_seed(config.base_seed, kTrainingStream));
}

template TrainingDesign<double> experiment_training<double>(const ExperimentConfig&);
template TrainingDesign<Complex> experiment_training<Complex>(const ExperimentConfig&);

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t grid_point, std::size_t trial) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(grid_point) + 1,
                     static_cast<std::uint64_t>(trial));
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, std::ostream* progress) {
  config.validate();
  if (config.complex) {
    return run_typed<Complex>(config, progress);
  }
  return run_typed<double>(config, progress);
}

std::string format_csv(std::vector<ResultRecord> records) {
  if (records.empty()) {
    throw InvalidArgument("emit_csv: no records to write");
  }
  std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return std::tie(a.estimator, a.eta, a.snr_db, a.turbo_iter) <
           std::tie(b.estimator, b.eta, b.snr_db, b.turbo_iter);
  });
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    const double stderr_db =
        r.nmse_mean > 0.0 ? 10.0 / std::log(10.0) * r.nmse_std_err / r.nmse_mean : 0.0;
    out += r.estimator + "," + fmt6(r.eta) + "," + fmt6(r.snr_db) + "," +
           std::to_string(r.turbo_iter) + "," + fmt6(db_of(r.nmse_mean)) + "," + fmt6(stderr_db) +
           "," + std::to_string(r.trials) + "," + fmt6(r.wall_time) + "\n";
  }
  return out;
}

void emit_csv(const std::vector<ResultRecord>& records, const std::string& path) {
  write_text_file(path, format_csv(records));
}

std::vector<ResultRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("csv: missing or unexpected header");
  }
  std::vector<ResultRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 8 fields");
    }
    ResultRecord r;
    r.estimator = f[0];
    r.eta = parse_double(f[1], line_no);
    r.snr_db = parse_double(f[2], line_no);
    r.turbo_iter = static_cast<int>(parse_double(f[3], line_no));
    r.nmse_mean = std::pow(10.0, parse_double(f[4], line_no) / 10.0);
    r.nmse_std_err = parse_double(f[5], line_no) * r.nmse_mean * std::log(10.0) / 10.0;
    r.trials = static_cast<int>(parse_double(f[6], line_no));
    r.wall_time = parse_double(f[7], line_no);
    out.push_back(r);
  }
  return out;
}

std::vector<ResultRecord> read_csv(const std::string& path) {
  return parse_csv(read_text_file(path));
}

std::string summarize(const std::vector<ResultRecord>& records) {
  if (records.empty()) {
    return "no records\n";
  }
  using Key = std::pair<std::string, double>;  // estimator, eta
  std::map<Key, int> last_iter;
  for (const auto& r : records) {
    int& it = last_iter[{r.estimator, r.eta}];
    it = std::max(it, r.turbo_iter);
  }
  // Final-iteration NMSE in dB per (estimator, eta, snr).
  std::map<Key, std::map<double, double>> curve;
  std::map<std::pair<double, double>, std::map<int, double>> trace;  // lse_smp (eta, snr)
  for (const auto& r : records) {
    if (r.turbo_iter == last_iter[{r.estimator, r.eta}]) {
      curve[{r.estimator, r.eta}][r.snr_db] = db_of(r.nmse_mean);
    }
    if (r.estimator == "lse_smp") {
      trace[{r.eta, r.snr_db}][r.turbo_iter] = db_of(r.nmse_mean);
    }
  }

  std::ostringstream out;
  char buf[128];
  for (const auto& [key, pts] : curve) {
    out << key.first << " eta=" << fmt6(key.second);
    if (last_iter[key] > 0) {
      out << " iter=" << last_iter[key];
    }
    out << ":";
    for (const auto& [snr, db] : pts) {
      std::snprintf(buf, sizeof buf, " %s dB -> %.2f dB;", fmt6(snr).c_str(), db);
      out << buf;
    }
    out << "\n";
  }

  const std::pair<const char*, const char*> gaps[] = {{"lse_smp", "crlb_lse_smp"},
                                                      {"lse", "crlb_lse"},
                                                      {"genie_lse", "crlb_lse_smp"}};
  for (const auto& [est, bound] : gaps) {
    for (const auto& [key, pts] : curve) {
      if (key.first != est) {
        continue;
      }
      const auto b = curve.find({bound, key.second});
      if (b == curve.end()) {
        continue;
      }
      out << "gap " << est << " - " << bound << " eta=" << fmt6(key.second) << ":";
      for (const auto& [snr, db] : pts) {
        const auto it = b->second.find(snr);
        if (it != b->second.end()) {
          std::snprintf(buf, sizeof buf, " %s dB -> %+.2f dB;", fmt6(snr).c_str(),
                        db - it->second);
          out << buf;
        }
      }
      out << "\n";
    }
  }

  std::map<double, std::vector<std::pair<double, int>>> convergence;
  for (const auto& [key, iters] : trace) {
    if (iters.size() < 2) {
      continue;
    }
    const double final_db = iters.rbegin()->second;
    int first = iters.rbegin()->first;
    for (const auto& [k, db] : iters) {
      if (std::abs(db - final_db) <= 0.5) {
        first = k;
        break;
      }
    }
    convergence[key.first].emplace_back(key.second, first);
  }
  for (const auto& [eta, pts] : convergence) {
    out << "convergence lse_smp eta=" << fmt6(eta) << ":";
    for (const auto& [snr, k] : pts) {
      out << " " << fmt6(snr) << " dB -> iter " << k << ";";
    }
    out << "\n";
  }
  return out.str();
}

std::string gnuplot_script(const std::vector<ResultRecord>& records, const std::string& csv_path) {
  std::map<std::tuple<std::string, std::string, int>, bool> series;
  for (const auto& r : records) {
    series[{r.estimator, fmt6(r.eta), r.turbo_iter}] = true;
  }
  std::ostringstream out;
  out << "set datafile separator ','\n"
      << "set xlabel 'SNR (dB)'\n"
      << "set ylabel 'NMSE (dB)'\n"
      << "set grid\n"
      << "set key outside right\n"
      << "plot \\\n";
  std::size_t k = 0;
  for (const auto& [key, unused] : series) {
    const auto& [est, eta, iter] = key;
    out << "  \"< awk -F, '$1==\\\"" << est << "\\\" && $2==\\\"" << eta << "\\\" && $4==" << iter
        << "' " << csv_path << "\" using 3:5 with linespoints title '" << est << " eta=" << eta;
    if (iter > 0) {
      out << " it=" << iter;
    }
    out << "'" << (++k < series.size() ? ", \\\n" : "\n");
  }
  return out.str();
}

}  // namespace chanest
