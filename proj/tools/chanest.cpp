// chanest: Monte-Carlo sweeps for the LSE-SMP channel estimator.
//
//   chanest run --preset fig4 --out results.csv
//   chanest summarize results.csv
//   chanest bound --eta 0.007 --snr 20

#include "chanest/config.hpp"
#include "chanest/crlb.hpp"
#include "chanest/harness.hpp"
#include "chanest/serialization.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

template <typename Scalar>
void print_bounds(const chanest::ExperimentConfig& config, double eta, double snr_db) {
  using namespace chanest;
  const SystemDims& dims = config.dims;
  const auto training = experiment_training<Scalar>(config);
  const double noise_var = snr_to_noise_var(training, dims, snr_db);
  const int l = sparsity_count(dims, eta);
  const double energy = config.expected_energy(l);
  const Bound<Scalar> lse = crlb_lse(training, dims.n_r, noise_var);
  // A seeded support; with orthogonal training the bound does not depend on it.
  const auto channel = gen_sparse_channel<Scalar>(dims, eta, 1.0, config.base_seed);
  const double sparse = crlb_lse_smp_trace(training, channel.support, noise_var);
  std::printf("dims %dx%d T=%d  eta=%g (L=%d)  snr=%g dB  noise_var=%.6g\n", dims.n_r, dims.n_t,
              dims.t_blocks, eta, l, snr_db, noise_var);
  std::printf("crlb_lse      %.4f dB\n", bound_db(lse.trace, energy));
  std::printf("crlb_lse_smp  %.4f dB\n", bound_db(sparse, energy));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSE-SMP sparse channel estimation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset;
  std::string out_path = "results.csv";
  std::string plot_path;
  int workers = -1;
  long long seed = -1;
  int trials = -1;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run a Monte-Carlo sweep and write CSV");
  run->add_option("--config", config_path, "YAML config file");
  run->add_option("--preset", preset, "fig4 | fig5 | fig6");
  run->add_option("--out", out_path, "output CSV path");
  run->add_option("--workers", workers, "worker threads (0 = all cores)");
  run->add_option("--seed", seed, "base seed");
  run->add_option("--trials", trials, "trials per grid point");
  run->add_option("--plot", plot_path, "also write a gnuplot script here");
  run->add_flag("--quiet", quiet, "no progress output");

  std::string csv_path;
  auto* summarize = app.add_subcommand("summarize", "summarize a results CSV");
  summarize->add_option("csv", csv_path, "results CSV")->required();

  double eta = 0.007;
  double snr = 20.0;
  std::string bound_config;
  std::string bound_preset = "fig4";
  auto* bound = app.add_subcommand("bound", "print the CRLB curves at one point");
  bound->add_option("--eta", eta, "sparsity ratio");
  bound->add_option("--snr", snr, "SNR in dB");
  bound->add_option("--config", bound_config, "YAML config file for dims and training");
  bound->add_option("--preset", bound_preset, "fig4 | fig5 | fig6");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  chanest::ExperimentConfig config;
  try {
    if (*run) {
      config = chanest::load_config(config_path, preset);
      if (workers >= 0) {
        config.workers = workers;
      }
      if (seed >= 0) {
        config.base_seed = static_cast<std::uint64_t>(seed);
      }
      if (trials >= 0) {
        config.trials = trials;
      }
      config.validate();
    } else if (*bound) {
      config = chanest::load_config(bound_config, bound_config.empty() ? bound_preset : "");
      config.validate();
      (void)chanest::sparsity_count(config.dims, eta);
    }
  } catch (const chanest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const chanest::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run) {
      const auto records = chanest::run_experiment(config, quiet ? nullptr : &std::cerr);
      chanest::emit_csv(records, out_path);
      if (!plot_path.empty()) {
        chanest::write_text_file(plot_path, chanest::gnuplot_script(records, out_path));
      }
      std::cout << chanest::summarize(records);
    } else if (*summarize) {
      std::cout << chanest::summarize(chanest::read_csv(csv_path));
    } else if (*bound) {
      if (config.complex) {
        print_bounds<chanest::Complex>(config, eta, snr);
      } else {
        print_bounds<double>(config, eta, snr);
      }
    }
  } catch (const chanest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
