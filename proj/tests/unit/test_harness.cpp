#include <doctest.h>

#include "chanest/config.hpp"
#include "chanest/harness.hpp"
#include "chanest/serialization.hpp"

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace chanest;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.name = "small";
  c.dims = {4, 16, 16};
  c.sparsity_ratios = {0.06};
  c.snr_grid_db = {10, 20};
  c.trials = 6;
  c.turbo.max_turbo_iters = 3;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("chanest_test_" + name)).string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHANEST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("presets") {
  const auto f4 = preset_config("fig4");
  CHECK(f4.dims == SystemDims{32, 64, 64});
  CHECK(f4.sparsity_ratios == std::vector<double>{0.007});
  CHECK(f4.snr_grid_db == std::vector<double>{-10, 0, 10, 20, 30, 40});
  CHECK(f4.turbo.max_turbo_iters == 5);
  CHECK(f4.trials == 200);
  CHECK_NOTHROW(f4.validate());

  const auto f5 = preset_config("fig5");
  CHECK(f5.sparsity_ratios == std::vector<double>{0.8, 0.5, 0.125, 0.007});
  CHECK(f5.energy_norm == EnergyNorm::fixed);
  CHECK_NOTHROW(f5.validate());

  const auto f6 = preset_config("fig6");
  CHECK(f6.sparsity_ratios == std::vector<double>{0.031});
  CHECK(f6.turbo.max_turbo_iters == 8);
  CHECK(f6.estimators == std::vector<std::string>{"lse_smp"});
  CHECK_NOTHROW(f6.validate());

  CHECK_THROWS_AS(preset_config("fig7"), ConfigError);
}

TEST_CASE("expected energy per normalisation mode") {
  auto c = small_config();
  c.value_var = 2.5;
  c.energy_norm = EnergyNorm::expected;
  CHECK(c.expected_energy(4) == doctest::Approx(10.0));
  c.energy_norm = EnergyNorm::fixed;
  CHECK(c.expected_energy(4) == doctest::Approx(64 * 2.5));
  c.energy_norm = EnergyNorm::none;
  CHECK(c.expected_energy(4) == doctest::Approx(10.0));
  CHECK(energy_norm_from_string(to_string(EnergyNorm::fixed)) == EnergyNorm::fixed);
}

TEST_CASE("YAML overlay") {
  auto c = preset_config("fig4");
  apply_yaml(c, "n_r: 8\nthreshold: 0.7\nsnr_grid_db: [0, 5]\n");
  CHECK(c.dims.n_r == 8);
  CHECK(c.turbo.threshold == 0.7);
  CHECK(c.snr_grid_db == std::vector<double>{0, 5});

  apply_yaml(c, "dims:\n  n_t: 16\n  t_blocks: 16\nturbo:\n  max_turbo_iters: 2\n");
  CHECK(c.dims.n_t == 16);
  CHECK(c.dims.t_blocks == 16);
  CHECK(c.turbo.max_turbo_iters == 2);

  apply_yaml(c, "turbo.support_rule: top_l\nenergy_norm: none\ncomplex: true\n");
  CHECK(c.turbo.support_rule == SupportRule::top_l);
  CHECK(c.energy_norm == EnergyNorm::none);
  CHECK(c.complex);

  try {
    apply_yaml(c, "bogus_key: 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("bogus_key", 0) == 0);
  }
  CHECK_THROWS_AS(apply_yaml(c, "trials: lots\n"), ConfigError);
  CHECK_THROWS_AS(apply_yaml(c, "[1, 2]\n"), ConfigError);
  CHECK_THROWS_AS(apply_yaml(c, "energy_norm: sideways\n"), ConfigError);
}

TEST_CASE("validation errors carry the field path") {
  const auto expect_field = [](ExperimentConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).rfind(field, 0) == 0);
    }
  };
  auto c = small_config();
  c.sparsity_ratios = {0.06, 0.0};
  expect_field(c, "sparsity_ratios[1]");
  c = small_config();
  c.sparsity_ratios = {0.001};  // L rounds to zero
  expect_field(c, "sparsity_ratios[0]");
  c = small_config();
  c.snr_grid_db.clear();
  expect_field(c, "snr_grid_db");
  c = small_config();
  c.trials = 0;
  expect_field(c, "trials");
  c = small_config();
  c.dims.t_blocks = 8;
  expect_field(c, "dims.t_blocks");
  c = small_config();
  c.estimators = {"lse", "omp"};
  expect_field(c, "estimators[1]");
  c = small_config();
  c.bounds = {"crlb_magic"};
  expect_field(c, "bounds[0]");
  c = small_config();
  c.turbo.threshold = 1.5;
  expect_field(c, "turbo.threshold");
  c = small_config();
  c.value_var = -1.0;
  expect_field(c, "value_var");
  // Errors are raised before any computation.
  c = small_config();
  c.trials = -3;
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("load_config precedence") {
  const std::string path = temp_path("cfg.yaml");
  write_text_file(path, "preset: fig6\ntrials: 7\n");
  const auto a = load_config(path);
  CHECK(a.turbo.max_turbo_iters == 8);
  CHECK(a.trials == 7);
  const auto b = load_config(path, "fig5");
  CHECK(b.sparsity_ratios.size() == 4);
  CHECK(b.trials == 7);
  CHECK(load_config("", "fig4").trials == 200);
  CHECK_THROWS(load_config(temp_path("missing.yaml")));
  std::filesystem::remove(path);
}

TEST_CASE("single grid point, lse only") {
  auto c = small_config();
  c.snr_grid_db = {20};
  c.trials = 1;
  c.estimators = {"lse"};
  c.bounds.clear();
  const auto recs = run_experiment(c);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].estimator == "lse");
  CHECK(recs[0].trials == 1);
  CHECK(recs[0].nmse_mean > 0.0);
  CHECK(recs[0].nmse_std_err == 0.0);
  CHECK(recs[0].turbo_iter == 0);
  // One estimator at one point summarizes to one line.
  const std::string s = summarize(recs);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1);
}

TEST_CASE("grid coverage") {
  auto c = small_config();
  c.sparsity_ratios = {0.06, 0.1};
  c.snr_grid_db = {0, 15, 30};
  c.trials = 2;
  const auto recs = run_experiment(c);
  // (lse, genie_lse, lasso, 2 bounds) per point plus one lse_smp row per turbo iteration.
  CHECK(recs.size() == (5 + 3) * 2 * 3);
  std::set<std::tuple<std::string, double, double, int>> keys;
  for (const auto& r : recs) {
    keys.insert({r.estimator, r.eta, r.snr_db, r.turbo_iter});
    CHECK(r.nmse_mean > 0.0);
    CHECK(r.nmse_std_err >= 0.0);
    CHECK(r.wall_time == 0.0);
  }
  CHECK(keys.size() == recs.size());
}

TEST_CASE("output does not depend on the worker count") {
  auto c = small_config();
  c.complex = true;
  c.workers = 1;
  const std::string one = format_csv(run_experiment(c));
  c.workers = 3;
  const std::string three = format_csv(run_experiment(c));
  CHECK(one == three);
  c.workers = 1;
  CHECK(format_csv(run_experiment(c)) == one);
  c.base_seed += 1;
  CHECK(format_csv(run_experiment(c)) != one);
}

TEST_CASE("standard error shrinks as 1/sqrt(trials)") {
  auto c = small_config();
  c.estimators = {"lse"};
  c.bounds.clear();
  c.snr_grid_db = {10};
  c.trials = 800;
  const double se1 = run_experiment(c)[0].nmse_std_err;
  c.trials = 1600;
  const double se2 = run_experiment(c)[0].nmse_std_err;
  CHECK(se2 / se1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("CSV format") {
  CHECK_THROWS_AS(format_csv({}), InvalidArgument);
  ResultRecord r{"lse", 0.007, 20.0, 0, 0.1, 0.01, 200, 0.0};
  const std::string csv = format_csv({r});
  CHECK(csv ==
        "estimator,eta,snr_db,turbo_iter,nmse_mean_db,nmse_stderr_db,trials,wall_time_s\n"
        "lse,0.007,20,0,-10,0.434294,200,0\n");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  // Rows sort by (estimator, eta, snr, iter) whatever the input order.
  ResultRecord a{"lse_smp", 0.007, 20.0, 2, 0.01, 0.0, 5, 0.0};
  ResultRecord b{"lse_smp", 0.007, 20.0, 1, 0.02, 0.0, 5, 0.0};
  ResultRecord d{"lasso", 0.007, 30.0, 0, 0.03, 0.0, 5, 0.0};
  const auto parsed = parse_csv(format_csv({a, r, b, d}));
  REQUIRE(parsed.size() == 4);
  CHECK(parsed[0].estimator == "lasso");
  CHECK(parsed[1].estimator == "lse");
  CHECK(parsed[2].turbo_iter == 1);
  CHECK(parsed[3].turbo_iter == 2);
  CHECK(parsed[1].nmse_mean == doctest::Approx(0.1).epsilon(1e-5));
  CHECK(parsed[1].nmse_std_err == doctest::Approx(0.01).epsilon(1e-5));

  try {
    emit_csv({r}, "/nonexistent-dir/out.csv");
    FAIL("expected an I/O error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/out.csv") != std::string::npos);
  }
  const std::string path = temp_path("out.csv");
  emit_csv({r, d}, path);
  CHECK(read_text_file(path) == format_csv({r, d}));
  CHECK(read_csv(path).size() == 2);
  std::filesystem::remove(path);

  CHECK_THROWS(parse_csv("estimator,eta\nlse,1\n"));
  CHECK_THROWS(parse_csv(
      "estimator,eta,snr_db,turbo_iter,nmse_mean_db,nmse_stderr_db,trials,wall_time_s\nlse,1,2\n"));
}

TEST_CASE("summary lines") {
  std::vector<ResultRecord> recs;
  for (double snr : {20.0, 30.0}) {
    recs.push_back({"crlb_lse_smp", 0.031, snr, 0, std::pow(10.0, -snr / 10), 0.0, 4, 0.0});
    for (int k = 1; k <= 4; ++k) {
      // -5, -8, -9.8, -10 dB below the bound-free level.
      const double db[] = {-5.0, -8.0, -9.8, -10.0};
      recs.push_back({"lse_smp", 0.031, snr, k, std::pow(10.0, (db[k - 1] - snr + 10) / 10), 0.0,
                      4, 0.0});
    }
  }
  const std::string s = summarize(recs);
  CHECK(s.find("lse_smp eta=0.031 iter=4:") != std::string::npos);
  CHECK(s.find("gap lse_smp - crlb_lse_smp eta=0.031: 20 dB -> +0.00 dB; 30 dB -> +0.00 dB;") !=
        std::string::npos);
  CHECK(s.find("convergence lse_smp eta=0.031: 20 dB -> iter 3; 30 dB -> iter 3;") !=
        std::string::npos);
  const std::string plot = gnuplot_script(recs, "r.csv");
  CHECK(plot.find("lse_smp") != std::string::npos);
  CHECK(plot.find("crlb_lse_smp") != std::string::npos);
}

TEST_CASE("fig6 preset yields one row per (turbo iteration, snr)") {
  auto c = preset_config("fig6");
  c.trials = 1;
  const auto recs = run_experiment(c);
  const auto snrs = c.snr_grid_db.size();
  CHECK(recs.size() == 8 * snrs + snrs);
  std::map<double, std::set<int>> iters;
  for (const auto& r : recs) {
    if (r.estimator == "lse_smp") {
      iters[r.snr_db].insert(r.turbo_iter);
    }
  }
  CHECK(iters.size() == snrs);
  for (const auto& [snr, its] : iters) {
    CHECK(its == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8});
  }
}

TEST_CASE("fig4 curves are nonincreasing in SNR") {
  auto c = preset_config("fig4");
  c.trials = 16;
  const auto recs = run_experiment(c);
  std::map<std::string, std::map<double, ResultRecord>> curves;
  for (const auto& r : recs) {
    if (r.estimator == "lse_smp" && r.turbo_iter != c.turbo.max_turbo_iters) {
      continue;
    }
    curves[r.estimator][r.snr_db] = r;
  }
  CHECK(curves.size() == 6);
  for (const auto& [name, pts] : curves) {
    const ResultRecord* prev = nullptr;
    for (const auto& [snr, r] : pts) {
      if (prev != nullptr) {
        INFO(name << " at " << snr << " dB");
        CHECK(r.nmse_mean <= prev->nmse_mean + 2.0 * (r.nmse_std_err + prev->nmse_std_err));
      }
      prev = &r;
    }
  }
}

TEST_CASE("CLI exit codes") {
  const std::string cfg = temp_path("cli.yaml");
  const std::string out = temp_path("cli.csv");
  write_text_file(cfg,
                  "dims: {n_r: 2, n_t: 8, t_blocks: 8}\nsparsity_ratios: [0.2]\n"
                  "snr_grid_db: [10]\ntrials: 2\n");
  CHECK(run_cli("run --quiet --config " + cfg + " --out " + out) == 0);
  CHECK(read_csv(out).size() == 5 + 5);  // 5 turbo rows
  CHECK(run_cli("summarize " + out) == 0);
  CHECK(run_cli("bound --eta 0.007 --snr 20") == 0);

  write_text_file(cfg, "trials: 0\n");
  CHECK(run_cli("run --quiet --config " + cfg + " --out " + out) == 1);
  write_text_file(cfg, "unknown_field: 1\n");
  CHECK(run_cli("run --quiet --config " + cfg + " --out " + out) == 1);
  CHECK(run_cli("run --quiet --preset fig9") == 1);
  CHECK(run_cli("bound --eta 0 --snr 20") == 1);
  CHECK(run_cli("--no-such-flag") == 1);

  write_text_file(cfg, "dims: {n_r: 2, n_t: 8, t_blocks: 8}\nsparsity_ratios: [0.2]\n"
                       "snr_grid_db: [10]\ntrials: 1\n");
  CHECK(run_cli("run --quiet --config " + cfg + " --out /nonexistent-dir/x.csv") == 2);
  CHECK(run_cli("summarize " + temp_path("missing.csv")) == 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(out);
}
