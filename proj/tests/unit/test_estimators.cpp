#include <doctest.h>

#include "chanest/estimators.hpp"
#include "chanest/random.hpp"
#include "chanest/serialization.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <cmath>

using namespace chanest;

namespace {

template <typename Scalar>
Observation<Scalar> draw(const VirtualChannel<Scalar>& ch, const TrainingDesign<Scalar>& tr,
                         double noise_var, std::uint64_t seed) {
  return observe(ch, build_observation_operator(tr, ch.dims), noise_var, seed);
}

template <typename Scalar>
Vec<Scalar> dense_ls(const Mat<Scalar>& a, const Vec<Scalar>& y) {
  return oracle::normal_equations<Scalar>(a, y);
}

}  // namespace

TEST_CASE_TEMPLATE("coarse_lse examples", Scalar, double, Complex) {
  SUBCASE("noise-free orthogonal training is exact") {
    const SystemDims dims{4, 8, 8};
    const auto tr = make_training<Scalar>(TrainingKind::orthogonal, 8, 8);
    const auto ch = gen_sparse_channel<Scalar>(dims, 0.2, 3.0, 11);
    const auto est = coarse_lse(draw(ch, tr, 0.0, 1), tr);
    CHECK((est.estimate - ch.composed()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(est.variance.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity training returns y") {
    const SystemDims dims{2, 3, 3};
    TrainingDesign<Scalar> tr;
    tr.s_block = Mat<Scalar>::Identity(3, 3);
    Rng rng(1);
    Observation<Scalar> obs{dims, Vec<Scalar>(6), 0.5};
    for (int k = 0; k < 6; ++k) {
      obs.y(k) = draw_gaussian<Scalar>(rng, 1.0);
    }
    const auto est = coarse_lse(obs, tr);
    CHECK((est.estimate - obs.y).norm() < 1e-14);
    CHECK((est.variance.array() - 0.5).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("random 2-antenna instance against the dense normal equations") {
    const SystemDims dims{2, 4, 6};
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto tr = make_training<Scalar>(TrainingKind::gaussian, 6, 4, 100 + s);
      const auto ch = gen_sparse_channel<Scalar>(dims, 0.5, 1.0, s);
      const auto obs = draw(ch, tr, 0.3, s);
      const Mat<Scalar> big = oracle::block_diag<Scalar>(tr.s_block, 2);
      const auto est = coarse_lse(obs, tr);
      CHECK((est.estimate - dense_ls<Scalar>(big, obs.y)).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::VectorXd cov = 0.3 * (big.adjoint() * big).inverse().diagonal().real();
      CHECK((est.variance - cov).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("dimension mismatch") {
    const SystemDims dims{2, 4, 6};
    const auto tr = make_training<Scalar>(TrainingKind::gaussian, 5, 4, 1);
    Observation<Scalar> obs{dims, Vec<Scalar>::Zero(12), 1.0};
    CHECK_THROWS_AS(coarse_lse(obs, tr), InvalidArgument);
  }
}

TEST_CASE_TEMPLATE("fine_lse examples", Scalar, double, Complex) {
  const SystemDims dims{2, 6, 8};
  const auto tr = make_training<Scalar>(TrainingKind::gaussian, 8, 6, 3);
  const auto ch = gen_sparse_channel<Scalar>(dims, 0.25, 2.0, 5);

  SUBCASE("all-ones support reproduces coarse_lse") {
    const auto obs = draw(ch, tr, 0.2, 2);
    const auto fine = fine_lse(obs, tr, Support::Constant(12, true), 0.2);
    const auto coarse = coarse_lse(obs, tr);
    CHECK((fine.estimate - coarse.estimate).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fine.variance - coarse.variance).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("noise-free with the true support is exact") {
    const auto obs = draw(ch, tr, 0.0, 2);
    const auto fine = fine_lse(obs, tr, ch.support, 0.0);
    CHECK((fine.estimate - ch.composed()).cwiseAbs().maxCoeff() < 1e-10);
    const auto genie = genie_lse(obs, tr, ch.support, 0.0);
    CHECK((genie.estimate - fine.estimate).norm() == 0.0);
  }
  SUBCASE("three-column submatrix oracle") {
    const auto obs = draw(ch, tr, 0.4, 9);
    Support b = Support::Constant(12, false);
    b(1) = b(4) = true;  // antenna 0
    b(6 + 2) = true;     // antenna 1
    const auto fine = fine_lse(obs, tr, b, 0.4);
    const Mat<Scalar> big = oracle::block_diag<Scalar>(tr.s_block, 2);
    Mat<Scalar> sub(16, 3);
    sub.col(0) = big.col(1);
    sub.col(1) = big.col(4);
    sub.col(2) = big.col(8);
    const Vec<Scalar> ref = dense_ls<Scalar>(sub, obs.y);
    CHECK(std::abs(fine.estimate(1) - ref(0)) < 1e-10);
    CHECK(std::abs(fine.estimate(4) - ref(1)) < 1e-10);
    CHECK(std::abs(fine.estimate(8) - ref(2)) < 1e-10);
    const Eigen::VectorXd cov = 0.4 * (sub.adjoint() * sub).inverse().diagonal().real();
    CHECK(fine.variance(1) == doctest::Approx(cov(0)).epsilon(1e-10));
    CHECK(fine.variance(8) == doctest::Approx(cov(2)).epsilon(1e-10));
    for (int k : {0, 2, 3, 5, 6, 7, 9, 10, 11}) {
      CHECK(fine.estimate(k) == Scalar(0));
      CHECK(fine.variance(k) == 0.0);
    }
  }
  SUBCASE("empty support") {
    const auto obs = draw(ch, tr, 0.4, 9);
    CHECK_THROWS_AS(fine_lse(obs, tr, Support::Constant(12, false), 0.4), NoDetectedPaths);
    CHECK_THROWS_AS(fine_lse(obs, tr, Support::Constant(5, true), 0.4), InvalidArgument);
  }
}

TEST_CASE("support decisions") {
  const Eigen::VectorXd post = (Eigen::VectorXd(5) << 0.2, 0.95, 0.5, 0.95, 0.91).finished();
  TurboConfig cfg;
  CHECK((decide_support(post, cfg, SmpPrior{0.4}) ==
         (Support(5) << false, true, false, true, true).finished())
            .all());
  cfg.threshold = 0.5;
  CHECK(decide_support(post, cfg, SmpPrior{0.4}).count() == 3);  // 0.5 itself is not above
  cfg.support_rule = SupportRule::top_l;
  cfg.top_l = 2;
  CHECK((decide_support(post, cfg, SmpPrior{0.4}) ==
         (Support(5) << false, true, false, true, false).finished())
            .all());
  cfg.top_l = 0;  // round(0.4 * 5) = 2
  CHECK(decide_support(post, cfg, SmpPrior{0.4}).count() == 2);
  CHECK(top_k_support(post, 1)(1));
  CHECK(top_k_support(post, 9).count() == 5);
  CHECK(support_rule_from_string(to_string(SupportRule::top_l)) == SupportRule::top_l);
  CHECK_THROWS(support_rule_from_string("majority"));
}

TEST_CASE("TurboConfig validation") {
  TurboConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = ok;
  bad.max_turbo_iters = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = ok;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = ok;
  bad.damping = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = ok;
  bad.top_l = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("lse_smp: noise-free orthogonal training recovers the channel in one iteration") {
  const SystemDims dims{32, 64, 64};
  const auto tr = make_training<double>(TrainingKind::orthogonal, 64, 64);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto ch = gen_sparse_channel<double>(dims, 0.007, 10.0, seed);
    const auto obs = draw(ch, tr, 0.0, seed);
    TurboConfig cfg;
    cfg.max_turbo_iters = 1;
    const auto res = lse_smp(obs, tr, SmpPrior::from_sparsity(ch.sparsity, dims), cfg, &ch);
    CHECK(res.iterations_run == 1);
    REQUIRE(res.nmse_trace.size() == 1);
    CHECK(res.nmse_trace[0] < 1e-18);
    CHECK((res.support_hat == ch.support).all());
  }
}

TEST_CASE_TEMPLATE("lse_smp invariants", Scalar, double, Complex) {
  const SystemDims dims{4, 16, 16};
  const auto tr = make_training<Scalar>(TrainingKind::orthogonal, 16, 16);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ch = gen_sparse_channel<Scalar>(dims, 0.06, 10.0, seed);
    const double nv = snr_to_noise_var(tr, dims, 10.0 + 2.0 * static_cast<double>(seed));
    const auto obs = draw(ch, tr, nv, seed + 50);
    const auto prior = SmpPrior::from_sparsity(ch.sparsity, dims);
    TurboConfig cfg;
    const auto res = lse_smp(obs, tr, prior, cfg, &ch);
    // Zero off the detected support.
    for (int k = 0; k < dims.n_coeffs(); ++k) {
      if (!res.support_hat(k)) {
        CHECK(res.h_v_hat(k) == Scalar(0));
      }
    }
    CHECK(static_cast<int>(res.nmse_trace.size()) == res.iterations_run);
    CHECK(res.iterations_run >= 1);
    CHECK(res.iterations_run <= cfg.max_turbo_iters);
    CHECK(res.posterior.size() == dims.n_coeffs());
    CHECK(res.nmse_trace.back() == doctest::Approx(nmse(res.h_v_hat, ch.composed())));

    // One more allowed iteration after the loop settled changes nothing.
    if (res.iterations_run < cfg.max_turbo_iters) {
      auto more = cfg;
      more.max_turbo_iters = res.iterations_run + 1;
      const auto again = lse_smp(obs, tr, prior, more, &ch);
      CHECK(std::abs(again.nmse_trace.back() - res.nmse_trace.back()) < cfg.stop_tol);
    }
  }
}

TEST_CASE("lse_smp falls back to the strongest entry when nothing is detected") {
  const SystemDims dims{2, 4, 4};
  const auto tr = make_training<double>(TrainingKind::orthogonal, 4, 4);
  Observation<double> obs{dims, Eigen::VectorXd::Zero(8), 1.0};
  TurboConfig cfg;
  cfg.max_turbo_iters = 2;
  const auto res = lse_smp(obs, tr, SmpPrior{0.05}, cfg);
  CHECK(res.fallback_count >= 1);
  CHECK(res.support_hat.count() == 1);
  CHECK(res.nmse_trace.empty());
}

TEST_CASE("lse_smp beats plain LSE by more than 10 dB at 20 dB SNR") {
  const SystemDims dims{32, 64, 64};
  const auto tr = make_training<double>(TrainingKind::orthogonal, 64, 64);
  const auto op = build_observation_operator(tr, dims);
  const double nv = snr_to_noise_var(tr, dims, 20.0);
  double lse_sum = 0.0;
  double smp_sum = 0.0;
  const int trials = 20;
  for (int r = 0; r < trials; ++r) {
    auto ch = gen_sparse_channel<double>(dims, 0.007, 10.0, 700 + r);
    normalize_energy(ch, ch.sparsity * 10.0);
    const auto obs = observe(ch, op, nv, 900 + r);
    lse_sum += nmse(coarse_lse(obs, tr).estimate, ch.composed());
    smp_sum += lse_smp(obs, tr, SmpPrior::from_sparsity(ch.sparsity, dims), TurboConfig{}, &ch)
                   .nmse_trace.back();
  }
  CHECK(to_db(lse_sum / trials) - to_db(smp_sum / trials) > 10.0);
}

TEST_CASE("genie_lse is unbiased with the LS covariance") {
  const SystemDims dims{2, 8, 8};
  const auto tr = make_training<double>(TrainingKind::gaussian, 8, 8, 77);
  auto ch = gen_sparse_channel<double>(dims, 5.0 / 16.0, 4.0, 31);
  REQUIRE(ch.sparsity == 5);
  const auto op = build_observation_operator(tr, dims);
  const double nv = 0.5;
  const int trials = 2000;
  const Eigen::VectorXd h = ch.composed();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(16);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(16);
  Eigen::VectorXd var_model;
  for (int r = 0; r < trials; ++r) {
    const auto g = genie_lse(observe(ch, op, nv, 5000 + r), tr, ch.support, nv);
    sum += g.estimate;
    sum2 += g.estimate.cwiseAbs2();
    var_model = g.variance;
  }
  const Eigen::VectorXd mean = sum / trials;
  const Eigen::VectorXd var = (sum2 - trials * mean.cwiseAbs2()) / (trials - 1);
  for (int k = 0; k < 16; ++k) {
    if (!ch.support(k)) {
      CHECK(mean(k) == 0.0);
      continue;
    }
    CHECK(std::abs(mean(k) - h(k)) <= 3.0 * std::sqrt(var(k) / trials));
    CHECK(std::abs(var(k) / var_model(k) - 1.0) <= 0.10);
  }
}

TEST_CASE_TEMPLATE("lasso examples", Scalar, double, Complex) {
  SUBCASE("identity training and lambda = 1 soft-thresholds y") {
    const SystemDims dims{1, 2, 2};
    TrainingDesign<Scalar> tr;
    tr.s_block = Mat<Scalar>::Identity(2, 2);
    Observation<Scalar> obs{dims, Vec<Scalar>(2), 1.0};
    obs.y << Scalar(3.0), Scalar(-0.5);
    const auto res = lasso(obs, tr, 1.0);
    CHECK(std::abs(res.estimate(0) - Scalar(2.0)) < 1e-12);
    CHECK(res.estimate(1) == Scalar(0));
    CHECK(res.converged);
  }
  const SystemDims dims{3, 8, 8};
  const auto tr = make_training<Scalar>(TrainingKind::orthogonal, 8, 8);
  const auto ch = gen_sparse_channel<Scalar>(dims, 0.2, 5.0, 4);
  const auto obs = draw(ch, tr, 0.1, 6);
  SUBCASE("lambda = 0 coincides with coarse LSE") {
    LassoOptions opt;
    opt.tol = 1e-14;
    opt.max_iters = 100000;
    const auto res = lasso(obs, tr, 0.0, opt);
    CHECK((res.estimate - coarse_lse(obs, tr).estimate).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("lambda at lambda_max gives zero") {
    const LassoSolver<Scalar> solver(obs, tr);
    const double lmax = solver.lambda_max();
    const Mat<Scalar> big = oracle::block_diag<Scalar>(tr.s_block, 3);
    CHECK(lmax == doctest::Approx((big.adjoint() * obs.y).cwiseAbs().maxCoeff()));
    CHECK(solver.solve(lmax).estimate.cwiseAbs().maxCoeff() == 0.0);
    CHECK(solver.solve(2 * lmax).estimate.cwiseAbs().maxCoeff() == 0.0);
    CHECK(solver.solve(0.99 * lmax).estimate.cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("negative lambda") {
    CHECK_THROWS_AS(lasso(obs, tr, -1.0), InvalidArgument);
  }
}

TEST_CASE_TEMPLATE("lasso optimality certificate on random instances", Scalar, double, Complex) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SystemDims dims{2, 6, 4 + static_cast<int>(s % 6)};
    const auto tr = make_training<Scalar>(TrainingKind::gaussian, dims.t_blocks, 6, 40 + s);
    const auto ch = gen_sparse_channel<Scalar>(dims, 0.25, 4.0, s);
    const auto obs = draw(ch, tr, 0.2, s + 1);
    const LassoSolver<Scalar> solver(obs, tr);
    const double lambda = 0.2 * solver.lambda_max();
    LassoOptions opt;
    opt.tol = 1e-15;
    opt.max_iters = 200000;
    const auto res = solver.solve(lambda, opt);
    const Mat<Scalar> big = oracle::block_diag<Scalar>(tr.s_block, 2);
    const Vec<Scalar> grad = big.adjoint() * (obs.y - big * res.estimate);
    const double tol = 1e-6 * lambda;
    for (int k = 0; k < dims.n_coeffs(); ++k) {
      if (res.estimate(k) == Scalar(0)) {
        CHECK(std::abs(grad(k)) <= lambda + tol);
      } else {
        CHECK(std::abs(std::abs(grad(k)) - lambda) <= tol);
        // Subgradient points along the coefficient.
        CHECK(std::abs(grad(k) - lambda * res.estimate(k) / std::abs(res.estimate(k))) <= tol);
      }
    }
  }
}

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  const Complex z = soft_threshold(Complex(3.0, 4.0), 2.5);
  CHECK(std::abs(z - Complex(1.5, 2.0)) < 1e-15);
}

TEST_CASE("select_lambda") {
  const SystemDims dims{32, 64, 64};
  const auto tr = make_training<double>(TrainingKind::orthogonal, 64, 64);
  const auto ch = gen_sparse_channel<double>(dims, 0.007, 10.0, 8);
  auto obs = draw(ch, tr, 1.0, 9);
  SUBCASE("blind default") {
    const auto c = select_lambda(obs, tr, {1.0});
    CHECK(c.lambda == doctest::Approx(3.905).epsilon(1e-3));
    CHECK(c.lambda == doctest::Approx(std::sqrt(2.0 * std::log(2048.0))).epsilon(1e-14));
    CHECK(std::isnan(c.nmse));
    CHECK(select_lambda<double>(obs, tr, {1.0}, nullptr, {}, 2.0).lambda == doctest::Approx(2 * c.lambda));
  }
  SUBCASE("single-element grid in oracle mode") {
    const auto c = select_lambda(obs, tr, {7.5}, &ch);
    CHECK(c.lambda == 7.5);
    CHECK(c.nmse == doctest::Approx(nmse(lasso(obs, tr, 7.5).estimate, ch.composed())));
  }
  SUBCASE("oracle mode returns the grid argmin") {
    const std::vector<double> grid{2.0, 20.0, 8.0, 60.0, 30.0};
    const auto c = select_lambda(obs, tr, grid, &ch);
    double best = 1e300;
    double arg = -1.0;
    for (double l : grid) {
      const double e = nmse(lasso(obs, tr, l).estimate, ch.composed());
      if (e < best) {
        best = e;
        arg = l;
      }
    }
    CHECK(c.lambda == arg);
    CHECK(c.nmse == doctest::Approx(best));
  }
  SUBCASE("empty grid") {
    CHECK_THROWS_AS(select_lambda(obs, tr, {}, &ch), InvalidArgument);
    CHECK_THROWS_AS(select_lambda(obs, tr, {}), InvalidArgument);
  }
}

TEST_CASE("nmse") {
  const Eigen::VectorXd h = (Eigen::VectorXd(3) << 1.0, -2.0, 0.5).finished();
  CHECK(nmse<double>(h, h) == 0.0);
  CHECK(nmse<double>(Eigen::VectorXd::Zero(3), h) == 1.0);
  CHECK(nmse_db<double>(Eigen::VectorXd::Zero(3), h) == 0.0);
  CHECK(nmse<double>(2.0 * h, h) == doctest::Approx(1.0));
  CHECK(nmse<double>(1.1 * h, h) == doctest::Approx(0.01));
  CHECK_THROWS_AS(nmse<double>(h, Eigen::VectorXd::Zero(3)), InvalidArgument);
  CHECK_THROWS_AS(nmse<double>(h, Eigen::VectorXd::Ones(2)), InvalidArgument);
}

TEST_CASE("estimation result serializes support, values and trace") {
  EstimationResult<double> r;
  r.h_v_hat = (Eigen::VectorXd(4) << 0.0, 1.5, 0.0, -2.0).finished();
  r.support_hat = (Support(4) << false, true, false, true).finished();
  r.iterations_run = 2;
  r.nmse_trace = {0.1, 0.05};
  const auto j = nlohmann::json::parse(result_to_json(r));
  CHECK(j["support"] == nlohmann::json::array({1, 3}));
  CHECK(j["values"].size() == 2);
  CHECK(j["values"][1][0] == -2.0);
  CHECK(j["iterations_run"] == 2);
  CHECK(j["nmse_trace"][1] == 0.05);
}
