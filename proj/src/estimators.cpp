#include "chanest/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chanest {

namespace {

template <typename Scalar>
void check_inputs(const Observation<Scalar>& observation, const TrainingDesign<Scalar>& training) {
  const SystemDims& dims = observation.dims;
  dims.validate();
  if (training.t_blocks() != dims.t_blocks || training.n_t() != dims.n_t) {
    throw InvalidArgument("estimator: training block is " + std::to_string(training.t_blocks()) +
                          "x" + std::to_string(training.n_t()) + ", expected " +
                          std::to_string(dims.t_blocks) + "x" + std::to_string(dims.n_t));
  }
  if (observation.y.size() != dims.n_obs()) {
    throw InvalidArgument("estimator: observation length does not match n_r * T");
  }
}

/// Observation as a T x n_r matrix whose column i is antenna block i.
template <typename Scalar>
Eigen::Map<const Mat<Scalar>> as_blocks(const Observation<Scalar>& observation) {
  return {observation.y.data(), observation.dims.t_blocks, observation.dims.n_r};
}

template <typename Scalar>
double relative_change(const Vec<Scalar>& next, const Vec<Scalar>& prev) {
  const double denom = prev.squaredNorm();
  const double num = (next - prev).squaredNorm();
  if (denom == 0.0) {
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return num / denom;
}

}  // namespace

std::string to_string(SupportRule rule) {
  return rule == SupportRule::threshold ? "threshold" : "top_l";
}

SupportRule support_rule_from_string(const std::string& name) {
  if (name == "threshold") {
    return SupportRule::threshold;
  }
  if (name == "top_l" || name == "top-l" || name == "topl") {
    return SupportRule::top_l;
  }
  throw InvalidArgument("unknown support rule '" + name + "' (expected threshold or top_l)");
}

void TurboConfig::validate() const {
  if (max_turbo_iters < 1) {
    throw InvalidArgument("turbo.max_turbo_iters must be >= 1");
  }
  if (inner_iters < 1) {
    throw InvalidArgument("turbo.inner_iters must be >= 1");
  }
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw InvalidArgument("turbo.damping must lie in (0, 1]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("turbo.threshold must lie in (0, 1)");
  }
  if (top_l < 0) {
    throw InvalidArgument("turbo.top_l must be >= 0");
  }
  if (!(stop_tol >= 0.0)) {
    throw InvalidArgument("turbo.stop_tol must be >= 0");
  }
}

template <typename Scalar>
LsEstimate<Scalar> coarse_lse(const Observation<Scalar>& observation,
                              const TrainingDesign<Scalar>& training) {
  check_inputs(observation, training);
  const SystemDims& dims = observation.dims;
  const LsSolver<Scalar> solver(training.s_block);
  const Mat<Scalar> coeffs = solver.solve(Mat<Scalar>(as_blocks(observation)));  // n_t x n_r

  LsEstimate<Scalar> out;
  out.estimate = Eigen::Map<const Vec<Scalar>>(coeffs.data(), coeffs.size());
  out.variance = solver.covariance_diag(observation.noise_var).replicate(dims.n_r, 1);
  return out;
}

template <typename Scalar>
LsEstimate<Scalar> fine_lse(const Observation<Scalar>& observation,
                            const TrainingDesign<Scalar>& training, const Support& support,
                            double noise_var) {
  check_inputs(observation, training);
  const SystemDims& dims = observation.dims;
  if (support.size() != dims.n_coeffs()) {
    throw InvalidArgument("fine_lse: support length does not match n_r * n_t");
  }
  if (!support.any()) {
    throw NoDetectedPaths();
  }
  if (!(noise_var >= 0.0)) {
    throw InvalidArgument("fine_lse: noise variance must be non-negative");
  }

  LsEstimate<Scalar> out;
  out.estimate = Vec<Scalar>::Zero(dims.n_coeffs());
  out.variance = Eigen::VectorXd::Zero(dims.n_coeffs());
  std::vector<int> cols;
  cols.reserve(static_cast<std::size_t>(dims.n_t));
  for (int i = 0; i < dims.n_r; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * dims.n_t;
    cols.clear();
    for (int j = 0; j < dims.n_t; ++j) {
      if (support(off + j)) {
        cols.push_back(j);
      }
    }
    if (cols.empty()) {
      continue;
    }
    const Mat<Scalar> sub = training.s_block(Eigen::all, cols);
    const LsSolver<Scalar> solver(sub);
    const Vec<Scalar> x = solver.solve(Vec<Scalar>(observation.antenna_block(i)));
    const Eigen::VectorXd var = solver.covariance_diag(noise_var);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out.estimate(off + cols[k]) = x(static_cast<Eigen::Index>(k));
      out.variance(off + cols[k]) = var(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

template <typename Scalar>
LsEstimate<Scalar> genie_lse(const Observation<Scalar>& observation,
                             const TrainingDesign<Scalar>& training,
                             const Support& true_support, double noise_var) {
  return fine_lse(observation, training, true_support, noise_var);
}

Support top_k_support(const Eigen::VectorXd& posterior, int k) {
  const auto n = static_cast<int>(posterior.size());
  k = std::clamp(k, 0, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return posterior(a) > posterior(b); });
  Support out = Support::Constant(n, false);
  for (int r = 0; r < k; ++r) {
    out(order[static_cast<std::size_t>(r)]) = true;
  }
  return out;
}

Support decide_support(const Eigen::VectorXd& posterior, const TurboConfig& config,
                       const SmpPrior& prior) {
  if (config.support_rule == SupportRule::top_l) {
    int l = config.top_l;
    if (l <= 0) {
      l = std::max(1, static_cast<int>(std::floor(prior.p1 * posterior.size() + 0.5)));
    }
    return top_k_support(posterior, l);
  }
  return posterior.array() > config.threshold;
}

template <typename Scalar>
EstimationResult<Scalar> lse_smp(const Observation<Scalar>& observation,
                                 const TrainingDesign<Scalar>& training, const SmpPrior& prior,
                                 const TurboConfig& config,
                                 const VirtualChannel<Scalar>* truth) {
  config.validate();
  prior.validate();
  check_inputs(observation, training);
  const SystemDims& dims = observation.dims;
  Vec<Scalar> truth_vec;
  if (truth != nullptr) {
    if (truth->dims.n_coeffs() != dims.n_coeffs()) {
      throw InvalidArgument("lse_smp: truth dimensions do not match the observation");
    }
    truth_vec = truth->composed();
  }

  const LsEstimate<Scalar> coarse = coarse_lse(observation, training);
  ChannelBelief<Scalar> belief{coarse.estimate, coarse.variance};

  SmpOptions smp_opts;
  smp_opts.inner_iters = config.inner_iters;
  smp_opts.damping = config.damping;

  EstimationResult<Scalar> result;
  SmpPrior current = prior;
  for (int k = 1; k <= config.max_turbo_iters; ++k) {
    const SmpResult<Scalar> smp = smp_detect(observation, training, belief, current, smp_opts);
    Support b = decide_support(smp.posterior, config, current);
    if (!b.any()) {
      b = top_k_support(smp.posterior, 1);
      ++result.fallback_count;
    }
    LsEstimate<Scalar> fine = fine_lse(observation, training, b, observation.noise_var);

    const bool same_support = k > 1 && (b == result.support_hat).all();
    const bool settled =
        same_support && relative_change(fine.estimate, result.h_v_hat) <= config.stop_tol;

    result.h_v_hat = fine.estimate;
    result.support_hat = b;
    result.posterior = smp.posterior;
    result.iterations_run = k;
    if (truth != nullptr) {
      result.nmse_trace.push_back(nmse(result.h_v_hat, truth_vec));
    }
    belief = ChannelBelief<Scalar>{std::move(fine.estimate), std::move(fine.variance)};
    if (config.refresh_prior) {
      const double n = dims.n_coeffs();
      const double count = static_cast<double>(b.count());
      current.p1 = std::clamp(count / n, 0.5 / n, 1.0 - 0.5 / n);
    }
    if (settled) {
      break;
    }
  }
  return result;
}

template <typename Scalar>
LassoSolver<Scalar>::LassoSolver(const Observation<Scalar>& observation,
                                 const TrainingDesign<Scalar>& training)
    : dims_(observation.dims) {
  check_inputs(observation, training);
  const Mat<Scalar>& s = training.s_block;
  gram_ = s.adjoint() * s;
  corr_ = s.adjoint() * as_blocks(observation);
  const Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(gram_, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  step_ = top > 0.0 ? 1.0 / top : 0.0;
}

template <typename Scalar>
double LassoSolver<Scalar>::lambda_max() const {
  return corr_.size() == 0 ? 0.0 : corr_.cwiseAbs().maxCoeff();
}

template <typename Scalar>
LassoResult<Scalar> LassoSolver<Scalar>::solve(double lambda, const LassoOptions& options) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("lasso: lambda must be finite and >= 0");
  }
  if (options.max_iters < 1 || !(options.tol >= 0.0)) {
    throw InvalidArgument("lasso: max_iters must be >= 1 and tol >= 0");
  }
  const Eigen::Index n_t = dims_.n_t;
  const Eigen::Index n_r = dims_.n_r;
  LassoResult<Scalar> out;
  Mat<Scalar> x = Mat<Scalar>::Zero(n_t, n_r);
  // Zero satisfies the optimality condition exactly for lambda >= lambda_max.
  if (step_ == 0.0 || lambda >= lambda_max()) {
    out.estimate = Vec<Scalar>::Zero(n_t * n_r);
    out.converged = true;
    return out;
  }
  Mat<Scalar> z = x;
  Mat<Scalar> x_next(n_t, n_r);
  double t = 1.0;
  const double shrink = step_ * lambda;
  for (int it = 1; it <= options.max_iters; ++it) {
    const Mat<Scalar> grad = gram_ * z - corr_;
    x_next = (z - step_ * grad).unaryExpr([shrink](const Scalar& v) {
      return soft_threshold(v, shrink);
    });
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Gradient-based adaptive restart of the momentum.
    const double restart = std::real((z - x_next).cwiseProduct((x_next - x).conjugate()).sum());
    if (restart > 0.0) {
      z = x_next;
      t = 1.0;
    } else {
      z = x_next + ((t - 1.0) / t_next) * (x_next - x);
      t = t_next;
    }
    const double diff = (x_next - x).norm();
    x = x_next;
    out.iterations = it;
    if (diff <= options.tol * std::max(x.norm(), std::numeric_limits<double>::min())) {
      out.converged = true;
      break;
    }
  }
  out.estimate = Eigen::Map<const Vec<Scalar>>(x.data(), x.size());
  return out;
}

template <typename Scalar>
LassoResult<Scalar> lasso(const Observation<Scalar>& observation,
                          const TrainingDesign<Scalar>& training, double lambda,
                          const LassoOptions& options) {
  return LassoSolver<Scalar>(observation, training).solve(lambda, options);
}

template <typename Scalar>
LambdaChoice select_lambda(const Observation<Scalar>& observation,
                           const TrainingDesign<Scalar>& training,
                           const std::vector<double>& grid, const VirtualChannel<Scalar>* truth,
                           const LassoOptions& options, double blind_c) {
  if (grid.empty()) {
    throw InvalidArgument("select_lambda: lambda grid is empty");
  }
  LambdaChoice best;
  if (truth == nullptr) {
    if (!(blind_c > 0.0)) {
      throw InvalidArgument("select_lambda: blind scale c must be > 0");
    }
    const double n = observation.dims.n_coeffs();
    best.lambda = blind_c * std::sqrt(observation.noise_var) * std::sqrt(2.0 * std::log(n));
    return best;
  }
  const LassoSolver<Scalar> solver(observation, training);
  const Vec<Scalar> truth_vec = truth->composed();
  for (double lambda : grid) {
    const double err = nmse(solver.solve(lambda, options).estimate, truth_vec);
    if (std::isnan(best.nmse) || err < best.nmse) {
      best.lambda = lambda;
      best.nmse = err;
    }
  }
  return best;
}

template <typename Scalar>
double nmse(const Vec<Scalar>& estimate, const Vec<Scalar>& truth) {
  if (estimate.size() != truth.size()) {
    throw InvalidArgument("nmse: estimate and truth lengths differ");
  }
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) {
    throw InvalidArgument("nmse: truth has zero norm");
  }
  return (estimate - truth).squaredNorm() / denom;
}

#define CHANEST_INSTANTIATE(S)                                                                \
  template LsEstimate<S> coarse_lse<S>(const Observation<S>&, const TrainingDesign<S>&);      \
  template LsEstimate<S> fine_lse<S>(const Observation<S>&, const TrainingDesign<S>&,         \
                                     const Support&, double);                                 \
  template LsEstimate<S> genie_lse<S>(const Observation<S>&, const TrainingDesign<S>&,        \
                                      const Support&, double);                                \
  template EstimationResult<S> lse_smp<S>(const Observation<S>&, const TrainingDesign<S>&,    \
                                          const SmpPrior&, const TurboConfig&,                \
                                          const VirtualChannel<S>*);                          \
  template class LassoSolver<S>;                                                              \
  template LassoResult<S> lasso<S>(const Observation<S>&, const TrainingDesign<S>&, double,   \
                                   const LassoOptions&);                                      \
  template LambdaChoice select_lambda<S>(const Observation<S>&, const TrainingDesign<S>&,     \
                                         const std::vector<double>&, const VirtualChannel<S>*, \
                                         const LassoOptions&, double);                        \
  template double nmse<S>(const Vec<S>&, const Vec<S>&);

CHANEST_INSTANTIATE(double)
CHANEST_INSTANTIATE(Complex)

#undef CHANEST_INSTANTIATE

}  // namespace chanest
