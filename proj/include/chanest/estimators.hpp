#pragma once

// Coarse LSE -> SMP support detection -> support-restricted fine LSE, plus the
// baseline estimators the harness compares against.

#include "chanest/channel_model.hpp"
#include "chanest/numerics.hpp"
#include "chanest/smp_detector.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanest {

/// Raised by fine_lse when the detected support is empty.
class NoDetectedPaths : public std::runtime_error {
 public:
  NoDetectedPaths() : std::runtime_error("fine_lse: no detected paths (empty support)") {}
};

enum class SupportRule { threshold, top_l };

std::string to_string(SupportRule rule);
SupportRule support_rule_from_string(const std::string& name);

struct TurboConfig {
  int max_turbo_iters = 5;
  int inner_iters = 10;
  double damping = 1.0;
  SupportRule support_rule = SupportRule::threshold;
  /// Posterior threshold for SupportRule::threshold. See README for why the
  /// default is 0.9 rather than 0.5.
  double threshold = 0.9;
  /// L for SupportRule::top_l; <= 0 means round(p1 * n_r * n_t).
  int top_l = 0;
  /// Early stop once the support repeats and the relative squared change of
  /// the estimate is at most stop_tol.
  double stop_tol = 1e-12;
  /// Re-derive p1 from the detected support size after every turbo iteration.
  bool refresh_prior = false;

  void validate() const;
};

/// An estimate and its per-coefficient variance (zero where not estimated).
template <typename Scalar>
struct LsEstimate {
  Vec<Scalar> estimate;
  Eigen::VectorXd variance;
};

template <typename Scalar>
struct EstimationResult {
  Vec<Scalar> h_v_hat;
  Support support_hat;
  int iterations_run = 0;
  /// NMSE (linear) after each executed turbo iteration; empty without truth.
  std::vector<double> nmse_trace;
  Eigen::VectorXd posterior;
  /// Turbo iterations whose detected support was empty and fell back to top-1.
  int fallback_count = 0;
};

/// h = (S_bar^H S_bar)^+ S_bar^H y, solved as n_r independent T x n_t problems.
template <typename Scalar>
LsEstimate<Scalar> coarse_lse(const Observation<Scalar>& observation,
                              const TrainingDesign<Scalar>& training);

/// LS restricted to the columns in `support`; variance is
/// noise_var * diag(((S_bar U(b))^H S_bar U(b))^+) on-support and 0 elsewhere.
/// Throws NoDetectedPaths for an empty support.
template <typename Scalar>
LsEstimate<Scalar> fine_lse(const Observation<Scalar>& observation,
                            const TrainingDesign<Scalar>& training, const Support& support,
                            double noise_var);

/// fine_lse with the true support.
template <typename Scalar>
LsEstimate<Scalar> genie_lse(const Observation<Scalar>& observation,
                             const TrainingDesign<Scalar>& training,
                             const Support& true_support, double noise_var);

/// Apply the configured decision rule to a posterior vector.
Support decide_support(const Eigen::VectorXd& posterior, const TurboConfig& config,
                       const SmpPrior& prior);

/// Indices of the k largest entries (ties broken by lower index).
Support top_k_support(const Eigen::VectorXd& posterior, int k);

template <typename Scalar>
EstimationResult<Scalar> lse_smp(const Observation<Scalar>& observation,
                                 const TrainingDesign<Scalar>& training, const SmpPrior& prior,
                                 const TurboConfig& config,
                                 const VirtualChannel<Scalar>* truth = nullptr);

struct LassoOptions {
  int max_iters = 5000;
  double tol = 1e-10;  ///< relative change of the iterate
};

template <typename Scalar>
struct LassoResult {
  Vec<Scalar> estimate;
  int iterations = 0;
  bool converged = false;
};

/// min 0.5 ||y - S_bar h||^2 + lambda ||h||_1 by FISTA with fixed step
/// 1 / ||S||_2^2, run per receive-antenna block. The Gram matrix and S^H y are
/// formed once so that a lambda grid reuses them.
template <typename Scalar>
class LassoSolver {
 public:
  LassoSolver(const Observation<Scalar>& observation, const TrainingDesign<Scalar>& training);

  [[nodiscard]] LassoResult<Scalar> solve(double lambda, const LassoOptions& options = {}) const;

  /// ||S_bar^H y||_inf; every lambda at or above it gives the zero solution.
  [[nodiscard]] double lambda_max() const;

 private:
  SystemDims dims_;
  Mat<Scalar> gram_;       // S^H S
  Mat<Scalar> corr_;       // column i = S^H y_i
  double step_ = 0.0;      // 1 / ||S||_2^2
};

template <typename Scalar>
LassoResult<Scalar> lasso(const Observation<Scalar>& observation,
                          const TrainingDesign<Scalar>& training, double lambda,
                          const LassoOptions& options = {});

/// Complex-aware soft threshold: x * max(1 - t / |x|, 0).
template <typename Scalar>
Scalar soft_threshold(const Scalar& x, double t) {
  const double mag = std::abs(x);
  if (mag <= t) {
    return Scalar(0);
  }
  return x * ((mag - t) / mag);
}

struct LambdaChoice {
  double lambda = 0.0;
  double nmse = std::numeric_limits<double>::quiet_NaN();  ///< oracle mode only
};

/// Oracle mode (truth given): grid argmin of NMSE, first one on ties.
/// Blind mode: c * sigma_n * sqrt(2 ln(n_r n_t)); the grid is only checked for
/// non-emptiness.
template <typename Scalar>
LambdaChoice select_lambda(const Observation<Scalar>& observation,
                           const TrainingDesign<Scalar>& training,
                           const std::vector<double>& grid,
                           const VirtualChannel<Scalar>* truth = nullptr,
                           const LassoOptions& options = {}, double blind_c = 1.0);

/// ||estimate - truth||^2 / ||truth||^2.
template <typename Scalar>
double nmse(const Vec<Scalar>& estimate, const Vec<Scalar>& truth);

inline double to_db(double x) { return 10.0 * std::log10(x); }

template <typename Scalar>
double nmse_db(const Vec<Scalar>& estimate, const Vec<Scalar>& truth) {
  return to_db(nmse(estimate, truth));
}

}  // namespace chanest
