#pragma once

#include "chanest/types.hpp"

#include <cmath>
#include <limits>

namespace chanest {

/// Probability clamp applied whenever a log-ratio is converted to a probability.
inline constexpr double kProbFloor = 1e-12;

/// ln((1 - kProbFloor) / kProbFloor): the largest log-ratio magnitude a clamped
/// probability can carry.
inline const double kMaxLogRatio = std::log((1.0 - kProbFloor) / kProbFloor);

template <typename Scalar>
struct LsSolution {
  Vec<Scalar> estimate;
  double residual_norm = 0.0;
  int rank = 0;
  /// noise_var * diag((A^H A)^+)
  Eigen::VectorXd covariance_diag;
};

/// SVD-backed least-squares solver for a fixed design matrix. Factor once, then
/// solve for as many right-hand sides as needed. Singular values below
/// max(m, n) * eps * sigma_max are treated as zero, which yields the
/// minimum-norm solution for rank-deficient designs.
template <typename Scalar>
class LsSolver {
 public:
  explicit LsSolver(const Mat<Scalar>& a);

  [[nodiscard]] Vec<Scalar> solve(const Vec<Scalar>& y) const;
  /// Column-wise solve of A X = Y.
  [[nodiscard]] Mat<Scalar> solve(const Mat<Scalar>& y) const;

  [[nodiscard]] Eigen::VectorXd covariance_diag(double noise_var) const;
  /// (A^H A)^+
  [[nodiscard]] Mat<Scalar> gram_pinv() const;

  [[nodiscard]] int rank() const { return rank_; }
  [[nodiscard]] Eigen::Index rows() const { return rows_; }
  [[nodiscard]] Eigen::Index cols() const { return cols_; }
  [[nodiscard]] const Eigen::VectorXd& singular_values() const { return sigma_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  int rank_ = 0;
  Mat<Scalar> u_;  // leading `rank_` left singular vectors
  Mat<Scalar> v_;  // leading `rank_` right singular vectors
  Eigen::VectorXd sigma_;
};

/// argmin ||y - A x||_2 with minimum-norm tie breaking.
template <typename Scalar>
LsSolution<Scalar> solve_ls(const Mat<Scalar>& a, const Vec<Scalar>& y, double noise_var = 1.0);

/// Moore-Penrose pseudo-inverse under the same rank rule as LsSolver.
template <typename Scalar>
Mat<Scalar> pinv(const Mat<Scalar>& a);

double gaussian_pdf(double x, double mean, double variance);
double log_gaussian_pdf(double x, double mean, double variance);

/// Circularly-symmetric complex Gaussian: -ln(pi v) - |x - mu|^2 / v.
double log_gaussian_pdf(Complex x, Complex mean, double variance);

/// log f(y | mean0, var0) - log f(y | mean1, var1), evaluated with a single
/// logarithm. Variances must be positive.
inline double log_density_ratio(double y, double mean0, double var0, double mean1, double var1) {
  const double r0 = y - mean0;
  const double r1 = y - mean1;
  return 0.5 * std::log(var1 / var0) - r0 * r0 / (2.0 * var0) + r1 * r1 / (2.0 * var1);
}

inline double log_density_ratio(Complex y, Complex mean0, double var0, Complex mean1,
                                double var1) {
  return std::log(var1 / var0) - std::norm(y - mean0) / var0 + std::norm(y - mean1) / var1;
}

/// 1 / (1 + exp(log_ratio)) clamped to [kProbFloor, 1 - kProbFloor].
inline double bernoulli_from_lr(double log_ratio) {
  if (std::isnan(log_ratio)) {
    return 0.5;
  }
  if (log_ratio >= kMaxLogRatio) {
    return kProbFloor;
  }
  if (log_ratio <= -kMaxLogRatio) {
    return 1.0 - kProbFloor;
  }
  return 1.0 / (1.0 + std::exp(log_ratio));
}

/// ln((1 - p) / p); inverse of bernoulli_from_lr on the unclamped range.
inline double log_ratio_of(double p) { return std::log1p(-p) - std::log(p); }

}  // namespace chanest
