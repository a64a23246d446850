#include "chanest/numerics.hpp"

#include <algorithm>
#include <numbers>

namespace chanest {

namespace {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidArgument(std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

template <typename Scalar>
LsSolver<Scalar>::LsSolver(const Mat<Scalar>& a) : rows_(a.rows()), cols_(a.cols()) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw InvalidArgument("LsSolver: design matrix must be non-empty");
  }
  require_finite(a, "LsSolver: design matrix");
  Eigen::BDCSVD<Mat<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double tol = static_cast<double>(std::max(rows_, cols_)) *
                     std::numeric_limits<double>::epsilon() * smax;
  rank_ = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > tol && s(k) > 0.0) {
      ++rank_;
    }
  }
  sigma_ = s.head(rank_);
  u_ = svd.matrixU().leftCols(rank_);
  v_ = svd.matrixV().leftCols(rank_);
}

template <typename Scalar>
Vec<Scalar> LsSolver<Scalar>::solve(const Vec<Scalar>& y) const {
  if (y.size() != rows_) {
    throw InvalidArgument("LsSolver::solve: rhs length mismatch");
  }
  require_finite(y, "LsSolver::solve: rhs");
  Vec<Scalar> c = u_.adjoint() * y;
  c.array() /= sigma_.array().template cast<Scalar>();
  return v_ * c;
}

template <typename Scalar>
Mat<Scalar> LsSolver<Scalar>::solve(const Mat<Scalar>& y) const {
  if (y.rows() != rows_) {
    throw InvalidArgument("LsSolver::solve: rhs row count mismatch");
  }
  require_finite(y, "LsSolver::solve: rhs");
  Mat<Scalar> c = u_.adjoint() * y;
  for (Eigen::Index k = 0; k < rank_; ++k) {
    c.row(k) /= Scalar(sigma_(k));
  }
  return v_ * c;
}

template <typename Scalar>
Eigen::VectorXd LsSolver<Scalar>::covariance_diag(double noise_var) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  for (Eigen::Index k = 0; k < rank_; ++k) {
    const double w = 1.0 / (sigma_(k) * sigma_(k));
    for (Eigen::Index i = 0; i < cols_; ++i) {
      out(i) += abs2(v_(i, k)) * w;
    }
  }
  return noise_var * out;
}

template <typename Scalar>
Mat<Scalar> LsSolver<Scalar>::gram_pinv() const {
  Eigen::VectorXd w = sigma_.array().square().inverse();
  return v_ * w.cast<Scalar>().asDiagonal() * v_.adjoint();
}

template <typename Scalar>
LsSolution<Scalar> solve_ls(const Mat<Scalar>& a, const Vec<Scalar>& y, double noise_var) {
  if (y.size() != a.rows()) {
    throw InvalidArgument("solve_ls: rhs length does not match rows of A");
  }
  require_finite(y, "solve_ls: rhs");
  LsSolver<Scalar> solver(a);
  LsSolution<Scalar> out;
  out.estimate = solver.solve(y);
  out.residual_norm = (y - a * out.estimate).norm();
  out.rank = solver.rank();
  out.covariance_diag = solver.covariance_diag(noise_var);
  return out;
}

template <typename Scalar>
Mat<Scalar> pinv(const Mat<Scalar>& a) {
  LsSolver<Scalar> solver(a);
  return solver.solve(Mat<Scalar>(Mat<Scalar>::Identity(a.rows(), a.rows())));
}

double log_gaussian_pdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) {
    throw InvalidArgument("log_gaussian_pdf: variance must be positive");
  }
  const double r = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - r * r / (2.0 * variance);
}

double log_gaussian_pdf(Complex x, Complex mean, double variance) {
  if (!(variance > 0.0)) {
    throw InvalidArgument("log_gaussian_pdf: variance must be positive");
  }
  return -std::log(std::numbers::pi * variance) - std::norm(x - mean) / variance;
}

double gaussian_pdf(double x, double mean, double variance) {
  return std::exp(log_gaussian_pdf(x, mean, variance));
}

template class LsSolver<double>;
template class LsSolver<Complex>;
template LsSolution<double> solve_ls(const Mat<double>&, const Vec<double>&, double);
template LsSolution<Complex> solve_ls(const Mat<Complex>&, const Vec<Complex>&, double);
template Mat<double> pinv(const Mat<double>&);
template Mat<Complex> pinv(const Mat<Complex>&);

}  // namespace chanest
