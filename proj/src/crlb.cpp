#include "chanest/crlb.hpp"

#include "chanest/numerics.hpp"

#include <cmath>

namespace chanest {

namespace {

constexpr double kConstraintTol = 1e-8;

template <typename Scalar>
void check_support(const TrainingDesign<Scalar>& training, const Support& support) {
  const Eigen::Index n_t = training.n_t();
  if (n_t == 0 || support.size() == 0 || support.size() % n_t != 0) {
    throw InvalidArgument("crlb: support length must be a positive multiple of n_t");
  }
}

}  // namespace

template <typename Scalar>
Eigen::VectorXd BlockDiagonal<Scalar>::diagonal() const {
  const int n = n_t();
  Eigen::VectorXd d(static_cast<Eigen::Index>(blocks.size()) * n);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    d.segment(static_cast<Eigen::Index>(i) * n, n) = blocks[i].diagonal().real();
  }
  return d;
}

template <typename Scalar>
Mat<Scalar> BlockDiagonal<Scalar>::dense() const {
  const int n = n_t();
  const auto total = static_cast<Eigen::Index>(blocks.size()) * n;
  Mat<Scalar> out = Mat<Scalar>::Zero(total, total);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto off = static_cast<Eigen::Index>(i) * n;
    out.block(off, off, n, n) = blocks[i];
  }
  return out;
}

template <typename Scalar>
Bound<Scalar> crlb_lse(const TrainingDesign<Scalar>& training, int n_r, double noise_var) {
  if (n_r < 1) {
    throw InvalidArgument("crlb_lse: n_r must be >= 1");
  }
  if (!(noise_var >= 0.0)) {
    throw InvalidArgument("crlb_lse: noise variance must be non-negative");
  }
  const LsSolver<Scalar> solver(training.s_block);
  if (solver.rank() < training.n_t()) {
    // Every antenna block carries the same S, so the first one is reported.
    throw NumericalError("crlb_lse: S^H S is singular in antenna block 0 (rank " +
                         std::to_string(solver.rank()) + " < n_t = " +
                         std::to_string(training.n_t()) + ")");
  }
  const Mat<Scalar> block = noise_var * solver.gram_pinv();
  Bound<Scalar> out;
  out.covariance.blocks.assign(static_cast<std::size_t>(n_r), block);
  out.trace = out.covariance.trace();
  return out;
}

template <typename Scalar>
FimResult<Scalar> fim_sparse(const TrainingDesign<Scalar>& training, const Support& support,
                             double noise_var) {
  if (!(noise_var > 0.0)) {
    throw InvalidArgument("fim_sparse: noise variance must be > 0");
  }
  check_support(training, support);
  const int n_t = training.n_t();
  const auto n_r = static_cast<int>(support.size() / n_t);

  FimResult<Scalar> out;
  out.constraint_ok = true;
  for (int i = 0; i < n_r; ++i) {
    Mat<Scalar> su = training.s_block;
    for (int j = 0; j < n_t; ++j) {
      if (!support(static_cast<Eigen::Index>(i) * n_t + j)) {
        su.col(j).setZero();
      }
    }
    const Mat<Scalar> fim = (su.adjoint() * su) / noise_var;
    const Mat<Scalar> fim_pinv = pinv<Scalar>(fim);
    const Mat<Scalar> g = fim_pinv * fim;
    const Mat<Scalar> residual = g - g * fim * fim_pinv;
    if (residual.cwiseAbs().maxCoeff() > kConstraintTol) {
      out.constraint_ok = false;
    }
    out.crlb_trace += (g * fim_pinv * g.adjoint()).diagonal().real().sum();
    out.fim.blocks.push_back(fim);
    out.fim_pinv.blocks.push_back(fim_pinv);
    out.g_matrix.blocks.push_back(g);
  }
  return out;
}

template <typename Scalar>
Bound<Scalar> crlb_lse_smp(const TrainingDesign<Scalar>& training, const Support& support,
                           double noise_var) {
  Bound<Scalar> out;
  if (noise_var == 0.0) {
    check_support(training, support);
    const int n_t = training.n_t();
    out.covariance.blocks.assign(static_cast<std::size_t>(support.size() / n_t),
                                 Mat<Scalar>::Zero(n_t, n_t));
    return out;
  }
  const FimResult<Scalar> fim = fim_sparse(training, support, noise_var);
  if (!fim.constraint_ok) {
    throw NumericalError("CRLB invalid for this support/training pair");
  }
  for (std::size_t i = 0; i < fim.fim.blocks.size(); ++i) {
    const Mat<Scalar>& g = fim.g_matrix.blocks[i];
    out.covariance.blocks.push_back(g * fim.fim_pinv.blocks[i] * g.adjoint());
  }
  out.trace = out.covariance.trace();
  return out;
}

template <typename Scalar>
double crlb_lse_smp_trace(const TrainingDesign<Scalar>& training, const Support& support,
                          double noise_var) {
  if (!(noise_var >= 0.0)) {
    throw InvalidArgument("crlb_lse_smp_trace: noise variance must be non-negative");
  }
  check_support(training, support);
  const int n_t = training.n_t();
  const auto n_r = static_cast<int>(support.size() / n_t);
  double trace = 0.0;
  std::vector<int> cols;
  for (int i = 0; i < n_r; ++i) {
    cols.clear();
    for (int j = 0; j < n_t; ++j) {
      if (support(static_cast<Eigen::Index>(i) * n_t + j)) {
        cols.push_back(j);
      }
    }
    if (!cols.empty()) {
      const LsSolver<Scalar> solver(training.s_block(Eigen::all, cols));
      trace += solver.covariance_diag(noise_var).sum();
    }
  }
  return trace;
}

double bound_db(double trace, double expected_energy) {
  if (!(expected_energy > 0.0)) {
    throw InvalidArgument("bound_db: expected energy must be > 0");
  }
  return 10.0 * std::log10(trace / expected_energy);
}

#define CHANEST_INSTANTIATE(S)                                                              \
  template struct BlockDiagonal<S>;                                                         \
  template Bound<S> crlb_lse<S>(const TrainingDesign<S>&, int, double);                     \
  template FimResult<S> fim_sparse<S>(const TrainingDesign<S>&, const Support&, double);    \
  template Bound<S> crlb_lse_smp<S>(const TrainingDesign<S>&, const Support&, double);     \
  template double crlb_lse_smp_trace<S>(const TrainingDesign<S>&, const Support&, double);

CHANEST_INSTANTIATE(double)
CHANEST_INSTANTIATE(Complex)

#undef CHANEST_INSTANTIATE

}  // namespace chanest
