#pragma once

// Fisher information and Cramer-Rao bounds for the linear Gaussian model
// y_bar = S_bar h_v + n. Every matrix here is block-diagonal over receive
// antennas and is kept as a list of n_t x n_t blocks.

#include "chanest/channel_model.hpp"

#include <vector>

namespace chanest {

template <typename Scalar>
struct BlockDiagonal {
  std::vector<Mat<Scalar>> blocks;

  [[nodiscard]] int n_t() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].rows()); }
  [[nodiscard]] Eigen::VectorXd diagonal() const;
  [[nodiscard]] double trace() const { return diagonal().sum(); }
  /// Dense (n_r n_t) x (n_r n_t) matrix; tests only.
  [[nodiscard]] Mat<Scalar> dense() const;
};

template <typename Scalar>
struct Bound {
  BlockDiagonal<Scalar> covariance;
  double trace = 0.0;
};

/// sigma^2 (S_bar^H S_bar)^-1. Throws NumericalError naming the antenna block
/// when S^H S is singular.
template <typename Scalar>
Bound<Scalar> crlb_lse(const TrainingDesign<Scalar>& training, int n_r, double noise_var);

template <typename Scalar>
struct FimResult {
  BlockDiagonal<Scalar> fim;        ///< (1/sigma^2) (S_bar U(b))^H S_bar U(b)
  BlockDiagonal<Scalar> fim_pinv;
  BlockDiagonal<Scalar> g_matrix;   ///< I^+ I, equals diag(b) for independent columns
  double crlb_trace = 0.0;          ///< trace(G I^+ G^H)
  bool constraint_ok = false;       ///< G == G I I^+ to 1e-8
};

/// Requires noise_var > 0.
template <typename Scalar>
FimResult<Scalar> fim_sparse(const TrainingDesign<Scalar>& training, const Support& support,
                             double noise_var);

/// G I^+ G^H. Throws NumericalError("CRLB invalid for this support/training
/// pair") when the constraint G = G I I^+ fails.
template <typename Scalar>
Bound<Scalar> crlb_lse_smp(const TrainingDesign<Scalar>& training, const Support& support,
                           double noise_var);

/// trace(G I^+ G^H) from the on-support column submatrices alone, without
/// forming the full FIM. Matches crlb_lse_smp(...).trace.
template <typename Scalar>
double crlb_lse_smp_trace(const TrainingDesign<Scalar>& training, const Support& support,
                          double noise_var);

/// trace / expected_energy in dB, the form plotted next to NMSE curves.
double bound_db(double trace, double expected_energy);

}  // namespace chanest
