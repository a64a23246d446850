#pragma once

#include "chanest/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace chanest {

// ---------------------------------------------------------------------------
// Geometric channel and beamspace (virtual) representation
// ---------------------------------------------------------------------------

/// One propagation path of the geometric model.
struct PathParams {
  Complex gain{1.0, 0.0};
  double aod = 0.0;  ///< angle of departure, radians in [0, 2pi)
  double aoa = 0.0;  ///< angle of arrival, radians in [0, 2pi)
  double path_loss = 1.0;
  double wavelength = 1.0;
  double spacing = 0.5;  ///< inter-element distance, same unit as wavelength
};

/// Unit-norm ULA steering vector
///   (1/sqrt(n)) [1, e^{j k}, ..., e^{j (n-1) k}],  k = (2 pi d / lambda) sin(angle).
Eigen::VectorXcd array_response(double angle, int n, double wavelength = 1.0,
                                double spacing = 0.5);

/// Angle in [0, 2pi) whose steering vector equals column k of dft_matrix(n).
/// Requires spacing <= wavelength / 2 so that every grid direction is physical.
double dft_grid_angle(int k, int n, double wavelength = 1.0, double spacing = 0.5);

/// Unitary DFT matrix W(p, k) = exp(+j 2 pi p k / n) / sqrt(n). The sign matches
/// array_response so that on-grid steering vectors are columns of W.
Eigen::MatrixXcd dft_matrix(int n);

struct VirtualBasis {
  Eigen::MatrixXcd w_r;
  Eigen::MatrixXcd w_t;

  static VirtualBasis dft(const SystemDims& dims);
  static VirtualBasis identity(const SystemDims& dims);
};

/// H = A_r diag(sqrt(n_r n_t / rho) alpha) A_t^H.
Eigen::MatrixXcd geometric_channel(const SystemDims& dims, const std::vector<PathParams>& paths);

/// H_v = W_r^H H W_t.
Eigen::MatrixXcd virtual_map(const Eigen::MatrixXcd& h, const VirtualBasis& basis);
/// H = W_r H_v W_t^H.
Eigen::MatrixXcd inverse_virtual_map(const Eigen::MatrixXcd& h_v, const VirtualBasis& basis);

// ---------------------------------------------------------------------------
// Sparse virtual channel
// ---------------------------------------------------------------------------

/// h_v = U(h) b, flattened receive-antenna major.
template <typename Scalar>
struct VirtualChannel {
  SystemDims dims;
  Vec<Scalar> values;  ///< zero wherever support is false
  Support support;
  int sparsity = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] Vec<Scalar> composed() const;
  [[nodiscard]] double energy() const { return values.squaredNorm(); }
  [[nodiscard]] std::vector<int> support_indices() const;
};

/// L = round_half_up(eta * n_r * n_t); throws when eta is outside (0, 1] or L = 0.
int sparsity_count(const SystemDims& dims, double eta);

/// Uniform support of size L without replacement, i.i.d. zero-mean Gaussian
/// values of variance value_var (circular for complex).
template <typename Scalar>
VirtualChannel<Scalar> gen_sparse_channel(const SystemDims& dims, double eta, double value_var,
                                          std::uint64_t seed);

/// Rescale values so that ||h_v||^2 equals target_energy exactly.
template <typename Scalar>
void normalize_energy(VirtualChannel<Scalar>& channel, double target_energy);

/// Build a VirtualChannel from an n_r x n_t beamspace matrix, marking entries
/// with magnitude above `tol` as support.
VirtualChannel<Complex> channel_from_virtual_matrix(const Eigen::MatrixXcd& h_v,
                                                    int t_blocks, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Training and observation model
// ---------------------------------------------------------------------------

enum class TrainingKind { orthogonal, random_sign, gaussian };

std::string to_string(TrainingKind kind);
TrainingKind training_kind_from_string(std::string_view name);

/// Per-antenna training block S (T x n_t); entry (tau, j) is the symbol seen
/// from transmit beam j in time block tau.
template <typename Scalar>
struct TrainingDesign {
  Mat<Scalar> s_block;
  TrainingKind kind = TrainingKind::orthogonal;
  std::uint64_t seed = 0;

  [[nodiscard]] int t_blocks() const { return static_cast<int>(s_block.rows()); }
  [[nodiscard]] int n_t() const { return static_cast<int>(s_block.cols()); }
};

/// orthogonal: S^H S = T I with ||S||_F^2 = n_t T (Hadamard columns when T is
/// a power of two, scaled DCT-II otherwise; DFT columns for complex Scalar).
/// random_sign: +-1 entries (QPSK for complex). gaussian: unit-variance entries.
template <typename Scalar>
TrainingDesign<Scalar> make_training(TrainingKind kind, int t_blocks, int n_t,
                                     std::uint64_t seed = 0);

/// Effective block from transmitted pilots (n_t x T) under transmit basis W_t:
/// S = (W_t^H pilots)^T. The receiver is assumed to apply W_r^H combining, so
/// every receive antenna sees the same block.
TrainingDesign<Complex> training_from_pilots(const Eigen::MatrixXcd& w_t,
                                             const Eigen::MatrixXcd& pilots);

/// Block-diagonal S_bar = diag(S, ..., S) with n_r copies. Never densified on
/// the estimation path.
template <typename Scalar>
class ObservationOperator {
 public:
  ObservationOperator(Mat<Scalar> s_block, int n_r);

  [[nodiscard]] Vec<Scalar> apply(const Vec<Scalar>& h) const;
  [[nodiscard]] Vec<Scalar> adjoint_apply(const Vec<Scalar>& y) const;
  [[nodiscard]] Mat<Scalar> dense() const;

  [[nodiscard]] const Mat<Scalar>& block() const { return s_; }
  [[nodiscard]] int n_r() const { return n_r_; }
  [[nodiscard]] Eigen::Index rows() const { return n_r_ * s_.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return n_r_ * s_.cols(); }
  [[nodiscard]] double frobenius_norm2() const { return n_r_ * s_.squaredNorm(); }

 private:
  Mat<Scalar> s_;
  int n_r_;
};

template <typename Scalar>
ObservationOperator<Scalar> build_observation_operator(const TrainingDesign<Scalar>& training,
                                                       const SystemDims& dims);

template <typename Scalar>
struct Observation {
  SystemDims dims;
  Vec<Scalar> y;  ///< entry (i, tau) at i * T + tau
  double noise_var = 0.0;
  double snr_db = std::numeric_limits<double>::quiet_NaN();

  [[nodiscard]] auto antenna_block(int i) const {
    return y.segment(static_cast<Eigen::Index>(i) * dims.t_blocks, dims.t_blocks);
  }
};

/// sigma_n^2 = ||S_bar||_F^2 / (n_r T 10^(snr_db / 10)).
template <typename Scalar>
double snr_to_noise_var(const TrainingDesign<Scalar>& training, const SystemDims& dims,
                        double snr_db);

/// y_bar = S_bar h_v + n_bar.
template <typename Scalar>
Observation<Scalar> observe(const VirtualChannel<Scalar>& channel,
                            const ObservationOperator<Scalar>& op, double noise_var,
                            std::uint64_t seed,
                            double snr_db = std::numeric_limits<double>::quiet_NaN());

// ---------------------------------------------------------------------------
// Kronecker construction of the vectorized model (column-stacking vec)
// ---------------------------------------------------------------------------

template <typename Scalar>
Mat<Scalar> kron(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  Mat<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Column-stacking vec(A).
template <typename Scalar>
Vec<Scalar> vec(const Mat<Scalar>& a) {
  return Eigen::Map<const Vec<Scalar>>(a.data(), a.size());
}

/// Row-stacking flatten: the library's receive-antenna-major layout of an
/// n_r x n_t (or n_r x T) matrix.
template <typename Scalar>
Vec<Scalar> flatten_rows(const Mat<Scalar>& a) {
  Mat<Scalar> t = a.transpose();
  return vec(t);
}

/// X^T (x) W_r: the dense observation matrix of vec(Y) = (X^T (x) W_r) vec(H_v).
template <typename Scalar>
Mat<Scalar> kron_observation_matrix(const Mat<Scalar>& x, const Mat<Scalar>& w_r) {
  return kron<Scalar>(x.transpose(), w_r);
}

}  // namespace chanest
