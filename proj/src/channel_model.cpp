#include "chanest/channel_model.hpp"

#include "chanest/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace chanest {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

Eigen::MatrixXd sylvester_hadamard(int n) {
  Eigen::MatrixXd h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < n) {
    const Eigen::Index m = h.rows();
    Eigen::MatrixXd next(2 * m, 2 * m);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

/// Orthonormal DCT-II basis (columns), n x n.
Eigen::MatrixXd dct_basis(int n) {
  Eigen::MatrixXd c(n, n);
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < n; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      c(t, k) = scale * std::cos(std::numbers::pi * (t + 0.5) * k / n);
    }
  }
  return c;
}

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) {
    w += kTwoPi;
  }
  return w;
}

}  // namespace

Eigen::VectorXcd array_response(double angle, int n, double wavelength, double spacing) {
  if (n < 1 || !(wavelength > 0.0) || !(spacing > 0.0)) {
    throw InvalidArgument("array_response: n, wavelength and spacing must be positive");
  }
  const double k = kTwoPi * spacing / wavelength * std::sin(angle);
  Eigen::VectorXcd a(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int p = 0; p < n; ++p) {
    a(p) = norm * std::polar(1.0, k * p);
  }
  return a;
}

double dft_grid_angle(int k, int n, double wavelength, double spacing) {
  if (n < 1) {
    throw InvalidArgument("dft_grid_angle: n must be >= 1");
  }
  // Steering phase step must equal 2 pi k / n modulo 2 pi.
  double u = static_cast<double>(((k % n) + n) % n) / n;
  if (u >= 0.5) {
    u -= 1.0;
  }
  const double s = u * wavelength / spacing;
  if (std::abs(s) > 1.0 + 1e-12) {
    throw InvalidArgument("dft_grid_angle: grid direction not physical for this spacing");
  }
  return wrap_angle(std::asin(std::clamp(s, -1.0, 1.0)));
}

Eigen::MatrixXcd dft_matrix(int n) {
  if (n < 1) {
    throw InvalidArgument("dft_matrix: n must be >= 1");
  }
  Eigen::MatrixXcd w(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int p = 0; p < n; ++p) {
    for (int k = 0; k < n; ++k) {
      // Reduce p*k mod n before scaling to keep the phase exact for large n.
      w(p, k) = norm * std::polar(1.0, kTwoPi * static_cast<double>((p * k) % n) / n);
    }
  }
  return w;
}

VirtualBasis VirtualBasis::dft(const SystemDims& dims) {
  return {dft_matrix(dims.n_r), dft_matrix(dims.n_t)};
}

VirtualBasis VirtualBasis::identity(const SystemDims& dims) {
  return {Eigen::MatrixXcd::Identity(dims.n_r, dims.n_r),
          Eigen::MatrixXcd::Identity(dims.n_t, dims.n_t)};
}

Eigen::MatrixXcd geometric_channel(const SystemDims& dims, const std::vector<PathParams>& paths) {
  if (paths.empty()) {
    throw InvalidArgument("geometric_channel: path list is empty");
  }
  if (dims.n_r < 1 || dims.n_t < 1) {
    throw InvalidArgument("geometric_channel: antenna counts must be >= 1");
  }
  const auto& first = paths.front();
  if (!(first.path_loss > 0.0)) {
    throw InvalidArgument("geometric_channel: path_loss must be positive");
  }
  for (const auto& p : paths) {
    if (p.wavelength != first.wavelength || p.spacing != first.spacing ||
        p.path_loss != first.path_loss) {
      throw InvalidArgument("geometric_channel: paths must share wavelength, spacing and path loss");
    }
  }
  const auto n_paths = static_cast<Eigen::Index>(paths.size());
  Eigen::MatrixXcd a_r(dims.n_r, n_paths);
  Eigen::MatrixXcd a_t(dims.n_t, n_paths);
  Eigen::VectorXcd gains(n_paths);
  const double scale = std::sqrt(static_cast<double>(dims.n_r) * dims.n_t / first.path_loss);
  for (Eigen::Index l = 0; l < n_paths; ++l) {
    const auto& p = paths[static_cast<std::size_t>(l)];
    a_r.col(l) = array_response(p.aoa, dims.n_r, p.wavelength, p.spacing);
    a_t.col(l) = array_response(p.aod, dims.n_t, p.wavelength, p.spacing);
    gains(l) = scale * p.gain;
  }
  return a_r * gains.asDiagonal() * a_t.adjoint();
}

Eigen::MatrixXcd virtual_map(const Eigen::MatrixXcd& h, const VirtualBasis& basis) {
  if (h.rows() != basis.w_r.rows() || h.cols() != basis.w_t.rows() ||
      basis.w_r.rows() != basis.w_r.cols() || basis.w_t.rows() != basis.w_t.cols()) {
    throw InvalidArgument("virtual_map: channel and basis dimensions do not match");
  }
  return basis.w_r.adjoint() * h * basis.w_t;
}

Eigen::MatrixXcd inverse_virtual_map(const Eigen::MatrixXcd& h_v, const VirtualBasis& basis) {
  if (h_v.rows() != basis.w_r.rows() || h_v.cols() != basis.w_t.rows()) {
    throw InvalidArgument("inverse_virtual_map: channel and basis dimensions do not match");
  }
  return basis.w_r * h_v * basis.w_t.adjoint();
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Vec<Scalar> VirtualChannel<Scalar>::composed() const {
  return values.cwiseProduct(support.template cast<Scalar>().matrix());
}

template <typename Scalar>
std::vector<int> VirtualChannel<Scalar>::support_indices() const {
  std::vector<int> idx;
  for (Eigen::Index k = 0; k < support.size(); ++k) {
    if (support(k)) {
      idx.push_back(static_cast<int>(k));
    }
  }
  return idx;
}

int sparsity_count(const SystemDims& dims, double eta) {
  if (!(eta > 0.0) || eta > 1.0) {
    throw InvalidArgument("sparsity ratio must lie in (0, 1], got " + std::to_string(eta));
  }
  const int l = static_cast<int>(std::floor(eta * dims.n_coeffs() + 0.5));
  if (l < 1) {
    throw InvalidArgument("sparsity ratio " + std::to_string(eta) + " yields zero nonzero entries");
  }
  return l;
}

template <typename Scalar>
VirtualChannel<Scalar> gen_sparse_channel(const SystemDims& dims, double eta, double value_var,
                                          std::uint64_t seed) {
  dims.validate();
  if (!(value_var > 0.0)) {
    throw InvalidArgument("gen_sparse_channel: value variance must be positive");
  }
  const int l = sparsity_count(dims, eta);
  const int n = dims.n_coeffs();
  Rng rng(seed);

  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(l));
  std::sample(all.begin(), all.end(), std::back_inserter(picked), l, rng);

  VirtualChannel<Scalar> ch;
  ch.dims = dims;
  ch.values = Vec<Scalar>::Zero(n);
  ch.support = Support::Constant(n, false);
  ch.sparsity = l;
  ch.seed = seed;
  for (int k : picked) {
    ch.support(k) = true;
    ch.values(k) = draw_gaussian<Scalar>(rng, value_var);
  }
  return ch;
}

template <typename Scalar>
void normalize_energy(VirtualChannel<Scalar>& channel, double target_energy) {
  if (!(target_energy > 0.0)) {
    throw InvalidArgument("normalize_energy: target energy must be positive");
  }
  const double e = channel.energy();
  if (!(e > 0.0)) {
    throw InvalidArgument("normalize_energy: channel has zero energy");
  }
  channel.values *= std::sqrt(target_energy / e);
}

VirtualChannel<Complex> channel_from_virtual_matrix(const Eigen::MatrixXcd& h_v, int t_blocks,
                                                    double tol) {
  VirtualChannel<Complex> ch;
  ch.dims = SystemDims{static_cast<int>(h_v.rows()), static_cast<int>(h_v.cols()), t_blocks};
  ch.dims.validate();
  ch.values = flatten_rows<Complex>(h_v);
  ch.support = ch.values.array().abs() > tol;
  for (Eigen::Index k = 0; k < ch.values.size(); ++k) {
    if (!ch.support(k)) {
      ch.values(k) = 0.0;
    }
  }
  ch.sparsity = static_cast<int>(ch.support.count());
  return ch;
}

// ---------------------------------------------------------------------------

std::string to_string(TrainingKind kind) {
  switch (kind) {
    case TrainingKind::orthogonal:
      return "orthogonal";
    case TrainingKind::random_sign:
      return "random_sign";
    case TrainingKind::gaussian:
      return "gaussian";
  }
  return "unknown";
}

TrainingKind training_kind_from_string(std::string_view name) {
  if (name == "orthogonal") return TrainingKind::orthogonal;
  if (name == "random_sign" || name == "random-sign") return TrainingKind::random_sign;
  if (name == "gaussian") return TrainingKind::gaussian;
  throw InvalidArgument("unknown training kind '" + std::string(name) + "'");
}

template <typename Scalar>
TrainingDesign<Scalar> make_training(TrainingKind kind, int t_blocks, int n_t,
                                     std::uint64_t seed) {
  if (t_blocks < 1 || n_t < 1) {
    throw InvalidArgument("make_training: dimensions must be positive");
  }
  TrainingDesign<Scalar> td;
  td.kind = kind;
  td.seed = seed;
  td.s_block.resize(t_blocks, n_t);
  switch (kind) {
    case TrainingKind::orthogonal: {
      if (t_blocks < n_t) {
        throw InvalidArgument("make_training: orthogonal training needs t_blocks >= n_t");
      }
      if constexpr (is_complex_v<Scalar>) {
        td.s_block = std::sqrt(static_cast<double>(t_blocks)) * dft_matrix(t_blocks).leftCols(n_t);
      } else {
        const Eigen::MatrixXd full = is_power_of_two(t_blocks)
                                         ? sylvester_hadamard(t_blocks)
                                         : Eigen::MatrixXd(std::sqrt(static_cast<double>(t_blocks)) *
                                                           dct_basis(t_blocks));
        td.s_block = full.leftCols(n_t);
      }
      break;
    }
    case TrainingKind::random_sign: {
      Rng rng(seed);
      std::bernoulli_distribution coin(0.5);
      for (int t = 0; t < t_blocks; ++t) {
        for (int j = 0; j < n_t; ++j) {
          const double a = coin(rng) ? 1.0 : -1.0;
          if constexpr (is_complex_v<Scalar>) {
            const double b = coin(rng) ? 1.0 : -1.0;
            td.s_block(t, j) = Scalar(a, b) / std::sqrt(2.0);
          } else {
            td.s_block(t, j) = a;
          }
        }
      }
      break;
    }
    case TrainingKind::gaussian: {
      Rng rng(seed);
      for (int t = 0; t < t_blocks; ++t) {
        for (int j = 0; j < n_t; ++j) {
          td.s_block(t, j) = draw_gaussian<Scalar>(rng, 1.0);
        }
      }
      break;
    }
  }
  return td;
}

TrainingDesign<Complex> training_from_pilots(const Eigen::MatrixXcd& w_t,
                                             const Eigen::MatrixXcd& pilots) {
  if (w_t.rows() != w_t.cols() || pilots.rows() != w_t.rows()) {
    throw InvalidArgument("training_from_pilots: pilots must be n_t x T with square W_t");
  }
  TrainingDesign<Complex> td;
  td.s_block = (w_t.adjoint() * pilots).transpose();
  td.kind = TrainingKind::gaussian;
  return td;
}

template <typename Scalar>
ObservationOperator<Scalar>::ObservationOperator(Mat<Scalar> s_block, int n_r)
    : s_(std::move(s_block)), n_r_(n_r) {
  if (n_r_ < 1 || s_.rows() < 1 || s_.cols() < 1) {
    throw InvalidArgument("ObservationOperator: empty training block or n_r < 1");
  }
}

template <typename Scalar>
Vec<Scalar> ObservationOperator<Scalar>::apply(const Vec<Scalar>& h) const {
  if (h.size() != cols()) {
    throw InvalidArgument("ObservationOperator::apply: vector length mismatch");
  }
  const Eigen::Index t = s_.rows();
  const Eigen::Index nt = s_.cols();
  // Column i of the reshaped input is antenna block i.
  Eigen::Map<const Mat<Scalar>> hb(h.data(), nt, n_r_);
  Mat<Scalar> yb = s_ * hb;
  return Eigen::Map<const Vec<Scalar>>(yb.data(), t * n_r_);
}

template <typename Scalar>
Vec<Scalar> ObservationOperator<Scalar>::adjoint_apply(const Vec<Scalar>& y) const {
  if (y.size() != rows()) {
    throw InvalidArgument("ObservationOperator::adjoint_apply: vector length mismatch");
  }
  const Eigen::Index t = s_.rows();
  const Eigen::Index nt = s_.cols();
  Eigen::Map<const Mat<Scalar>> yb(y.data(), t, n_r_);
  Mat<Scalar> hb = s_.adjoint() * yb;
  return Eigen::Map<const Vec<Scalar>>(hb.data(), nt * n_r_);
}

template <typename Scalar>
Mat<Scalar> ObservationOperator<Scalar>::dense() const {
  Mat<Scalar> d = Mat<Scalar>::Zero(rows(), cols());
  for (int i = 0; i < n_r_; ++i) {
    d.block(i * s_.rows(), i * s_.cols(), s_.rows(), s_.cols()) = s_;
  }
  return d;
}

template <typename Scalar>
ObservationOperator<Scalar> build_observation_operator(const TrainingDesign<Scalar>& training,
                                                       const SystemDims& dims) {
  if (training.t_blocks() != dims.t_blocks || training.n_t() != dims.n_t) {
    throw InvalidArgument("build_observation_operator: training is " +
                          std::to_string(training.t_blocks()) + "x" +
                          std::to_string(training.n_t()) + ", dims expect " +
                          std::to_string(dims.t_blocks) + "x" + std::to_string(dims.n_t));
  }
  return ObservationOperator<Scalar>(training.s_block, dims.n_r);
}

template <typename Scalar>
double snr_to_noise_var(const TrainingDesign<Scalar>& training, const SystemDims& dims,
                        double snr_db) {
  if (!std::isfinite(snr_db)) {
    throw InvalidArgument("snr_to_noise_var: SNR must be finite");
  }
  const double s_bar_norm2 = dims.n_r * training.s_block.squaredNorm();
  return s_bar_norm2 /
         (static_cast<double>(dims.n_r) * dims.t_blocks * std::pow(10.0, snr_db / 10.0));
}

template <typename Scalar>
Observation<Scalar> observe(const VirtualChannel<Scalar>& channel,
                            const ObservationOperator<Scalar>& op, double noise_var,
                            std::uint64_t seed, double snr_db) {
  if (!(noise_var >= 0.0)) {
    throw InvalidArgument("observe: noise variance must be non-negative");
  }
  if (channel.values.size() != op.cols() || channel.dims.n_r != op.n_r()) {
    throw InvalidArgument("observe: channel and operator dimensions do not match");
  }
  Observation<Scalar> obs;
  obs.dims = channel.dims;
  obs.noise_var = noise_var;
  obs.snr_db = snr_db;
  obs.y = op.apply(channel.composed());
  if (noise_var > 0.0) {
    Rng rng(seed);
    for (Eigen::Index k = 0; k < obs.y.size(); ++k) {
      obs.y(k) += draw_gaussian<Scalar>(rng, noise_var);
    }
  }
  return obs;
}

#define CHANEST_INSTANTIATE(S)                                                                  \
  template struct VirtualChannel<S>;                                                            \
  template VirtualChannel<S> gen_sparse_channel<S>(const SystemDims&, double, double,           \
                                                   std::uint64_t);                              \
  template void normalize_energy<S>(VirtualChannel<S>&, double);                                \
  template TrainingDesign<S> make_training<S>(TrainingKind, int, int, std::uint64_t);           \
  template class ObservationOperator<S>;                                                        \
  template ObservationOperator<S> build_observation_operator<S>(const TrainingDesign<S>&,       \
                                                                const SystemDims&);             \
  template double snr_to_noise_var<S>(const TrainingDesign<S>&, const SystemDims&, double);     \
  template Observation<S> observe<S>(const VirtualChannel<S>&, const ObservationOperator<S>&,   \
                                     double, std::uint64_t, double);

CHANEST_INSTANTIATE(double)
CHANEST_INSTANTIATE(Complex)

#undef CHANEST_INSTANTIATE

}  // namespace chanest
