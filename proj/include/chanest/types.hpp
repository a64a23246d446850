#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace chanest {

using Complex = std::complex<double>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Binary position vector b over the flattened virtual channel.
using Support = Eigen::Array<bool, Eigen::Dynamic, 1>;

template <typename Scalar>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

/// Squared magnitude; x*x for reals, |x|^2 for complex.
template <typename Scalar>
inline double abs2(const Scalar& x) {
  if constexpr (is_complex_v<Scalar>) {
    return std::norm(x);
  } else {
    return x * x;
  }
}

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Antenna counts and training length of the MIMO link.
///
/// Flat index conventions used everywhere in the library:
///   virtual channel entry (i, j)  ->  i * n_t + j      (receive-antenna major)
///   received sample (i, tau)      ->  i * t_blocks + tau
struct SystemDims {
  int n_r = 1;
  int n_t = 1;
  int t_blocks = 2;

  /// Throws InvalidArgument unless n_r >= 1, n_t >= 1 and t_blocks >= 2.
  void validate() const {
    if (n_r < 1 || n_t < 1) {
      throw InvalidArgument("SystemDims: antenna counts must be >= 1 (n_r=" + std::to_string(n_r) +
                            ", n_t=" + std::to_string(n_t) + ")");
    }
    // Extrinsic variable-node messages need at least two sum nodes per variable.
    if (t_blocks < 2) {
      throw InvalidArgument("SystemDims: t_blocks must be >= 2 (got " + std::to_string(t_blocks) +
                            ")");
    }
  }

  /// True when each per-antenna least-squares block is (at least) square.
  [[nodiscard]] bool lse_determined() const { return t_blocks >= n_t; }

  [[nodiscard]] int n_coeffs() const { return n_r * n_t; }
  [[nodiscard]] int n_obs() const { return n_r * t_blocks; }

  friend bool operator==(const SystemDims&, const SystemDims&) = default;
};

/// splitmix64 finalizer; used to derive independent RNG streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return base ^ mix_seed(mix_seed(a) ^ (b * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

}  // namespace chanest
