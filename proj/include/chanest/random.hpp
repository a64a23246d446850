#pragma once

#include "chanest/types.hpp"

#include <cmath>
#include <random>

namespace chanest {

using Rng = std::mt19937_64;

/// Zero-mean Gaussian sample with the given variance; circularly-symmetric
/// (variance split evenly between real and imaginary parts) for complex Scalar.
template <typename Scalar>
Scalar draw_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> unit(0.0, 1.0);
  if constexpr (is_complex_v<Scalar>) {
    const double sd = std::sqrt(variance / 2.0);
    const double re = unit(rng);
    const double im = unit(rng);
    return Scalar(sd * re, sd * im);
  } else {
    return std::sqrt(variance) * unit(rng);
  }
}

}  // namespace chanest
