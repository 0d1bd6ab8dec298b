#pragma once

#include <doctest.h>

#include <cmath>
#include <string>

#include "maskrisk/covariance.hpp"
#include "maskrisk/error.hpp"
#include "maskrisk/rng.hpp"

namespace test {

using maskrisk::Matrix;
using maskrisk::Vector;

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(int d, maskrisk::Rng& rng, double lo = 0.5, double hi = 5.0) {
  const Matrix q = maskrisk::haar_orthogonal(d, d, rng);
  Vector e(d);
  for (int i = 0; i < d; ++i) e[i] = rng.uniform(lo, hi);
  return q * e.asDiagonal() * q.transpose();
}

template <class F>
maskrisk::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const maskrisk::Error& e) {
    return e.code();
  }
  FAIL("expected maskrisk::Error");
  return maskrisk::ErrorCode::InvalidSpec;
}

}  // namespace test
