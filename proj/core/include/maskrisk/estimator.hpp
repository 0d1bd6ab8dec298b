#pragma once

#include <variant>

#include "maskrisk/types.hpp"

namespace maskrisk {

/// Moore-Penrose solve. Singular values below rcond * s_max are treated as
/// zero; rcond = 0 selects default_rcond().
struct PseudoInverse {
  double rcond = 0.0;
  bool operator==(const PseudoInverse&) const = default;
};

/// (X^T X + lambda I)^{-1} X^T y, evaluated in the singular basis.
struct RidgeLimit {
  double lambda = 1e-6;
  bool operator==(const RidgeLimit&) const = default;
};

using FitMethod = std::variant<PseudoInverse, RidgeLimit>;

void validate(const FitMethod& method);

/// machine epsilon * max(rows, cols) * 100
double default_rcond(Eigen::Index rows, Eigen::Index cols);

/// Thin SVD A = U diag(s) V^T with k = min(rows, cols) columns, s descending.
/// A QR factorization along the long side runs first so the SVD itself only
/// sees a k x k triangle.
struct ThinSvd {
  Matrix U;
  Vector s;
  Matrix V;

  int rank(double rcond) const;
};

ThinSvd thin_svd(const Matrix& A);

struct FitResult {
  Vector coefficients;
  Vector singular_values;
  int rank = 0;
};

/// Throws Error(DegenerateInput) when X_tilde or y_tilde has non-finite entries.
FitResult min_norm_fit(const Matrix& X_tilde, const Vector& y_tilde, const FitMethod& method = PseudoInverse{});

/// Applies the fitted operator of a precomputed decomposition to one or more
/// right-hand sides (columns of `rhs`).
Matrix apply_fit(const ThinSvd& svd, const Matrix& rhs, const FitMethod& method);
Vector apply_fit(const ThinSvd& svd, const Vector& rhs, const FitMethod& method);

/// Explicit d x n pseudo-inverse.
Matrix pseudo_inverse(const Matrix& A, double rcond = 0.0);

}  // namespace maskrisk
