#include "maskrisk/estimator.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <limits>

#include "maskrisk/detail/overloaded.hpp"
#include "maskrisk/error.hpp"

namespace maskrisk {

using detail::Overloaded;

void validate(const FitMethod& method) {
  std::visit(Overloaded{
                 [](const PseudoInverse& m) {
                   if (!(m.rcond >= 0.0)) throw Error(ErrorCode::InvalidSpec, "rcond must be >= 0");
                 },
                 [](const RidgeLimit& m) {
                   if (!(m.lambda > 0.0)) throw Error(ErrorCode::InvalidSpec, "ridge lambda must be > 0");
                 },
             },
             method);
}

double default_rcond(Eigen::Index rows, Eigen::Index cols) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols)) * 100.0;
}

int ThinSvd::rank(double rcond) const {
  if (s.size() == 0 || s[0] <= 0.0) return 0;
  const double cutoff = rcond * s[0];
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) ++r;
  }
  return r;
}

namespace {

// SVD of the k x k triangle from a Householder QR of `tall` (m x k, m >= k).
// Returns (Q U_r, s, V_r) with tall = (Q U_r) diag(s) V_r^T.
ThinSvd svd_of_tall(const Matrix& tall) {
  const Eigen::Index k = tall.cols();
  Eigen::HouseholderQR<Matrix> qr(tall);
  const Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Matrix> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ThinSvd out;
  out.U = qr.householderQ() * (Matrix(tall.rows(), k) << svd.matrixU(), Matrix::Zero(tall.rows() - k, k)).finished();
  out.s = svd.singularValues();
  out.V = svd.matrixV();
  return out;
}

void check_finite(const Matrix& A, const char* what) {
  if (!A.allFinite()) throw Error(ErrorCode::DegenerateInput, std::string(what) + " has non-finite entries");
}

}  // namespace

ThinSvd thin_svd(const Matrix& A) {
  check_finite(A, "matrix");
  if (A.rows() == 0 || A.cols() == 0) {
    return ThinSvd{Matrix(A.rows(), 0), Vector(0), Matrix(A.cols(), 0)};
  }
  if (A.rows() >= A.cols()) return svd_of_tall(A);
  ThinSvd t = svd_of_tall(A.transpose());
  std::swap(t.U, t.V);
  return t;
}

Matrix apply_fit(const ThinSvd& svd, const Matrix& rhs, const FitMethod& method) {
  validate(method);
  const Eigen::Index k = svd.s.size();
  Vector gain = Vector::Zero(k);
  std::visit(Overloaded{
                 [&](const PseudoInverse& m) {
                   const double rcond =
                       m.rcond > 0.0 ? m.rcond : default_rcond(svd.U.rows(), svd.V.rows());
                   const int r = svd.rank(rcond);
                   for (int i = 0; i < r; ++i) gain[i] = 1.0 / svd.s[i];
                 },
                 [&](const RidgeLimit& m) {
                   for (Eigen::Index i = 0; i < k; ++i) {
                     gain[i] = svd.s[i] / (svd.s[i] * svd.s[i] + m.lambda);
                   }
                 },
             },
             method);
  return svd.V * (gain.asDiagonal() * (svd.U.transpose() * rhs));
}

Vector apply_fit(const ThinSvd& svd, const Vector& rhs, const FitMethod& method) {
  return apply_fit(svd, Matrix(rhs), method).col(0);
}

FitResult min_norm_fit(const Matrix& X_tilde, const Vector& y_tilde, const FitMethod& method) {
  if (X_tilde.rows() != y_tilde.size()) throw Error(ErrorCode::InvalidSpec, "design and targets do not conform");
  check_finite(y_tilde, "target vector");
  const ThinSvd svd = thin_svd(X_tilde);
  FitResult out;
  out.coefficients = apply_fit(svd, y_tilde, method);
  out.singular_values = svd.s;
  out.rank = svd.rank(default_rcond(X_tilde.rows(), X_tilde.cols()));
  return out;
}

Matrix pseudo_inverse(const Matrix& A, double rcond) {
  const ThinSvd svd = thin_svd(A);
  return apply_fit(svd, Matrix(Matrix::Identity(A.rows(), A.rows())), PseudoInverse{rcond});
}

}  // namespace maskrisk
