#include "maskrisk/metrics.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "maskrisk/error.hpp"
#include "maskrisk/sampling.hpp"

namespace maskrisk {

namespace {

RiskValue make_risk(double risk, const SignalVector& beta, const CovarianceModel& model, RiskBasis basis) {
  RiskValue out;
  out.risk = risk;
  out.null_risk = model.quadratic_form(beta.beta);
  out.normalized = out.null_risk > 0.0 ? risk / out.null_risk : 0.0;
  out.basis = basis;
  return out;
}

void check_dims(const Vector& beta_hat, const SignalVector& beta, const CovarianceModel& model) {
  if (beta_hat.size() != model.dim() || beta.beta.size() != model.dim()) {
    throw Error(ErrorCode::InvalidSpec, "coefficient length does not match the covariance");
  }
}

}  // namespace

RiskValue exact_risk(const Vector& beta_hat, const SignalVector& beta, const CovarianceModel& model) {
  check_dims(beta_hat, beta, model);
  const double risk = std::max(0.0, model.quadratic_form(beta_hat - beta.beta));
  return make_risk(risk, beta, model, ExactQuadratic{});
}

RiskValue sample_risk(const Vector& beta_hat, const SignalVector& beta, const CovarianceModel& model,
                      int n_test, Rng& rng) {
  check_dims(beta_hat, beta, model);
  if (n_test < 1) throw Error(ErrorCode::InvalidSpec, "n_test must be >= 1");
  const Matrix X = sample_design(model, n_test, rng);
  const double risk = (X * (beta_hat - beta.beta)).squaredNorm() / n_test;
  return make_risk(risk, beta, model, SampleEstimate{n_test});
}

double effective_rank_from_singular_values(const Vector& s) {
  const double total = s.cwiseAbs().sum();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroMatrix, "effective rank of a zero matrix");
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double q = std::abs(s[i]) / total;
    if (q > 0.0) entropy -= q * std::log(q);
  }
  return std::exp(entropy);
}

double effective_rank(const Matrix& M) {
  if (M.size() == 0) throw Error(ErrorCode::ZeroMatrix, "effective rank of an empty matrix");
  Eigen::BDCSVD<Matrix> svd(M);
  return effective_rank_from_singular_values(svd.singularValues());
}

double magnitude_ratio(const Matrix& X_eval, const Vector& beta_hat_0, const Vector& beta_hat_1) {
  const double denom = (X_eval * beta_hat_1).squaredNorm();
  if (!(denom > 0.0)) throw Error(ErrorCode::DivisionByZero, "reference predictions vanish");
  return (X_eval * beta_hat_0).squaredNorm() / denom;
}

}  // namespace maskrisk
