#pragma once

#include <variant>

#include "maskrisk/covariance.hpp"
#include "maskrisk/rng.hpp"
#include "maskrisk/types.hpp"

namespace maskrisk {

struct ExactQuadratic {};
struct SampleEstimate {
  int n_test = 0;
};
using RiskBasis = std::variant<ExactQuadratic, SampleEstimate>;

/// Test risk of a fitted coefficient vector. `normalized` divides by the
/// risk of the zero predictor, beta^T Sigma beta (which is r^2 when
/// Sigma = I), so the null predictor always scores exactly 1.
struct RiskValue {
  double risk = 0.0;
  double normalized = 0.0;
  double null_risk = 0.0;
  RiskBasis basis = ExactQuadratic{};
};

/// (beta_hat - beta)^T Sigma (beta_hat - beta).
RiskValue exact_risk(const Vector& beta_hat, const SignalVector& beta, const CovarianceModel& model);

/// Mean squared prediction error on n_test fresh rows from N(0, Sigma).
RiskValue sample_risk(const Vector& beta_hat, const SignalVector& beta, const CovarianceModel& model,
                      int n_test, Rng& rng);

/// exp(-sum q_i log q_i) with q = s / sum(s). Throws Error(ZeroMatrix).
double effective_rank(const Matrix& M);
double effective_rank_from_singular_values(const Vector& s);

/// ||X_eval beta_hat_0||^2 / ||X_eval beta_hat_1||^2. Throws Error(DivisionByZero).
double magnitude_ratio(const Matrix& X_eval, const Vector& beta_hat_0, const Vector& beta_hat_1);

}  // namespace maskrisk
