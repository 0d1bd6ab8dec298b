#pragma once

#include "maskrisk/covariance.hpp"
#include "maskrisk/types.hpp"

namespace maskrisk {

struct TheoryParams {
  double p = 0.5;
  double gamma = 1.0;  // d / n
  double kappa = 0.0;  // sigma^2 / r^2
  int n = 0;
  int d = 0;
  double n_tilde = 0.0;  // effective number of targets, n * p

  /// Fills gamma = d/n and n_tilde = n*p.
  static TheoryParams from_sizes(double p, int n, int d, double kappa);
};

/// Limiting normalized risk for Sigma = I. Throws Error(AtPhaseTransition)
/// when |gamma - p| <= 1e-9 and Error(InvalidSpec) outside p in (0,1).
double isotropic_risk(const TheoryParams& params);

/// lambda* > 0 with  n_tilde - lambda_reg / lambda* = sum_i e_i / (e_i + lambda*),
/// by log-space bisection over [1e-14, 1e14].
///
/// lambda_reg is the full guard term; to reproduce a ridge-guarded pipeline
/// with ridge parameter lambda pass lambda * n_tilde.
double solve_fixed_point(const Vector& tilde_eigs, double n_tilde, double lambda_reg = 0.0);

/// n_tilde - lambda_reg/lambda - sum_i e_i / (e_i + lambda).
double fixed_point_residual(const Vector& tilde_eigs, double n_tilde, double lambda_reg, double lambda);

/// Eigendecomposition of a masked covariance, computed once per p and
/// reusable across signals.
struct MaskedSpectrum {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns aligned with eigenvalues
};

MaskedSpectrum masked_spectrum(const Matrix& sigma, double p);
MaskedSpectrum spiked_masked_spectrum(double delta, const Vector& v, double p);

/// Point-mass encoding of the masked spectral measures: eigenvalues of the
/// masked covariance and the projections of the unit signal and the spike
/// direction on its eigenvectors.
struct SpectralMeasures {
  Vector tilde_eigs;
  Vector proj_beta;
  Vector proj_v;
};

SpectralMeasures spectral_measures(const MaskedSpectrum& spectrum, const Vector& beta_unit, const Vector& v);

/// Normalized (by r^2) predicted bias and variance.
struct TheoryResult {
  double bias = 0.0;
  double variance = 0.0;
  double total = 0.0;
  double lambda_star = 0.0;
  double c = 0.0;
  double phi_beta = 0.0;
  double phi_v = 0.0;
  double psi = 0.0;
  double u = 0.0;
};

/// Spiked-model risk through resolvent quadratic forms of the masked
/// covariance. `lambda_reg` is the fixed-point guard. This overload works on
/// the diagonal-plus-rank-one structure directly, O(d) per lambda; the
/// MaskedSpectrum overload goes through the eigenbasis.
TheoryResult spiked_risk(double delta, const Vector& v, const SignalVector& beta, const TheoryParams& params,
                         double lambda_reg = 0.0);
TheoryResult spiked_risk(const MaskedSpectrum& spectrum, double delta, const Vector& v, const SignalVector& beta,
                         const TheoryParams& params, double lambda_reg = 0.0);

/// Same quantity evaluated as finite sums over the spectral point masses.
TheoryResult spectral_risk(const SpectralMeasures& measures, double delta, double v_dot_beta,
                           const TheoryParams& params, double lambda_reg = 0.0);

}  // namespace maskrisk
