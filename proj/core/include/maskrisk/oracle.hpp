#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskrisk/covariance.hpp"
#include "maskrisk/rng.hpp"
#include "maskrisk/sampling.hpp"
#include "maskrisk/types.hpp"

namespace maskrisk {

/// Exact conditional bias/variance of the min-norm fit given the masked
/// design, for Gaussian rows.
struct ConditionalDecomposition {
  double bias = 0.0;
  double variance = 0.0;
  double total = 0.0;
  /// u_a = X~_{a,K} Sigma_KK^{-1} Sigma_KM beta_M, the conditional mean of the
  /// masked part of the target given the kept entries.
  Vector u;
  /// w_a = beta_M^T (Sigma_MM - Sigma_MK Sigma_KK^{-1} Sigma_KM) beta_M, the
  /// conditional variance of the masked part of the target.
  Vector w;
  /// Masked feature indices per selected row.
  std::vector<std::vector<int>> masked_sets;
};

/// Conditional decomposition from the conditional-mean correction u and the
/// per-row Schur complements of Sigma. Uses Sherman-Morrison solves for
/// spiked models and a Cholesky factorization per row otherwise.
/// Throws Error(SingularConditioning) when a kept block is not positive definite.
ConditionalDecomposition lemma1_bias_variance(const MaskedDataset& ds, const CovarianceModel& model,
                                              const SignalVector& beta, double sigma2);

/// Same decomposition when beta is an eigenvector of Sigma with eigenvalue
/// eta: the bias becomes ||(X~^+ X~' - I) beta||_Sigma^2 with
/// X~'_{a,K} = eta X~_{a,K} Sigma_KK^{-1} and zero on the masked entries.
/// Throws Error(NotAnEigenvector) when ||Sigma beta - eta beta|| > 1e-8 eta ||beta||.
ConditionalDecomposition theorem3_bias_variance(const MaskedDataset& ds, const CovarianceModel& model,
                                                const SignalVector& beta, double eta);

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  long draws = 0;
};

/// Brute-force conditional risk: with X~ and Z held fixed, redraws the masked
/// entries from their Gaussian conditional law and the noise, refits, and
/// averages the exact risk. Draws are split into chunks of 1024 with their
/// own derived streams and reduced in chunk order, so the result does not
/// depend on `threads`.
McEstimate mc_conditional_risk(const MaskedDataset& ds, const CovarianceModel& model, const SignalVector& beta,
                               double sigma2, long n_draws, Rng& rng, unsigned threads = 1);

/// One line of the oracle self-check report.
struct OracleCheck {
  std::string name;
  std::string covariance_kind;
  int n = 0;
  int d = 0;
  double p = 0.0;
  double reference = 0.0;  // Lemma 1 total, or Lemma 1 bias for the eigenvector check
  double candidate = 0.0;  // Monte-Carlo mean, or Theorem 3 bias
  double tolerance = 0.0;  // 3 SE, or the absolute tolerance
  bool passed = false;
};

struct OracleSuiteOptions {
  std::uint64_t master_seed = 0;
  int instances = 30;
  long draws = 100000;
  unsigned threads = 1;
};

/// Cross-validates Lemma 1 against Monte Carlo and Theorem 3 against Lemma 1
/// on small random identity / spiked / spectrum-projected instances.
std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& options);

}  // namespace maskrisk
