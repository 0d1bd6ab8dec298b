#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "maskrisk/covariance.hpp"
#include "maskrisk/rng.hpp"
#include "maskrisk/types.hpp"

namespace maskrisk {

struct FixedMask {
  double p = 0.5;
  bool operator==(const FixedMask&) const = default;
};

/// Per-row masking ratio p_i ~ U(p_min, p_max).
struct R2maeMask {
  double p_min = 0.5;
  double p_max = 0.6;
  bool operator==(const R2maeMask&) const = default;
};

using MaskScheme = std::variant<FixedMask, R2maeMask>;

void validate(const MaskScheme& scheme);
/// Mean masking ratio of the scheme.
double mean_ratio(const MaskScheme& scheme);

struct MaskOptions {
  /// Select exactly round(n * mean ratio) target rows (those with the smallest
  /// inclusion draws) instead of independent Bernoulli selection.
  bool deterministic_subset = false;
};

struct MaskedDataset {
  std::shared_ptr<const Matrix> X;  // n x d, uncorrupted
  std::shared_ptr<const Vector> y;  // n
  std::vector<int> selected;        // target rows, ascending
  Matrix X_tilde;                   // |selected| x d, X[selected] with masked entries zeroed
  Vector y_tilde;                   // y[selected]
  MaskMatrix Z;                     // |selected| x d
  Vector row_ratios;                // realized p_i per selected row
  double sigma2 = 0.0;              // noise variance that generated y

  int n_targets() const { return static_cast<int>(selected.size()); }
  int dim() const { return static_cast<int>(X_tilde.cols()); }
};

/// Rows iid N(0, Sigma): X = G diag(sqrt(eigenvalues)) Q^T.
Matrix sample_design(const CovarianceModel& model, int n, Rng& rng);

/// y = X beta + eps with eps iid N(0, sigma2).
Vector generate_targets(const Matrix& X, const Vector& beta, double sigma2, Rng& rng);
inline Vector generate_targets(const Matrix& X, const SignalVector& beta, double sigma2, Rng& rng) {
  return generate_targets(X, beta.beta, sigma2, rng);
}

/// Target selection plus feature masking. Per row, in order: one uniform for
/// the ratio draw p_i = p_min + (p_max - p_min) u (also drawn for fixed
/// schemes), one inclusion coin (row is a target iff coin < p_i), then d mask
/// coins (entry masked iff coin < p_i). Excluded rows still consume their
/// coins, so Fixed(p) and R2mae(p, p) read identical streams.
///
/// Throws Error(EmptyTargetSet) when no row is selected.
MaskedDataset apply_mask_scheme(std::shared_ptr<const Matrix> X, std::shared_ptr<const Vector> y,
                                const MaskScheme& scheme, Rng& rng, MaskOptions options = {});

MaskedDataset apply_mask_scheme(const Matrix& X, const Vector& y, const MaskScheme& scheme, Rng& rng,
                                MaskOptions options = {});

}  // namespace maskrisk
