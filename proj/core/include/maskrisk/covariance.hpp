#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "maskrisk/rng.hpp"
#include "maskrisk/types.hpp"

namespace maskrisk {

// ---------------------------------------------------------------------------
// Construction descriptors (what a config file asks for)
// ---------------------------------------------------------------------------

struct IdentitySpec {
  bool operator==(const IdentitySpec&) const = default;
};

enum class SpikeDirection {
  Uniform,   // iid U(0,1) entries, then normalized
  Constant,  // 1/sqrt(d) in every entry
  Explicit,  // taken from `values`, then normalized
};

struct SpikedSpec {
  double delta = 0.0;
  SpikeDirection direction = SpikeDirection::Uniform;
  std::vector<double> values;  // only for SpikeDirection::Explicit
  bool operator==(const SpikedSpec&) const = default;
};

enum class SpectrumDistribution {
  Uniform,  // iid U(1, 10)
  Beta,     // iid Beta(2, 6), affinely mapped so the sample spans [1, 10]
};

struct SpectrumProjectedSpec {
  SpectrumDistribution spectrum = SpectrumDistribution::Uniform;
  bool operator==(const SpectrumProjectedSpec&) const = default;
};

struct LatentIidSpec {
  int q = 0;
  bool operator==(const LatentIidSpec&) const = default;
};

struct LatentStructuredSpec {
  int q = 0;
  double eig_value = 100.0;
  bool operator==(const LatentStructuredSpec&) const = default;
};

using CovarianceSpec = std::variant<IdentitySpec, SpikedSpec, SpectrumProjectedSpec,
                                    LatentIidSpec, LatentStructuredSpec>;

// ---------------------------------------------------------------------------
// Construction records (what was actually built)
// ---------------------------------------------------------------------------

struct IdentityKind {};
struct SpikedKind {
  double delta;
  Vector v;  // unit norm
};
struct SpectrumProjectedKind {
  SpectrumProjectedSpec spec;
};
struct LatentIidKind {
  int q;
  Matrix loadings;  // W, d x q
};
struct LatentStructuredKind {
  int q;
  double eig_value;
  Matrix loadings;  // W = Q D R^T, d x q
};
struct ExplicitKind {};

using CovarianceKind = std::variant<IdentityKind, SpikedKind, SpectrumProjectedKind,
                                    LatentIidKind, LatentStructuredKind, ExplicitKind>;

/// Population covariance with its eigendecomposition computed once at
/// construction. Immutable afterwards; share freely between threads.
class CovarianceModel {
 public:
  /// Decomposes an arbitrary symmetric positive semidefinite matrix.
  static CovarianceModel from_matrix(const Matrix& sigma);

  /// Trusts a caller-supplied decomposition (sigma = Q diag(eigenvalues) Q^T).
  /// Eigenvalues are re-sorted descending.
  static CovarianceModel from_decomposition(Matrix sigma, Vector eigenvalues, Matrix eigenvectors,
                                            CovarianceKind kind);

  int dim() const { return static_cast<int>(sigma_.rows()); }
  const Matrix& sigma() const { return sigma_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  const CovarianceKind& kind() const { return kind_; }
  std::string kind_name() const;

  bool has_decomposition() const { return eigenvectors_.size() > 0; }

  /// Spike direction v for spiked models, nullptr otherwise.
  const Vector* spike_direction() const;
  /// Spike strength delta for spiked models.
  std::optional<double> spike_strength() const;
  /// Latent loadings W for latent models, nullptr otherwise.
  const Matrix* loadings() const;

  /// x^T Sigma x evaluated in the eigenbasis.
  double quadratic_form(const Vector& x) const;

 private:
  CovarianceModel(Matrix sigma, Vector eigenvalues, Matrix eigenvectors, CovarianceKind kind);

  Matrix sigma_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  CovarianceKind kind_;
};

CovarianceModel build_covariance(const CovarianceSpec& spec, int d, Rng& rng);

/// (1-p)^2 Sigma + p(1-p) diag(Sigma).
Matrix masked_covariance(const Matrix& sigma, double p);
inline Matrix masked_covariance(const CovarianceModel& model, double p) {
  return masked_covariance(model.sigma(), p);
}

/// First `cols` columns of a Haar-distributed rows x rows orthogonal matrix:
/// QR of an iid Gaussian rows x cols matrix with the R diagonal made positive.
Matrix haar_orthogonal(int rows, int cols, Rng& rng);

/// Eigendecomposition of I + W W^T from a thin SVD of W, completed to a full
/// orthonormal basis. Eigenvalues come back descending.
std::pair<Vector, Matrix> identity_plus_low_rank_eigen(const Matrix& loadings);

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

struct EigenvectorSignalSpec {
  double quantile = 1.0;  // 1.0 = largest eigenvalue
  bool operator==(const EigenvectorSignalSpec&) const = default;
};
struct AngleSignalSpec {
  double theta = 0.0;  // angle to the spike direction, radians
  bool operator==(const AngleSignalSpec&) const = default;
};
struct UniformSignalSpec {
  bool operator==(const UniformSignalSpec&) const = default;
};
struct LatentProjectedSignalSpec {
  bool operator==(const LatentProjectedSignalSpec&) const = default;
};
struct ExplicitSignalSpec {
  std::vector<double> values;
  bool operator==(const ExplicitSignalSpec&) const = default;
};

using SignalSpec = std::variant<EigenvectorSignalSpec, AngleSignalSpec, UniformSignalSpec,
                                LatentProjectedSignalSpec, ExplicitSignalSpec>;

struct EigenvectorProvenance {
  double quantile;
  int index;  // into the descending spectrum
  double eigenvalue;
};
struct AngleProvenance {
  double theta;
};
struct UniformProvenance {};
struct LatentProjectedProvenance {};
struct ExplicitProvenance {};

using SignalProvenance = std::variant<EigenvectorProvenance, AngleProvenance, UniformProvenance,
                                      LatentProjectedProvenance, ExplicitProvenance>;

/// Ground-truth coefficients beta = norm * unit.
struct SignalVector {
  Vector beta;
  double norm = 0.0;
  Vector unit;
  SignalProvenance provenance = ExplicitProvenance{};

  static SignalVector from_vector(Vector beta, SignalProvenance provenance = ExplicitProvenance{});
};

SignalVector make_signal(const SignalSpec& spec, const CovarianceModel& model, Rng& rng);

/// Descending-spectrum index picked by a spectrum quantile (1.0 = top).
int eigen_index_for_quantile(double quantile, int d);

}  // namespace maskrisk
