#include "maskrisk/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskrisk/detail/overloaded.hpp"
#include "maskrisk/error.hpp"

namespace maskrisk {

using detail::Overloaded;

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kNegativeEigenTol = 1e-8;

void sort_descending(Vector& eigenvalues, Matrix& eigenvectors) {
  const Eigen::Index d = eigenvalues.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eigenvalues[a] > eigenvalues[b]; });
  Vector sorted_values(d);
  Matrix sorted_vectors(eigenvectors.rows(), d);
  for (Eigen::Index k = 0; k < d; ++k) {
    sorted_values[k] = eigenvalues[order[static_cast<std::size_t>(k)]];
    sorted_vectors.col(k) = eigenvectors.col(order[static_cast<std::size_t>(k)]);
  }
  eigenvalues = std::move(sorted_values);
  eigenvectors = std::move(sorted_vectors);
}

void check_psd(const Vector& eigenvalues) {
  const double top = std::max(1.0, eigenvalues.maxCoeff());
  if (eigenvalues.minCoeff() < -kNegativeEigenTol * top) {
    throw Error(ErrorCode::NonPositiveDefinite,
                "smallest eigenvalue " + std::to_string(eigenvalues.minCoeff()));
  }
}

Vector normalized(const Vector& v, const char* what) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidSpec, std::string(what) + " has zero norm");
  }
  return v / norm;
}

Matrix identity_plus_outer(const Matrix& loadings) {
  Matrix sigma = loadings * loadings.transpose();
  sigma.diagonal().array() += 1.0;
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

CovarianceModel::CovarianceModel(Matrix sigma, Vector eigenvalues, Matrix eigenvectors,
                                 CovarianceKind kind)
    : sigma_(std::move(sigma)),
      eigenvalues_(std::move(eigenvalues)),
      eigenvectors_(std::move(eigenvectors)),
      kind_(std::move(kind)) {}

CovarianceModel CovarianceModel::from_matrix(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw Error(ErrorCode::InvalidSpec, "covariance must be a non-empty square matrix");
  }
  if (!sigma.allFinite()) throw Error(ErrorCode::InvalidSpec, "covariance has non-finite entries");
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw Error(ErrorCode::InvalidSpec, "covariance is not symmetric");
  }
  Matrix sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NonPositiveDefinite, "eigendecomposition failed");
  }
  Vector values = solver.eigenvalues();
  Matrix vectors = solver.eigenvectors();
  sort_descending(values, vectors);
  check_psd(values);
  return CovarianceModel(std::move(sym), std::move(values), std::move(vectors), ExplicitKind{});
}

CovarianceModel CovarianceModel::from_decomposition(Matrix sigma, Vector eigenvalues,
                                                    Matrix eigenvectors, CovarianceKind kind) {
  sort_descending(eigenvalues, eigenvectors);
  check_psd(eigenvalues);
  return CovarianceModel(std::move(sigma), std::move(eigenvalues), std::move(eigenvectors),
                         std::move(kind));
}

std::string CovarianceModel::kind_name() const {
  return std::visit(
      Overloaded{
          [](const IdentityKind&) -> std::string { return "identity"; },
          [](const SpikedKind&) -> std::string { return "spiked"; },
          [](const SpectrumProjectedKind& k) -> std::string {
            return k.spec.spectrum == SpectrumDistribution::Beta ? "spectrum_beta"
                                                                 : "spectrum_uniform";
          },
          [](const LatentIidKind&) -> std::string { return "latent_iid"; },
          [](const LatentStructuredKind&) -> std::string { return "latent_structured"; },
          [](const ExplicitKind&) -> std::string { return "explicit"; },
      },
      kind_);
}

const Vector* CovarianceModel::spike_direction() const {
  if (const auto* spiked = std::get_if<SpikedKind>(&kind_)) return &spiked->v;
  return nullptr;
}

std::optional<double> CovarianceModel::spike_strength() const {
  if (const auto* spiked = std::get_if<SpikedKind>(&kind_)) return spiked->delta;
  return std::nullopt;
}

const Matrix* CovarianceModel::loadings() const {
  if (const auto* k = std::get_if<LatentIidKind>(&kind_)) return &k->loadings;
  if (const auto* k = std::get_if<LatentStructuredKind>(&kind_)) return &k->loadings;
  return nullptr;
}

double CovarianceModel::quadratic_form(const Vector& x) const {
  if (!has_decomposition()) return x.dot(sigma_ * x);
  const Vector coords = eigenvectors_.transpose() * x;
  return (eigenvalues_.array() * coords.array().square()).sum();
}

Matrix haar_orthogonal(int rows, int cols, Rng& rng) {
  if (rows < 1 || cols < 1 || cols > rows) {
    throw Error(ErrorCode::InvalidSpec, "haar_orthogonal needs 1 <= cols <= rows");
  }
  const Matrix gaussian = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const auto& r = qr.matrixQR();
  for (int j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

std::pair<Vector, Matrix> identity_plus_low_rank_eigen(const Matrix& loadings) {
  const Eigen::Index d = loadings.rows();
  const Eigen::Index k = loadings.cols();
  Eigen::BDCSVD<Matrix> svd(loadings, Eigen::ComputeThinU);
  const Matrix& u = svd.matrixU();

  // Complete the k left singular vectors to an orthonormal basis of R^d.
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix basis = qr.householderQ();
  basis.leftCols(k) = u;

  Vector values = Vector::Ones(d);
  values.head(k).array() += svd.singularValues().array().square();
  return {std::move(values), std::move(basis)};
}

CovarianceModel build_covariance(const CovarianceSpec& spec, int d, Rng& rng) {
  if (d < 2) throw Error(ErrorCode::InvalidSpec, "dimension must be at least 2");

  return std::visit(
      Overloaded{
          [&](const IdentitySpec&) {
            return CovarianceModel::from_decomposition(Matrix::Identity(d, d), Vector::Ones(d),
                                                       Matrix::Identity(d, d), IdentityKind{});
          },
          [&](const SpikedSpec& s) {
            if (!(s.delta >= 0.0) || !std::isfinite(s.delta)) {
              throw Error(ErrorCode::InvalidSpec, "spike strength must be >= 0");
            }
            Vector v;
            switch (s.direction) {
              case SpikeDirection::Uniform:
                v = normalized(rng.uniform_vector(d), "spike direction");
                break;
              case SpikeDirection::Constant:
                v = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
                break;
              case SpikeDirection::Explicit:
                if (static_cast<int>(s.values.size()) != d) {
                  throw Error(ErrorCode::InvalidSpec, "explicit spike direction has wrong length");
                }
                v = normalized(Eigen::Map<const Vector>(s.values.data(), d), "spike direction");
                break;
            }
            const Matrix w = std::sqrt(s.delta) * v;
            if (s.delta == 0.0) {
              return CovarianceModel::from_decomposition(Matrix::Identity(d, d), Vector::Ones(d),
                                                         Matrix::Identity(d, d),
                                                         SpikedKind{s.delta, std::move(v)});
            }
            auto [values, vectors] = identity_plus_low_rank_eigen(w);
            Matrix sigma = identity_plus_outer(w);
            return CovarianceModel::from_decomposition(std::move(sigma), std::move(values),
                                                       std::move(vectors),
                                                       SpikedKind{s.delta, std::move(v)});
          },
          [&](const SpectrumProjectedSpec& s) {
            Vector values(d);
            if (s.spectrum == SpectrumDistribution::Uniform) {
              for (int i = 0; i < d; ++i) values[i] = rng.uniform(1.0, 10.0);
            } else {
              for (int i = 0; i < d; ++i) values[i] = rng.beta(2.0, 6.0);
              const double lo = values.minCoeff();
              const double hi = values.maxCoeff();
              if (!(hi > lo)) throw Error(ErrorCode::InvalidSpec, "degenerate Beta spectrum draw");
              values = (1.0 + 9.0 * (values.array() - lo) / (hi - lo)).matrix();
            }
            Matrix q = haar_orthogonal(d, d, rng);
            Matrix sigma = q * values.asDiagonal() * q.transpose();
            sigma = 0.5 * (sigma + sigma.transpose());
            return CovarianceModel::from_decomposition(std::move(sigma), std::move(values),
                                                       std::move(q), SpectrumProjectedKind{s});
          },
          [&](const LatentIidSpec& s) {
            if (s.q <= 0 || s.q >= d) throw Error(ErrorCode::InvalidSpec, "latent q must be in (0, d)");
            const double scale = std::sqrt(9.0) / (std::sqrt(static_cast<double>(d)) +
                                                   std::sqrt(static_cast<double>(s.q)));
            Matrix w = scale * rng.normal_matrix(d, s.q);
            auto [values, vectors] = identity_plus_low_rank_eigen(w);
            Matrix sigma = identity_plus_outer(w);
            return CovarianceModel::from_decomposition(std::move(sigma), std::move(values),
                                                       std::move(vectors),
                                                       LatentIidKind{s.q, std::move(w)});
          },
          [&](const LatentStructuredSpec& s) {
            if (s.q <= 0 || s.q >= d) throw Error(ErrorCode::InvalidSpec, "latent q must be in (0, d)");
            if (!(s.eig_value > 0.0)) throw Error(ErrorCode::InvalidSpec, "eig_value must be > 0");
            const Matrix left = haar_orthogonal(d, s.q, rng);
            const Matrix right = haar_orthogonal(s.q, s.q, rng);
            Matrix w = std::sqrt(s.eig_value) * left * right.transpose();
            auto [values, vectors] = identity_plus_low_rank_eigen(w);
            Matrix sigma = identity_plus_outer(w);
            return CovarianceModel::from_decomposition(
                std::move(sigma), std::move(values), std::move(vectors),
                LatentStructuredKind{s.q, s.eig_value, std::move(w)});
          },
      },
      spec);
}

Matrix masked_covariance(const Matrix& sigma, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidSpec, "masking ratio must be in [0,1]");
  Matrix out = (1.0 - p) * (1.0 - p) * sigma;
  out.diagonal() += p * (1.0 - p) * sigma.diagonal();
  return out;
}

int eigen_index_for_quantile(double quantile, int d) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "eigenvector quantile must be in [0,1]");
  }
  const int ascending = static_cast<int>(std::lround(quantile * (d - 1)));
  return (d - 1) - ascending;
}

SignalVector SignalVector::from_vector(Vector beta, SignalProvenance provenance) {
  SignalVector out;
  out.norm = beta.norm();
  out.unit = out.norm > 0.0 ? Vector(beta / out.norm) : Vector::Zero(beta.size());
  out.beta = std::move(beta);
  out.provenance = std::move(provenance);
  return out;
}

SignalVector make_signal(const SignalSpec& spec, const CovarianceModel& model, Rng& rng) {
  const int d = model.dim();
  return std::visit(
      Overloaded{
          [&](const EigenvectorSignalSpec& s) {
            if (!model.has_decomposition()) {
              throw Error(ErrorCode::EigendecompositionUnavailable, "model has no eigenvectors");
            }
            const int index = eigen_index_for_quantile(s.quantile, d);
            Vector v = model.eigenvectors().col(index);
            if (v.sum() < 0.0) v = -v;
            return SignalVector::from_vector(
                std::move(v), EigenvectorProvenance{s.quantile, index, model.eigenvalues()[index]});
          },
          [&](const AngleSignalSpec& s) {
            const Vector* v = model.spike_direction();
            if (v == nullptr) throw Error(ErrorCode::MissingSpike, "angle signal needs a spiked model");
            const Vector b = rng.uniform_vector(d);
            const Vector u = normalized(b - b.dot(*v) * (*v), "orthogonal component");
            return SignalVector::from_vector(std::cos(s.theta) * (*v) + std::sin(s.theta) * u,
                                             AngleProvenance{s.theta});
          },
          [&](const UniformSignalSpec&) {
            return SignalVector::from_vector(normalized(rng.uniform_vector(d), "uniform signal"),
                                             UniformProvenance{});
          },
          [&](const LatentProjectedSignalSpec&) {
            const Matrix* w = model.loadings();
            if (w == nullptr) throw Error(ErrorCode::InvalidSpec, "latent signal needs a latent model");
            const Vector theta = rng.uniform_vector(w->cols());
            Matrix gram = w->transpose() * (*w);
            gram.diagonal().array() += 1.0;
            const Vector coeffs = gram.ldlt().solve(theta);
            return SignalVector::from_vector(*w * coeffs, LatentProjectedProvenance{});
          },
          [&](const ExplicitSignalSpec& s) {
            if (static_cast<int>(s.values.size()) != d) {
              throw Error(ErrorCode::InvalidSpec, "explicit signal has wrong length");
            }
            return SignalVector::from_vector(Eigen::Map<const Vector>(s.values.data(), d),
                                             ExplicitProvenance{});
          },
      },
      spec);
}

}  // namespace maskrisk
