#include "maskrisk/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskrisk/detail/overloaded.hpp"
#include "maskrisk/error.hpp"

namespace maskrisk {

using detail::Overloaded;

void validate(const MaskScheme& scheme) {
  std::visit(Overloaded{
                 [](const FixedMask& m) {
                   if (!(m.p >= 0.0 && m.p <= 1.0)) {
                     throw Error(ErrorCode::InvalidSpec, "masking ratio must be in [0,1]");
                   }
                 },
                 [](const R2maeMask& m) {
                   if (!(m.p_min >= 0.0 && m.p_max <= 1.0 && m.p_min <= m.p_max)) {
                     throw Error(ErrorCode::InvalidSpec, "need 0 <= p_min <= p_max <= 1");
                   }
                 },
             },
             scheme);
}

double mean_ratio(const MaskScheme& scheme) {
  return std::visit(Overloaded{
                        [](const FixedMask& m) { return m.p; },
                        [](const R2maeMask& m) { return 0.5 * (m.p_min + m.p_max); },
                    },
                    scheme);
}

Matrix sample_design(const CovarianceModel& model, int n, Rng& rng) {
  if (n < 1) throw Error(ErrorCode::InvalidSpec, "need at least one sample");
  if (!model.has_decomposition()) {
    throw Error(ErrorCode::EigendecompositionUnavailable, "model has no eigenvectors");
  }
  const Matrix gaussian = rng.normal_matrix(n, model.dim());
  const Vector scale = model.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return gaussian * scale.asDiagonal() * model.eigenvectors().transpose();
}

Vector generate_targets(const Matrix& X, const Vector& beta, double sigma2, Rng& rng) {
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise variance must be >= 0");
  if (X.cols() != beta.size()) throw Error(ErrorCode::InvalidSpec, "signal length mismatch");
  Vector y = X * beta;
  if (sigma2 > 0.0) {
    const double sd = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * rng.normal();
  }
  return y;
}

MaskedDataset apply_mask_scheme(std::shared_ptr<const Matrix> X, std::shared_ptr<const Vector> y,
                                const MaskScheme& scheme, Rng& rng, MaskOptions options) {
  validate(scheme);
  if (!X || !y || X->rows() != y->size()) {
    throw Error(ErrorCode::InvalidSpec, "design and targets do not conform");
  }
  const auto [lo, hi] = std::visit(Overloaded{
                                       [](const FixedMask& m) { return std::pair{m.p, m.p}; },
                                       [](const R2maeMask& m) { return std::pair{m.p_min, m.p_max}; },
                                   },
                                   scheme);
  const Eigen::Index n = X->rows();
  const Eigen::Index d = X->cols();

  Vector ratios(n);
  Vector inclusion(n);
  MaskMatrix keep(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    ratios[i] = lo + (hi - lo) * rng.uniform();
    inclusion[i] = rng.uniform();
    for (Eigen::Index j = 0; j < d; ++j) keep(i, j) = rng.uniform() < ratios[i] ? 0 : 1;
  }

  std::vector<int> selected;
  if (options.deterministic_subset) {
    const auto count = static_cast<std::size_t>(std::lround(static_cast<double>(n) * 0.5 * (lo + hi)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return inclusion[a] < inclusion[b]; });
    selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(selected.begin(), selected.end());
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (inclusion[i] < ratios[i]) selected.push_back(static_cast<int>(i));
    }
  }
  if (selected.empty()) throw Error(ErrorCode::EmptyTargetSet, "no row selected as a target");

  MaskedDataset out;
  const auto m = static_cast<Eigen::Index>(selected.size());
  out.selected = std::move(selected);
  out.X_tilde.resize(m, d);
  out.y_tilde.resize(m);
  out.Z.resize(m, d);
  out.row_ratios.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int row = out.selected[static_cast<std::size_t>(a)];
    out.Z.row(a) = keep.row(row);
    out.row_ratios[a] = ratios[row];
    out.y_tilde[a] = (*y)[row];
    for (Eigen::Index j = 0; j < d; ++j) {
      out.X_tilde(a, j) = out.Z(a, j) != 0 ? (*X)(row, j) : 0.0;
    }
  }
  out.X = std::move(X);
  out.y = std::move(y);
  return out;
}

MaskedDataset apply_mask_scheme(const Matrix& X, const Vector& y, const MaskScheme& scheme, Rng& rng,
                                MaskOptions options) {
  return apply_mask_scheme(std::make_shared<const Matrix>(X), std::make_shared<const Vector>(y),
                           scheme, rng, options);
}

}  // namespace maskrisk
