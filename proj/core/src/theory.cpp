#include "maskrisk/theory.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "maskrisk/error.hpp"

namespace maskrisk {

namespace {

constexpr double kBracketLo = 1e-14;
constexpr double kBracketHi = 1e14;

void check_ratio(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidSpec, "masking ratio must lie in (0,1)");
}

// Root of a decreasing function f on [kBracketLo, kBracketHi], bisecting in
// log(lambda) until the bracket stops shrinking. `tol` only decides whether an
// endpoint without a sign change still counts as a root.
template <class F>
double bisect_log(F f, double tol) {
  double lo = std::log(kBracketLo);
  double hi = std::log(kBracketHi);
  const double f_lo = f(std::exp(lo));
  const double f_hi = f(std::exp(hi));
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    if (std::abs(f_lo) <= tol) return std::exp(lo);
    if (std::abs(f_hi) <= tol) return std::exp(hi);
    throw Error(ErrorCode::BracketExhausted, "fixed-point residual does not change sign on [1e-14, 1e14]");
  }
  double best = std::exp(0.5 * (lo + hi));
  double best_abs = INFINITY;
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double lambda = std::exp(mid);
    const double value = f(lambda);
    if (std::abs(value) < best_abs) {
      best = lambda;
      best_abs = std::abs(value);
    }
    if (value == 0.0) break;
    if (value > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

MaskedSpectrum decompose_descending(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::EigendecompositionUnavailable, "masked covariance eigendecomposition failed");
  }
  MaskedSpectrum out;
  out.eigenvalues = eig.eigenvalues().reverse();
  out.eigenvectors = eig.eigenvectors().rowwise().reverse();
  return out;
}

void check_overparametrized(const TheoryParams& params, double lambda_reg) {
  check_ratio(params.p);
  if (!(params.n_tilde > 0.0)) throw Error(ErrorCode::InvalidSpec, "n_tilde must be positive");
  if (params.n_tilde >= params.d && lambda_reg == 0.0) {
    throw Error(ErrorCode::NoSolution, "n_tilde >= d: no positive fixed point without a guard");
  }
}

}  // namespace

TheoryParams TheoryParams::from_sizes(double p, int n, int d, double kappa) {
  TheoryParams out;
  out.p = p;
  out.n = n;
  out.d = d;
  out.kappa = kappa;
  out.gamma = static_cast<double>(d) / n;
  out.n_tilde = static_cast<double>(n) * p;
  return out;
}

double isotropic_risk(const TheoryParams& params) {
  const double p = params.p;
  const double g = params.gamma;
  const double k = params.kappa;
  check_ratio(p);
  if (!(g > 0.0) || !(k >= 0.0)) throw Error(ErrorCode::InvalidSpec, "need gamma > 0 and kappa >= 0");
  if (std::abs(g - p) <= 1e-9) throw Error(ErrorCode::AtPhaseTransition, "gamma equals p");
  if (g < p) return (p + k) * g / ((1.0 - p) * (p - g));
  return 1.0 - p / g + p * (p + k) / ((1.0 - p) * (g - p));
}

double fixed_point_residual(const Vector& tilde_eigs, double n_tilde, double lambda_reg, double lambda) {
  double trace = 0.0;
  for (Eigen::Index i = 0; i < tilde_eigs.size(); ++i) {
    const double e = std::max(tilde_eigs[i], 0.0);
    trace += e / (e + lambda);
  }
  return n_tilde - lambda_reg / lambda - trace;
}

double solve_fixed_point(const Vector& tilde_eigs, double n_tilde, double lambda_reg) {
  if (!(n_tilde > 0.0)) throw Error(ErrorCode::InvalidSpec, "n_tilde must be positive");
  if (!(lambda_reg >= 0.0)) throw Error(ErrorCode::InvalidSpec, "lambda_reg must be >= 0");
  const double scale = tilde_eigs.size() > 0 ? std::abs(tilde_eigs.maxCoeff()) : 0.0;
  for (Eigen::Index i = 0; i < tilde_eigs.size(); ++i) {
    if (tilde_eigs[i] < -1e-10 * scale) throw Error(ErrorCode::InvalidSpec, "masked eigenvalues must be >= 0");
  }
  if (n_tilde >= static_cast<double>(tilde_eigs.size()) && lambda_reg == 0.0) {
    throw Error(ErrorCode::NoSolution, "n_tilde >= d: no positive fixed point without a guard");
  }
  // The residual as written increases in lambda; bisect its negation.
  return bisect_log([&](double lambda) { return -fixed_point_residual(tilde_eigs, n_tilde, lambda_reg, lambda); },
                    1e-10 * n_tilde);
}

MaskedSpectrum masked_spectrum(const Matrix& sigma, double p) {
  return decompose_descending(masked_covariance(sigma, p));
}

MaskedSpectrum spiked_masked_spectrum(double delta, const Vector& v, double p) {
  Matrix m = (1.0 - p) * (1.0 - p) * delta * (v * v.transpose());
  m.diagonal().array() += (1.0 - p) + p * (1.0 - p) * delta * v.array().square();
  return decompose_descending(m);
}

SpectralMeasures spectral_measures(const MaskedSpectrum& spectrum, const Vector& beta_unit, const Vector& v) {
  SpectralMeasures out;
  out.tilde_eigs = spectrum.eigenvalues;
  out.proj_beta = spectrum.eigenvectors.transpose() * beta_unit;
  out.proj_v = spectrum.eigenvectors.transpose() * v;
  return out;
}

// Sigma~ = D + rho v v^T with D diagonal, so every resolvent quantity follows
// from Sherman-Morrison in O(d) per lambda.
TheoryResult spiked_risk(double delta, const Vector& v, const SignalVector& beta, const TheoryParams& params,
                         double lambda_reg) {
  check_overparametrized(params, lambda_reg);
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidSpec, "spike strength must be >= 0");
  if (beta.unit.size() != v.size()) throw Error(ErrorCode::InvalidSpec, "dimension mismatch");
  if (!(lambda_reg >= 0.0)) throw Error(ErrorCode::InvalidSpec, "lambda_reg must be >= 0");
  const double p = params.p;
  const double dd = static_cast<double>(v.size());
  const double rho = (1.0 - p) * (1.0 - p) * delta;
  const Vector diag = ((1.0 - p) + p * (1.0 - p) * delta * v.array().square()).matrix();

  // Tr (Sigma~ + lambda)^{-1}
  const auto trace_resolvent = [&](double lambda) {
    const Eigen::ArrayXd a = diag.array() + lambda;
    const Eigen::ArrayXd w = v.array() / a;
    const double s = 1.0 + rho * (v.array() * w).sum();
    return a.inverse().sum() - rho / s * w.square().sum();
  };
  if (params.n_tilde >= dd && lambda_reg == 0.0) {
    throw Error(ErrorCode::NoSolution, "n_tilde >= d: no positive fixed point without a guard");
  }
  const double lambda = bisect_log(
      [&](double l) { return -(params.n_tilde - lambda_reg / l - (dd - l * trace_resolvent(l))); },
      1e-10 * params.n_tilde);

  const Vector a = (diag.array() + lambda).matrix();
  const Vector w = v.cwiseQuotient(a);
  const double s = 1.0 + rho * v.dot(w);
  const double k = rho / s;
  const Vector& bt = beta.unit;
  const auto form = [&](const Vector& x, const Vector& y) {
    return x.dot(y.cwiseQuotient(a)) - k * w.dot(x) * w.dot(y);
  };
  const double tr_r = a.cwiseInverse().sum() - k * w.squaredNorm();
  const double tr_r2 =
      a.cwiseInverse().squaredNorm() - 2.0 * k * w.cwiseQuotient(a).dot(w) + k * k * w.squaredNorm() * w.squaredNorm();
  const Vector r_v = w / s;

  const double vb = v.dot(bt);
  TheoryResult r;
  r.lambda_star = lambda;
  r.c = p * delta * vb / (1.0 + delta * (1.0 - p));
  r.phi_beta = lambda * form(bt, bt);
  r.phi_v = lambda * form(v, v);
  r.psi = lambda * form(bt, v);

  // S R^2 = R - lambda R^2 and S^2 R^2 = (I - lambda R)^2.
  const double tr_s_r2 = tr_r - lambda * tr_r2;
  const double tr_sigma_s_r2 = tr_s_r2 + delta * (v.dot(r_v) - lambda * r_v.squaredNorm());
  const double tr_s2_r2 = dd - 2.0 * lambda * tr_r + lambda * lambda * tr_r2;
  r.u = tr_sigma_s_r2 / (params.n_tilde - tr_s2_r2);

  const double one_minus_phi_v = 1.0 - r.phi_v;
  const double cross = r.c * one_minus_phi_v - r.psi;
  r.bias = r.phi_beta + r.c * r.c * one_minus_phi_v + delta * cross * cross;
  r.variance = r.u * (params.kappa + p + r.c * p * vb);
  r.total = r.bias + r.variance;
  return r;
}

TheoryResult spiked_risk(const MaskedSpectrum& spectrum, double delta, const Vector& v, const SignalVector& beta,
                         const TheoryParams& params, double lambda_reg) {
  check_overparametrized(params, lambda_reg);
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidSpec, "spike strength must be >= 0");
  if (v.size() != spectrum.eigenvalues.size() || beta.unit.size() != v.size()) {
    throw Error(ErrorCode::InvalidSpec, "dimension mismatch");
  }
  const double p = params.p;
  const double lambda = solve_fixed_point(spectrum.eigenvalues, params.n_tilde, lambda_reg);
  const Matrix& Q = spectrum.eigenvectors;
  const Vector e = spectrum.eigenvalues.cwiseMax(0.0);
  const Vector& bt = beta.unit;

  // Spectral functions of the masked covariance applied to vectors.
  const Vector resolvent = (e.array() + lambda).inverse().matrix();  // (lambda I + S)^{-1}
  const Vector s_res2 = (e.array() * resolvent.array().square()).matrix();  // S (lambda I + S)^{-2}
  const auto apply = [&](const Vector& diag, const Vector& x) -> Vector {
    return Q * diag.asDiagonal() * (Q.transpose() * x);
  };

  const double vb = v.dot(bt);
  TheoryResult r;
  r.lambda_star = lambda;
  r.c = p * delta * vb / (1.0 + delta * (1.0 - p));
  r.phi_beta = lambda * bt.dot(apply(resolvent, bt));
  r.phi_v = lambda * v.dot(apply(resolvent, v));
  r.psi = lambda * bt.dot(apply(resolvent, v));

  // Tr(Sigma S R^2) with Sigma = I + delta v v^T, and Tr(S^2 R^2).
  const double tr_s_r2 = s_res2.sum();
  const double tr_sigma_s_r2 = tr_s_r2 + delta * v.dot(apply(s_res2, v));
  const double tr_s2_r2 = (e.array().square() * resolvent.array().square()).sum();
  r.u = tr_sigma_s_r2 / (params.n_tilde - tr_s2_r2);

  const double one_minus_phi_v = 1.0 - r.phi_v;
  const double cross = r.c * one_minus_phi_v - r.psi;
  r.bias = r.phi_beta + r.c * r.c * one_minus_phi_v + delta * cross * cross;
  r.variance = r.u * (params.kappa + p + r.c * p * vb);
  r.total = r.bias + r.variance;
  return r;
}

TheoryResult spectral_risk(const SpectralMeasures& m, double delta, double v_dot_beta, const TheoryParams& params,
                           double lambda_reg) {
  check_overparametrized(params, lambda_reg);
  const Eigen::Index d = m.tilde_eigs.size();
  if (m.proj_beta.size() != d || m.proj_v.size() != d) throw Error(ErrorCode::InvalidSpec, "dimension mismatch");
  const double p = params.p;
  const double dd = static_cast<double>(d);
  const double ratio = params.n_tilde / dd;  // p / gamma

  // 1 - p/gamma = (1/d) sum mu/(s+mu) - lambda_reg/(d mu), increasing in mu.
  const auto excess = [&](double mu) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) acc += mu / (std::max(m.tilde_eigs[i], 0.0) + mu);
    return (1.0 - ratio) - (acc / dd - lambda_reg / (dd * mu));
  };
  const double mu = bisect_log(excess, 1e-10 * ratio);

  double g_bb = 0.0;     // sum <b,x>^2 mu/(s+mu)
  double g_bv = 0.0;     // sum <b,x><v,x> mu/(s+mu)
  double g_vv = 0.0;     // sum <v,x>^2 s/(s+mu)
  double h1 = 0.0;       // (1/d) sum s/(s+mu)^2
  double h2 = 0.0;       // (1/d) sum s^2/(s+mu)^2
  double g_vv_2 = 0.0;   // (1/d) sum <v,x>^2 s/(s+mu)^2
  for (Eigen::Index i = 0; i < d; ++i) {
    const double s = std::max(m.tilde_eigs[i], 0.0);
    const double b = m.proj_beta[i];
    const double w = m.proj_v[i];
    const double t = s + mu;
    g_bb += b * b * mu / t;
    g_bv += b * w * mu / t;
    g_vv += w * w * s / t;
    h1 += s / (t * t) / dd;
    h2 += s * s / (t * t) / dd;
    g_vv_2 += w * w * s / (t * t) / dd;
  }

  TheoryResult r;
  r.lambda_star = mu;
  r.c = p * delta * v_dot_beta / (1.0 + delta * (1.0 - p));
  r.phi_beta = g_bb;
  r.phi_v = 1.0 - g_vv;
  r.psi = g_bv;
  const double inner = -g_bv + r.c * g_vv;
  r.bias = g_bb + r.c * r.c * g_vv + delta * inner * inner;
  const double prefactor =
      params.kappa + p + p * p * delta * v_dot_beta * v_dot_beta / (1.0 + delta * (1.0 - p));
  r.u = (h1 + delta * g_vv_2) / (ratio - h2);
  r.variance = prefactor * r.u;
  r.total = r.bias + r.variance;
  return r;
}

}  // namespace maskrisk
