#include "maskrisk/oracle.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "maskrisk/error.hpp"
#include "maskrisk/estimator.hpp"
#include "maskrisk/parallel.hpp"

namespace maskrisk {

namespace {

constexpr long kChunk = 1024;

// Conditioning of one selected row on its kept entries.
struct RowConditional {
  std::vector<int> kept;
  std::vector<int> masked;
  Vector kept_solve;  // Sigma_KK^{-1} x_K
  Vector mean;        // E[x_M | x_K]
  double u = 0.0;
  double w = 0.0;
  // Sampling factor of the Schur complement: either a Cholesky factor, or for
  // spiked models the rank-one square root I + coef v_M v_M^T.
  Matrix chol;
  Vector v_masked;
  double coef = 0.0;
};

class Conditioner {
 public:
  explicit Conditioner(const CovarianceModel& model) : model_(model) {
    if (const auto* k = std::get_if<SpikedKind>(&model.kind())) {
      spiked_ = true;
      delta_ = k->delta;
      v_ = k->v;
    }
  }

  RowConditional condition(const MaskedDataset& ds, Eigen::Index a, const Vector& beta, bool want_sampler) const {
    RowConditional r;
    for (Eigen::Index j = 0; j < ds.Z.cols(); ++j) {
      (ds.Z(a, j) != 0 ? r.kept : r.masked).push_back(static_cast<int>(j));
    }
    const Vector x_k = gather(ds.X_tilde.row(a).transpose(), r.kept);
    const Vector beta_m = gather(beta, r.masked);
    if (spiked_) {
      condition_spiked(r, x_k, beta_m, want_sampler);
    } else {
      condition_general(r, x_k, beta_m, want_sampler);
    }
    return r;
  }

 private:
  static Vector gather(const Vector& x, const std::vector<int>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[idx[i]];
    return out;
  }

  Matrix block(const std::vector<int>& rows, const std::vector<int>& cols) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = model_.sigma()(rows[i], cols[j]);
    return out;
  }

  void condition_general(RowConditional& r, const Vector& x_k, const Vector& beta_m, bool want_sampler) const {
    const Matrix s_mm = block(r.masked, r.masked);
    if (r.kept.empty()) {
      r.kept_solve = Vector(0);
      r.mean = Vector::Zero(static_cast<Eigen::Index>(r.masked.size()));
      r.u = 0.0;
      r.w = beta_m.dot(s_mm * beta_m);
      if (want_sampler) factor(r, s_mm);
      return;
    }
    Eigen::LLT<Matrix> llt(block(r.kept, r.kept));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularConditioning, "kept covariance block is not positive definite");
    }
    r.kept_solve = llt.solve(x_k);
    if (r.masked.empty()) {
      r.mean = Vector(0);
      return;
    }
    const Matrix s_km = block(r.kept, r.masked);
    const Vector t = s_km * beta_m;
    const Vector t_solve = llt.solve(t);
    r.u = x_k.dot(t_solve);
    r.w = beta_m.dot(s_mm * beta_m) - t.dot(t_solve);
    r.mean = s_km.transpose() * r.kept_solve;
    if (want_sampler) factor(r, s_mm - s_km.transpose() * llt.solve(s_km));
  }

  static void factor(RowConditional& r, const Matrix& schur) {
    const Matrix sym = 0.5 * (schur + schur.transpose());
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularConditioning, "conditional covariance is not positive definite");
    }
    r.chol = llt.matrixL();
  }

  // Sigma = I + delta v v^T: Sigma_KK^{-1} = I - g v_K v_K^T with
  // g = delta / (1 + delta ||v_K||^2), and the Schur complement is
  // I + g v_M v_M^T.
  void condition_spiked(RowConditional& r, const Vector& x_k, const Vector& beta_m, bool want_sampler) const {
    const Vector v_k = gather(v_, r.kept);
    const Vector v_m = gather(v_, r.masked);
    const double nk = v_k.squaredNorm();
    const double g = delta_ / (1.0 + delta_ * nk);
    const double vx = v_k.dot(x_k);
    const double vb = v_m.dot(beta_m);
    r.kept_solve = x_k - g * vx * v_k;
    const double v_dot_solve = vx / (1.0 + delta_ * nk);
    r.mean = delta_ * v_dot_solve * v_m;
    r.u = delta_ * vb * v_dot_solve;
    r.w = beta_m.squaredNorm() + g * vb * vb;
    if (want_sampler) {
      r.v_masked = v_m;
      const double nm = v_m.squaredNorm();
      r.coef = nm > 0.0 ? (std::sqrt(1.0 + g * nm) - 1.0) / nm : 0.0;
    }
  }

  const CovarianceModel& model_;
  bool spiked_ = false;
  double delta_ = 0.0;
  Vector v_;
};

void check_inputs(const MaskedDataset& ds, const CovarianceModel& model, const SignalVector& beta) {
  if (ds.dim() != model.dim() || beta.beta.size() != model.dim()) {
    throw Error(ErrorCode::InvalidSpec, "dataset, covariance, and signal dimensions differ");
  }
  if (ds.n_targets() < 1) throw Error(ErrorCode::EmptyTargetSet, "dataset has no targets");
}

// Sigma^{1/2}-whitened coordinates: ||x||_Sigma^2 = ||root * x||^2.
Matrix sigma_root(const CovarianceModel& model) {
  return model.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * model.eigenvectors().transpose();
}

double variance_term(const Matrix& pinv, const CovarianceModel& model, const Vector& w, double sigma2) {
  const Matrix whitened = sigma_root(model) * pinv;
  const Vector m_diag = whitened.colwise().squaredNorm().transpose();
  return m_diag.dot((w.array() + sigma2).matrix());
}

}  // namespace

ConditionalDecomposition lemma1_bias_variance(const MaskedDataset& ds, const CovarianceModel& model,
                                              const SignalVector& beta, double sigma2) {
  check_inputs(ds, model, beta);
  const Conditioner conditioner(model);
  const Eigen::Index m = ds.n_targets();
  ConditionalDecomposition out;
  out.u.resize(m);
  out.w.resize(m);
  out.masked_sets.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index a = 0; a < m; ++a) {
    RowConditional r = conditioner.condition(ds, a, beta.beta, false);
    out.u[a] = r.u;
    out.w[a] = r.w;
    out.masked_sets.push_back(std::move(r.masked));
  }
  const Matrix pinv = pseudo_inverse(ds.X_tilde);
  const Vector shift = pinv * (ds.X_tilde * beta.beta + out.u) - beta.beta;
  out.bias = model.quadratic_form(shift);
  out.variance = variance_term(pinv, model, out.w, sigma2);
  out.total = out.bias + out.variance;
  return out;
}

ConditionalDecomposition theorem3_bias_variance(const MaskedDataset& ds, const CovarianceModel& model,
                                                const SignalVector& beta, double eta) {
  check_inputs(ds, model, beta);
  const double gap = (model.sigma() * beta.beta - eta * beta.beta).norm();
  if (!(gap <= 1e-8 * std::abs(eta) * beta.beta.norm())) {
    throw Error(ErrorCode::NotAnEigenvector, "signal is not an eigenvector with the given eigenvalue");
  }
  const Conditioner conditioner(model);
  const Eigen::Index m = ds.n_targets();
  ConditionalDecomposition out;
  out.u.resize(m);
  out.w.resize(m);
  Matrix x_prime = Matrix::Zero(m, ds.dim());
  for (Eigen::Index a = 0; a < m; ++a) {
    RowConditional r = conditioner.condition(ds, a, beta.beta, false);
    for (std::size_t i = 0; i < r.kept.size(); ++i) {
      x_prime(a, r.kept[i]) = eta * r.kept_solve[static_cast<Eigen::Index>(i)];
    }
    out.u[a] = r.u;
    out.w[a] = r.w;
    out.masked_sets.push_back(std::move(r.masked));
  }
  const Matrix pinv = pseudo_inverse(ds.X_tilde);
  out.bias = model.quadratic_form(pinv * (x_prime * beta.beta) - beta.beta);
  out.variance = variance_term(pinv, model, out.w, ds.sigma2);
  out.total = out.bias + out.variance;
  return out;
}

McEstimate mc_conditional_risk(const MaskedDataset& ds, const CovarianceModel& model, const SignalVector& beta,
                               double sigma2, long n_draws, Rng& rng, unsigned threads) {
  check_inputs(ds, model, beta);
  if (n_draws < 100) throw Error(ErrorCode::InvalidSpec, "need at least 100 draws");
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise variance must be >= 0");

  const Conditioner conditioner(model);
  const Eigen::Index m = ds.n_targets();
  std::vector<RowConditional> rows;
  rows.reserve(static_cast<std::size_t>(m));
  Vector kept_part(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    rows.push_back(conditioner.condition(ds, a, beta.beta, true));
    kept_part[a] = ds.X_tilde.row(a).dot(beta.beta);
  }

  const Matrix root = sigma_root(model);
  const Matrix whitened_pinv = root * pseudo_inverse(ds.X_tilde);
  const Vector whitened_beta = root * beta.beta;
  const double noise_sd = std::sqrt(sigma2);
  const std::uint64_t base = rng.next_u64();
  const long n_chunks = (n_draws + kChunk - 1) / kChunk;

  struct ChunkSum {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  std::vector<ChunkSum> sums(static_cast<std::size_t>(n_chunks));

  parallel_for(static_cast<std::size_t>(n_chunks), threads, [&](std::size_t k) {
    Rng chunk_rng(mix64(base ^ mix64(k)));
    const long begin = static_cast<long>(k) * kChunk;
    const long end = std::min(n_draws, begin + kChunk);
    Vector y(m);
    ChunkSum acc;
    for (long draw = begin; draw < end; ++draw) {
      for (Eigen::Index a = 0; a < m; ++a) {
        const RowConditional& r = rows[static_cast<std::size_t>(a)];
        double masked_part = 0.0;
        if (!r.masked.empty()) {
          const Vector g = chunk_rng.normal_vector(static_cast<Eigen::Index>(r.masked.size()));
          Vector x_m = r.mean;
          if (r.chol.size() > 0) {
            x_m += r.chol * g;
          } else {
            x_m += g + (r.coef * r.v_masked.dot(g)) * r.v_masked;
          }
          for (std::size_t i = 0; i < r.masked.size(); ++i) {
            masked_part += x_m[static_cast<Eigen::Index>(i)] * beta.beta[r.masked[i]];
          }
        }
        y[a] = kept_part[a] + masked_part + noise_sd * chunk_rng.normal();
      }
      const double risk = (whitened_pinv * y - whitened_beta).squaredNorm();
      acc.sum += risk;
      acc.sum_sq += risk * risk;
    }
    sums[k] = acc;
  });

  double total = 0.0;
  double total_sq = 0.0;
  for (const auto& s : sums) {
    total += s.sum;
    total_sq += s.sum_sq;
  }
  const double count = static_cast<double>(n_draws);
  McEstimate out;
  out.draws = n_draws;
  out.mean = total / count;
  const double var = std::max(0.0, (total_sq - count * out.mean * out.mean) / (count - 1.0));
  out.standard_error = std::sqrt(var / count);
  return out;
}

std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& options) {
  static constexpr double kRatios[] = {0.2, 0.5, 0.8};
  constexpr double kSigma2 = 0.04;
  std::vector<OracleCheck> checks;
  for (int i = 0; i < options.instances; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    Rng rng = derive_stream(options.master_seed, "oracle", idx, 0);
    const int d = 10 + static_cast<int>(rng.uniform() * 21.0);
    const int n = std::min(60, 2 * d);
    const double p = kRatios[(i / 3) % 3];

    CovarianceSpec spec;
    switch (i % 3) {
      case 0: spec = IdentitySpec{}; break;
      case 1: spec = SpikedSpec{rng.uniform(1.0, 20.0), SpikeDirection::Uniform, {}}; break;
      default: spec = SpectrumProjectedSpec{SpectrumDistribution::Uniform}; break;
    }
    const CovarianceModel model = build_covariance(spec, d, rng);
    const bool eigen_signal = (i / 3) % 2 == 0;
    const SignalVector beta = eigen_signal ? make_signal(EigenvectorSignalSpec{1.0}, model, rng)
                                           : make_signal(UniformSignalSpec{}, model, rng);
    const Matrix X = sample_design(model, n, rng);
    const Vector y = generate_targets(X, beta, kSigma2, rng);
    MaskedDataset ds;
    for (;;) {
      try {
        ds = apply_mask_scheme(X, y, FixedMask{p}, rng);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyTargetSet) throw;
      }
    }
    ds.sigma2 = kSigma2;

    const ConditionalDecomposition lemma = lemma1_bias_variance(ds, model, beta, kSigma2);
    Rng mc_rng = derive_stream(options.master_seed, "oracle", idx, 1);
    const McEstimate mc = mc_conditional_risk(ds, model, beta, kSigma2, options.draws, mc_rng, options.threads);

    OracleCheck check;
    check.name = "lemma1_vs_monte_carlo";
    check.covariance_kind = model.kind_name();
    check.n = n;
    check.d = d;
    check.p = p;
    check.reference = lemma.total;
    check.candidate = mc.mean;
    check.tolerance = 3.0 * mc.standard_error;
    check.passed = std::abs(lemma.total - mc.mean) <= check.tolerance;
    checks.push_back(check);

    if (eigen_signal) {
      const auto& prov = std::get<EigenvectorProvenance>(beta.provenance);
      const ConditionalDecomposition t3 = theorem3_bias_variance(ds, model, beta, prov.eigenvalue);
      OracleCheck eig = check;
      eig.name = "theorem3_vs_lemma1_bias";
      eig.reference = lemma.bias;
      eig.candidate = t3.bias;
      eig.tolerance = 1e-8;
      eig.passed = std::abs(lemma.bias - t3.bias) <= eig.tolerance;
      checks.push_back(eig);
    }
  }
  return checks;
}

}  // namespace maskrisk
