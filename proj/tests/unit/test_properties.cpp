// Randomized property checks across modules.
#include <memory>

#include "maskrisk/estimator.hpp"
#include "maskrisk/metrics.hpp"
#include "maskrisk/sampling.hpp"
#include "maskrisk/theory.hpp"
#include "support.hpp"

using namespace maskrisk;

TEST_SUITE("properties") {
  TEST_CASE("masked designs interpolate their targets") {
    Rng rng(100);
    for (int trial = 0; trial < 25; ++trial) {
      const int d = 20 + static_cast<int>(rng.uniform() * 80);
      const int n = 5 + static_cast<int>(rng.uniform() * d);
      const CovarianceModel m = build_covariance(SpikedSpec{rng.uniform(0, 50)}, d, rng);
      auto X = std::make_shared<const Matrix>(sample_design(m, n, rng));
      auto y = std::make_shared<const Vector>(rng.normal_vector(n));
      MaskedDataset ds;
      try {
        ds = apply_mask_scheme(X, y, R2maeMask{0.1, 0.6}, rng);
      } catch (const Error&) {
        continue;
      }
      const FitResult fit = min_norm_fit(ds.X_tilde, ds.y_tilde);
      if (fit.rank == ds.n_targets()) {
        CHECK((ds.X_tilde * fit.coefficients - ds.y_tilde).norm() <= 1e-8 * ds.y_tilde.norm());
      }
    }
  }

  TEST_CASE("pseudo-inverse and ridge limit give the same risk") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 50 + static_cast<int>(rng.uniform() * 150);
      const int n = 10 + static_cast<int>(rng.uniform() * 2 * d);
      const CovarianceModel m = build_covariance(SpectrumProjectedSpec{}, d, rng);
      const SignalVector beta = make_signal(UniformSignalSpec{}, m, rng);
      const Matrix X = sample_design(m, n, rng);
      const Vector y = generate_targets(X, beta, 0.04, rng);
      const double p = rng.uniform(0.2, 0.9);
      MaskedDataset ds;
      try {
        ds = apply_mask_scheme(X, y, FixedMask{p}, rng);
      } catch (const Error&) {
        continue;
      }
      // Near the interpolation threshold the ridge term is no longer
      // negligible against the smallest singular value; skip those.
      if (std::abs(ds.n_targets() - d) < 0.1 * d) continue;
      const double a = exact_risk(min_norm_fit(ds.X_tilde, ds.y_tilde).coefficients, beta, m).risk;
      const double b = exact_risk(min_norm_fit(ds.X_tilde, ds.y_tilde, RidgeLimit{1e-6}).coefficients, beta, m).risk;
      CHECK(test::rel_err(b, a) <= 1e-4);
    }
  }

  TEST_CASE("effective rank lies in [1, rank]") {
    Rng rng(102);
    for (int trial = 0; trial < 30; ++trial) {
      const int r = 1 + static_cast<int>(rng.uniform() * 10);
      const Matrix M = rng.normal_matrix(15, r) * rng.normal_matrix(r, 12);
      const double er = effective_rank(M);
      CHECK(er >= 1.0 - 1e-12);
      CHECK(er <= r + 1e-9);
    }
  }

  TEST_CASE("fixed-point residuals") {
    Rng rng(103);
    for (int trial = 0; trial < 30; ++trial) {
      const int d = 50 + static_cast<int>(rng.uniform() * 500);
      Vector e(d);
      for (int i = 0; i < d; ++i) e[i] = rng.uniform(0.0, 10.0);
      const double n_tilde = rng.uniform(0.05, 0.95) * d;
      const double guard = rng.uniform() < 0.5 ? 0.0 : 1e-8 * n_tilde;
      const double lam = solve_fixed_point(e, n_tilde, guard);
      CHECK(lam > 0.0);
      CHECK(std::abs(fixed_point_residual(e, n_tilde, guard, lam)) <= 1e-10 * n_tilde);
    }
  }

  TEST_CASE("spiked and spectral forms agree over the admissible range") {
    Rng rng(104);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 40 + static_cast<int>(rng.uniform() * 40);
      const int d = static_cast<int>(std::lround(rng.uniform(2.0, 10.0) * n));
      const double delta = rng.uniform(0.0, 100.0), p = rng.uniform(0.1, 0.9);
      const CovarianceModel m = build_covariance(SpikedSpec{delta}, d, rng);
      const SignalVector beta = make_signal(UniformSignalSpec{}, m, rng);
      const Vector& v = *m.spike_direction();
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, 0.04 / (beta.norm * beta.norm));
      const MaskedSpectrum s = spiked_masked_spectrum(delta, v, p);
      const TheoryResult a = spiked_risk(s, delta, v, beta, t);
      const TheoryResult b = spectral_risk(spectral_measures(s, beta.unit, v), delta, v.dot(beta.unit), t);
      CHECK(std::abs(a.bias - b.bias) <= 1e-8);
      CHECK(std::abs(a.variance - b.variance) <= 1e-8);
    }
  }

  TEST_CASE("X_tilde zeros follow Z exactly") {
    Rng rng(105);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix X = rng.normal_matrix(30, 17);
      const Vector y = rng.normal_vector(30);
      const MaskedDataset ds = apply_mask_scheme(X, y, FixedMask{rng.uniform(0.3, 1.0)}, rng);
      for (int a = 0; a < ds.n_targets(); ++a)
        for (int j = 0; j < 17; ++j) CHECK((ds.X_tilde(a, j) == 0.0) == (ds.Z(a, j) == 0));
    }
  }
}
