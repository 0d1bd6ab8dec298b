#include "maskrisk/theory.hpp"
#include "support.hpp"

using namespace maskrisk;

namespace {

TheoryParams params(double p, double gamma, double kappa) {
  TheoryParams t;
  t.p = p;
  t.gamma = gamma;
  t.kappa = kappa;
  return t;
}

// Dense reference for the spiked-model risk: build the masked covariance
// entrywise, solve the trace equation by plain bisection, and evaluate every
// quadratic form through an explicit resolvent.
TheoryResult dense_spiked_reference(double delta, const Vector& v, const Vector& beta_unit, const TheoryParams& t) {
  const int d = static_cast<int>(v.size());
  const double p = t.p;
  const Matrix sigma = Matrix::Identity(d, d) + delta * v * v.transpose();
  Matrix st = (1 - p) * (1 - p) * sigma;
  for (int i = 0; i < d; ++i) st(i, i) += p * (1 - p) * sigma(i, i);
  const Vector e = Eigen::SelfAdjointEigenSolver<Matrix>(st).eigenvalues();
  auto trace = [&](double lam) { return (e.array() / (e.array() + lam)).sum(); };
  double lo = 1e-14, hi = 1e14;
  for (int it = 0; it < 2000; ++it) {
    const double mid = std::sqrt(lo * hi);
    (trace(mid) > t.n_tilde ? lo : hi) = mid;
  }
  const double lam = std::sqrt(lo * hi);
  const Matrix R = (st + lam * Matrix::Identity(d, d)).inverse();
  TheoryResult r;
  r.lambda_star = lam;
  r.c = p * delta * v.dot(beta_unit) / (1 + delta * (1 - p));
  r.phi_beta = lam * beta_unit.dot(R * beta_unit);
  r.phi_v = lam * v.dot(R * v);
  r.psi = lam * beta_unit.dot(R * v);
  const Matrix R2 = R * R;
  r.u = (sigma * st * R2).trace() / (t.n_tilde - (st * st * R2).trace());
  r.bias = r.phi_beta + r.c * r.c * (1 - r.phi_v) + delta * std::pow(r.c * (1 - r.phi_v) - r.psi, 2);
  r.variance = r.u * (t.kappa + p + r.c * p * beta_unit.dot(v));
  r.total = r.bias + r.variance;
  return r;
}

}  // namespace

TEST_SUITE("theory") {
  TEST_CASE("isotropic risk examples") {
    CHECK(isotropic_risk(params(0.5, 5.0, 0.0)) == doctest::Approx(91.0 / 90.0).epsilon(1e-14));
    CHECK(isotropic_risk(params(0.9, 0.5, 0.04)) == doctest::Approx(11.75).epsilon(1e-13));
    CHECK(std::abs(isotropic_risk(params(0.4, 1e8, 0.04)) - 1.0) <= 1e-6);
    CHECK(test::error_code_of([] { isotropic_risk(params(0.5, 0.5, 0.1)); }) == ErrorCode::AtPhaseTransition);
    CHECK(test::error_code_of([] { isotropic_risk(params(1.0, 3.0, 0.1)); }) == ErrorCode::InvalidSpec);
  }

  TEST_CASE("isotropic risk shape") {
    for (double gamma : {0.5, 2.0, 5.0}) {
      std::vector<double> curve;
      for (int k = 1; k <= 19; ++k) {
        const double p = 0.05 * k;
        if (std::abs(p - gamma) < 1e-6) continue;
        const double a = isotropic_risk(params(p, gamma, 0.04));
        CHECK(isotropic_risk(params(p, gamma, 0.05)) > a);
        if (p < gamma) CHECK(a >= 1.0 - p / gamma);
        curve.push_back(a);
      }
      // Overparametrized curves fall at small p (slope (kappa - 1)/gamma at
      // p = 0) and then rise: the sign of the increments flips at most once.
      if (gamma > 1.0) {
        int flips = 0;
        for (std::size_t i = 2; i < curve.size(); ++i) {
          if ((curve[i] > curve[i - 1]) != (curve[i - 1] > curve[i - 2])) ++flips;
        }
        CHECK(flips <= 1);
        CHECK(curve.back() > curve.front());
        const double h = 1e-7;
        CHECK((isotropic_risk(params(h, gamma, 0.04)) - 1.0) / h ==
              doctest::Approx((0.04 - 1.0) / gamma).epsilon(1e-4));
      }
    }
    CHECK(isotropic_risk(params(0.501, 0.5, 0.04)) > 1e2);
  }

  TEST_CASE("fixed point closed forms") {
    const Vector half = Vector::Constant(1000, 0.5);
    CHECK(solve_fixed_point(half, 100.0) == doctest::Approx(4.5).epsilon(1e-10));
    const int n = 200, d = 1000;
    for (double p = 0.05; p < 0.96; p += 0.05) {
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, 0.0);
      const double mu = (1 - p) * (t.gamma / p - 1);
      const double lam = solve_fixed_point(Vector::Constant(d, 1 - p), t.n_tilde);
      CHECK(std::abs(lam - mu) <= 1e-10 * std::max(1.0, mu));
    }
  }

  TEST_CASE("fixed point residual, monotonicity and errors") {
    Rng rng(1);
    const CovarianceModel m = build_covariance(SpikedSpec{10.0}, 400, rng);
    const Vector e = masked_spectrum(m.sigma(), 0.4).eigenvalues;
    const double n_tilde = 80.0;
    const double lam = solve_fixed_point(e, n_tilde);
    CHECK(std::abs(fixed_point_residual(e, n_tilde, 0.0, lam)) <= 1e-10 * n_tilde);
    // Trace minus guarded target decreases in lambda.
    double prev = -fixed_point_residual(e, n_tilde, 1e-3, 1e-14);
    for (int k = 1; k <= 100; ++k) {
      const double x = std::pow(10.0, -14.0 + 28.0 * k / 100.0);
      const double cur = -fixed_point_residual(e, n_tilde, 1e-3, x);
      CHECK(cur <= prev);
      prev = cur;
    }
    const double guarded = solve_fixed_point(e, n_tilde, 1e-8 * n_tilde);
    CHECK(std::abs(fixed_point_residual(e, n_tilde, 1e-8 * n_tilde, guarded)) <= 1e-10 * n_tilde);
    CHECK(test::error_code_of([&] { solve_fixed_point(e, 400.0); }) == ErrorCode::NoSolution);
    CHECK(test::error_code_of([&] { solve_fixed_point(Vector::Constant(10, 1e-30), 5.0); }) ==
          ErrorCode::BracketExhausted);
  }

  TEST_CASE("spiked risk matches a dense reference") {
    Rng rng(2);
    for (int trial = 0; trial < 6; ++trial) {
      const int n = 40 + static_cast<int>(rng.uniform() * 40);
      const int d = static_cast<int>(std::lround(rng.uniform(2.0, 5.0) * n));
      const double delta = rng.uniform(0.0, 100.0);
      const double p = rng.uniform(0.1, 0.9);
      const CovarianceModel m = build_covariance(SpikedSpec{delta}, d, rng);
      const SignalVector beta = make_signal(AngleSignalSpec{rng.uniform(0.0, 1.5)}, m, rng);
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, 0.04);
      const TheoryResult ref = dense_spiked_reference(delta, *m.spike_direction(), beta.unit, t);
      const TheoryResult got = spiked_risk(delta, *m.spike_direction(), beta, t);
      CHECK(std::abs(got.lambda_star - ref.lambda_star) <= 1e-9 * ref.lambda_star);
      CHECK(std::abs(got.bias - ref.bias) <= 1e-8);
      CHECK(std::abs(got.variance - ref.variance) <= 1e-8);
      CHECK(std::abs(got.u - ref.u) <= 1e-8);
      CHECK(std::abs(got.total - got.bias - got.variance) <= 1e-12);
      CHECK(got.bias >= -1e-10);
      CHECK(got.variance >= -1e-10);
    }
  }

  TEST_CASE("structured spiked risk matches the eigenbasis evaluation") {
    Rng rng(12);
    for (int trial = 0; trial < 12; ++trial) {
      const int n = 30 + static_cast<int>(rng.uniform() * 80);
      const int d = static_cast<int>(std::lround(rng.uniform(1.5, 8.0) * n));
      const double delta = rng.uniform(0.0, 200.0);
      const double p = rng.uniform(0.05, 0.95);
      const CovarianceModel m = build_covariance(SpikedSpec{delta, trial % 3 == 0 ? SpikeDirection::Constant
                                                                                   : SpikeDirection::Uniform},
                                                 d, rng);
      const Vector& v = *m.spike_direction();
      const SignalVector beta = make_signal(AngleSignalSpec{rng.uniform(0.0, 1.6)}, m, rng);
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, rng.uniform(0.0, 0.5));
      const double guard = trial % 2 == 0 ? 0.0 : 1e-8 * t.n_tilde;
      const TheoryResult a = spiked_risk(delta, v, beta, t, guard);
      const TheoryResult b = spiked_risk(spiked_masked_spectrum(delta, v, p), delta, v, beta, t, guard);
      CHECK(std::abs(a.lambda_star - b.lambda_star) <= 1e-9 * b.lambda_star);
      CHECK(std::abs(a.phi_beta - b.phi_beta) <= 1e-9);
      CHECK(std::abs(a.phi_v - b.phi_v) <= 1e-9);
      CHECK(std::abs(a.psi - b.psi) <= 1e-9);
      CHECK(std::abs(a.u - b.u) <= 1e-9 * std::max(1.0, b.u));
      CHECK(std::abs(a.total - b.total) <= 1e-9 * std::max(1.0, b.total));
    }
  }

  TEST_CASE("spiked risk at zero spike reduces to the isotropic formula") {
    const int n = 200, d = 1000;
    Rng rng(3);
    const Vector v = Vector::Unit(d, 0);
    const SignalVector beta = SignalVector::from_vector(rng.normal_vector(d));
    for (double p = 0.1; p < 0.95; p += 0.1) {
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, 0.04);
      CHECK(std::abs(spiked_risk(0.0, v, beta, t).total - isotropic_risk(t)) <= 1e-6);
    }
  }

  TEST_CASE("spectral form agrees with the resolvent form") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 30 + static_cast<int>(rng.uniform() * 50);
      const int d = static_cast<int>(std::lround(rng.uniform(2.0, 10.0) * n));
      const double delta = rng.uniform(0.0, 100.0);
      const double p = rng.uniform(0.1, 0.9);
      const CovarianceModel m = build_covariance(SpikedSpec{delta}, d, rng);
      const Vector& v = *m.spike_direction();
      const SignalVector beta = make_signal(AngleSignalSpec{rng.uniform(0.0, 1.6)}, m, rng);
      const TheoryParams t = TheoryParams::from_sizes(p, n, d, rng.uniform(0.0, 0.5));
      const MaskedSpectrum spec = spiked_masked_spectrum(delta, v, p);
      const SpectralMeasures meas = spectral_measures(spec, beta.unit, v);
      CHECK(std::abs(meas.proj_beta.squaredNorm() - 1.0) <= 1e-10);
      CHECK(std::abs(meas.proj_v.squaredNorm() - 1.0) <= 1e-10);
      const TheoryResult a = spiked_risk(spec, delta, v, beta, t);
      const TheoryResult b = spectral_risk(meas, delta, v.dot(beta.unit), t);
      CHECK(std::abs(a.bias - b.bias) <= 1e-8);
      CHECK(std::abs(a.variance - b.variance) <= 1e-8);
    }
  }

  TEST_CASE("spectral bias at zero spike is 1 - p/gamma") {
    const int n = 100, d = 500;
    const double p = 0.3;
    const Vector v = Vector::Unit(d, 3);
    Rng rng(5);
    const Vector b = rng.normal_vector(d).normalized();
    const TheoryParams t = TheoryParams::from_sizes(p, n, d, 0.0);
    const TheoryResult r = spectral_risk(spectral_measures(spiked_masked_spectrum(0.0, v, p), b, v), 0.0, v.dot(b), t);
    CHECK(std::abs(r.bias - (1 - p / t.gamma)) <= 1e-10);
  }

  TEST_CASE("variance prefactor identity") {
    Rng rng(6);
    for (int i = 0; i < 10; ++i) {
      const double p = rng.uniform(0.1, 0.9), delta = rng.uniform(0, 100), vb = rng.uniform(-1, 1);
      const double kappa = rng.uniform(0, 1);
      const double c = p * delta * vb / (1 + delta * (1 - p));
      const double lhs = kappa + p + p * p * delta * vb * vb / (1 + delta * (1 - p));
      CHECK(std::abs(lhs - (kappa + p + c * p * vb)) <= 1e-12);
    }
  }

  TEST_CASE("spiked curve with aligned signal has an interior minimum below 1") {
    Rng rng(7);
    const int n = 200, d = 1000;
    const CovarianceModel m = build_covariance(SpikedSpec{10.0}, d, rng);
    const Vector& v = *m.spike_direction();
    const SignalVector beta = SignalVector::from_vector(v);
    std::vector<double> curve;
    for (int k = 1; k <= 19; ++k) {
      const double p = 0.05 * k;
      // Results are in units of r^2; the null risk here is v^T Sigma v = 11.
      curve.push_back(spiked_risk(10.0, v, beta, TheoryParams::from_sizes(p, n, d, 0.04)).total / 11.0);
    }
    const auto it = std::min_element(curve.begin(), curve.end());
    CHECK(it != curve.begin());
    CHECK(it != curve.end() - 1);
    CHECK(*it < 1.0);
  }

  TEST_CASE("masked spectrum matches the dense eigensolver") {
    Rng rng(8);
    const CovarianceModel m = build_covariance(SpikedSpec{20.0}, 60, rng);
    const MaskedSpectrum a = spiked_masked_spectrum(20.0, *m.spike_direction(), 0.3);
    const MaskedSpectrum b = masked_spectrum(m.sigma(), 0.3);
    CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix rebuilt = a.eigenvectors * a.eigenvalues.asDiagonal() * a.eigenvectors.transpose();
    CHECK(test::max_abs(rebuilt - masked_covariance(m, 0.3)) < 1e-10);
  }
}
