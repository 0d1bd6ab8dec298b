#include "maskrisk/metrics.hpp"
#include "support.hpp"

using namespace maskrisk;

TEST_SUITE("metrics") {
  TEST_CASE("exact risk examples") {
    Rng rng(1);
    const CovarianceModel id = build_covariance(IdentitySpec{}, 6, rng);
    const SignalVector beta = SignalVector::from_vector(rng.normal_vector(6));
    CHECK(exact_risk(beta.beta, beta, id).risk == 0.0);
    const RiskValue null = exact_risk(Vector::Zero(6), beta, id);
    CHECK(null.risk == doctest::Approx(beta.norm * beta.norm).epsilon(1e-14));
    CHECK(null.normalized == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(exact_risk(beta.beta + Vector::Unit(6, 0), beta, id).risk == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("normalization uses the null risk") {
    Rng rng(2);
    const CovarianceModel m = build_covariance(SpikedSpec{5.0}, 20, rng);
    const SignalVector beta = make_signal(UniformSignalSpec{}, m, rng);
    const Vector hat = rng.normal_vector(20);
    const RiskValue r = exact_risk(hat, beta, m);
    const Vector diff = hat - beta.beta;
    CHECK(test::rel_err(r.risk, diff.dot(m.sigma() * diff)) < 1e-12);
    CHECK(test::rel_err(r.null_risk, beta.beta.dot(m.sigma() * beta.beta)) < 1e-12);
    CHECK(std::abs(r.normalized - r.risk / r.null_risk) <= 1e-12 * r.normalized);
    CHECK(r.risk >= 0.0);
  }

  TEST_CASE("rotation invariance") {
    Rng rng(3);
    const Matrix sigma = test::random_spd(15, rng);
    const Matrix U = haar_orthogonal(15, 15, rng);
    const CovarianceModel a = CovarianceModel::from_matrix(sigma);
    const CovarianceModel b = CovarianceModel::from_matrix(U * sigma * U.transpose());
    const Vector beta = rng.normal_vector(15), hat = rng.normal_vector(15);
    const double ra = exact_risk(hat, SignalVector::from_vector(beta), a).risk;
    const double rb = exact_risk(U * hat, SignalVector::from_vector(U * beta), b).risk;
    CHECK(test::rel_err(rb, ra) <= 1e-10);
  }

  TEST_CASE("sample risk") {
    Rng rng(4);
    const CovarianceModel m = build_covariance(SpikedSpec{3.0}, 10, rng);
    const SignalVector beta = make_signal(UniformSignalSpec{}, m, rng);
    CHECK(sample_risk(beta.beta, beta, m, 50, rng).risk == 0.0);
    const Vector hat = beta.beta + 0.3 * rng.normal_vector(10);
    const double exact = exact_risk(hat, beta, m).risk;
    const RiskValue big = sample_risk(hat, beta, m, 1000000, rng);
    CHECK(test::rel_err(big.risk, exact) <= 0.02);
    CHECK(std::get<SampleEstimate>(big.basis).n_test == 1000000);

    std::vector<double> draws;
    for (int i = 0; i < 100; ++i) draws.push_back(sample_risk(hat, beta, m, 10000, rng).risk);
    double mean = 0.0;
    for (double x : draws) mean += x;
    mean /= draws.size();
    double var = 0.0;
    for (double x : draws) var += (x - mean) * (x - mean);
    var /= draws.size() - 1;
    CHECK(std::abs(mean - exact) <= 3.0 * std::sqrt(var / draws.size()));
  }

  TEST_CASE("effective rank examples") {
    CHECK(effective_rank(Matrix::Identity(5, 5)) == doctest::Approx(5.0).epsilon(1e-12));
    Rng rng(5);
    const Vector a = rng.normal_vector(7), b = rng.normal_vector(4);
    CHECK(effective_rank(a * b.transpose()) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(effective_rank_from_singular_values(Vector::Map(std::vector<double>{2, 2, 0}.data(), 3)) ==
          doctest::Approx(2.0).epsilon(1e-14));
    CHECK(test::error_code_of([] { effective_rank(Matrix::Zero(3, 3)); }) == ErrorCode::ZeroMatrix);
  }

  TEST_CASE("effective rank bounds and equality case") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const int k = 1 + static_cast<int>(rng.uniform() * 8);
      Vector s = Vector::Zero(10);
      for (int i = 0; i < k; ++i) s[i] = rng.uniform(0.1, 3.0);
      const double er = effective_rank_from_singular_values(s);
      CHECK(er >= 1.0 - 1e-12);
      CHECK(er <= k + 1e-12);
      if (k > 1) CHECK(er < k - 1e-6);  // unequal values stay strictly below the rank
      Vector eq = Vector::Zero(10);
      eq.head(k).setConstant(1.7);
      CHECK(effective_rank_from_singular_values(eq) == doctest::Approx(k).epsilon(1e-12));
    }
  }

  TEST_CASE("magnitude ratio") {
    Rng rng(7);
    const Matrix X = rng.normal_matrix(30, 6);
    const Vector b = rng.normal_vector(6);
    CHECK(magnitude_ratio(X, b, b) == doctest::Approx(1.0));
    CHECK(magnitude_ratio(X, 2.0 * b, b) == doctest::Approx(4.0));
    CHECK(test::error_code_of([&] { magnitude_ratio(X, b, Vector::Zero(6)); }) == ErrorCode::DivisionByZero);
  }
}
