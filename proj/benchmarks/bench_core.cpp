#include <benchmark/benchmark.h>

#include <memory>

#include "maskrisk/covariance.hpp"
#include "maskrisk/estimator.hpp"
#include "maskrisk/rng.hpp"
#include "maskrisk/sampling.hpp"
#include "maskrisk/theory.hpp"

namespace {

using namespace maskrisk;

void BM_MinNormFit(benchmark::State& state) {
  const auto n = state.range(0);
  const auto d = state.range(1);
  Rng rng(1);
  const Matrix X = rng.normal_matrix(n, d);
  const Vector y = rng.normal_vector(n);
  for (auto _ : state) {
    FitResult fit = min_norm_fit(X, y, RidgeLimit{1e-6});
    benchmark::DoNotOptimize(fit.coefficients.data());
  }
}
BENCHMARK(BM_MinNormFit)->Args({100, 500})->Args({200, 1000})->Args({1000, 200})->Unit(benchmark::kMillisecond);

void BM_ApplyMask(benchmark::State& state) {
  const auto n = state.range(0);
  const auto d = state.range(1);
  Rng rng(2);
  auto X = std::make_shared<const Matrix>(rng.normal_matrix(n, d));
  auto y = std::make_shared<const Vector>(rng.normal_vector(n));
  for (auto _ : state) {
    MaskedDataset ds = apply_mask_scheme(X, y, R2maeMask{0.4, 0.6}, rng);
    benchmark::DoNotOptimize(ds.X_tilde.data());
  }
}
BENCHMARK(BM_ApplyMask)->Args({200, 1000})->Unit(benchmark::kMillisecond);

void BM_FixedPoint(benchmark::State& state) {
  const auto d = state.range(0);
  Rng rng(3);
  Vector eigs = rng.uniform_vector(d).array() * 9.0 + 1.0;
  const double n_tilde = 0.4 * static_cast<double>(d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_fixed_point(eigs, n_tilde));
  }
}
BENCHMARK(BM_FixedPoint)->Arg(1000)->Arg(10000);

void BM_SpikedRisk(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(4);
  const CovarianceModel model = build_covariance(SpikedSpec{10.0}, d, rng);
  const SignalVector beta = make_signal(UniformSignalSpec{}, model, rng);
  const Vector v = *model.spike_direction();
  const TheoryParams params = TheoryParams::from_sizes(0.5, d / 5, d, 0.04);
  for (auto _ : state) {
    TheoryResult r = spiked_risk(10.0, v, beta, params, 0.0);
    benchmark::DoNotOptimize(r.total);
  }
}
BENCHMARK(BM_SpikedRisk)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
