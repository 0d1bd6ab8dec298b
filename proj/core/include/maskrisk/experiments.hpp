#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maskrisk/covariance.hpp"
#include "maskrisk/estimator.hpp"
#include "maskrisk/sampling.hpp"

namespace maskrisk {

struct ExperimentFlags {
  bool deterministic_subset = false;
  bool resample_noise_per_rep = false;
  bool use_sample_risk = false;
  bool emit_metrics = false;
  bool operator==(const ExperimentFlags&) const = default;
};

/// {0.05, 0.10, ..., 0.95}
std::vector<double> default_p_grid();
/// {0, 0.01, ..., 0.99}
std::vector<double> fine_p_grid();

struct ExperimentConfig {
  std::string experiment_id = "custom";
  /// Tag used to derive every random stream; configs sharing a tag share
  /// their covariance, design, noise and masks. Empty = experiment_id.
  std::string stream_tag;
  std::uint64_t master_seed = 0;
  /// Seeds to run; empty = {master_seed}.
  std::vector<std::uint64_t> seeds;
  int n = 200;
  int d = 1000;
  double sigma2 = 0.04;
  CovarianceSpec covariance = IdentitySpec{};
  SignalSpec signal = UniformSignalSpec{};
  std::vector<double> p_grid = default_p_grid();
  bool fixed_schemes = true;  // sweep Fixed(p) over p_grid
  std::vector<R2maeMask> r2mae;
  int reps = 50;
  FitMethod fit = RidgeLimit{1e-6};
  /// Ridge guard for the theory overlay's fixed point; the solver receives
  /// theory_lambda_reg * n_tilde. Zero disables the guard.
  double theory_lambda_reg = 0.0;
  /// Test rows for sample risk and magnitude ratio; 0 = 10n.
  int n_test = 0;
  ExperimentFlags flags;

  bool operator==(const ExperimentConfig&) const = default;

  const std::string& tag() const { return stream_tag.empty() ? experiment_id : stream_tag; }
  std::vector<std::uint64_t> seed_list() const;
  int test_rows() const { return n_test > 0 ? n_test : 10 * n; }
  double gamma() const { return static_cast<double>(d) / n; }
};

/// Throws Error(InvalidSpec) on out-of-range fields.
void validate(const ExperimentConfig& config);

/// Covariance and signal of one seed's instance, drawn from the same streams
/// the sweep uses.
struct ModelInstance {
  CovarianceModel model;
  SignalVector beta;
};
ModelInstance build_model(const ExperimentConfig& config, std::uint64_t seed);

struct SweepRow {
  std::string experiment_id;
  std::uint64_t seed = 0;
  std::string covariance_kind;
  int n = 0;
  int d = 0;
  double gamma = 0.0;
  double sigma2 = 0.0;
  std::string scheme_tag;  // "fixed", "r2mae" or "null"
  std::optional<double> p_min;
  std::optional<double> p_max;
  int rep = 0;
  int n_targets = 0;
  double risk = 0.0;
  double risk_normalized = 0.0;
  std::optional<double> bias;      // normalized like risk_normalized
  std::optional<double> variance;  // normalized like risk_normalized
  std::optional<double> erank;
  std::optional<double> magnitude_ratio;
  std::optional<double> theory_risk;  // normalized like risk_normalized

  bool operator==(const SweepRow&) const = default;
};

struct SkipCount {
  std::uint64_t seed = 0;
  std::string scheme_tag;
  double p_min = 0.0;
  double p_max = 0.0;
  int skipped = 0;
  int attempted = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SkipCount> skips;  // only cells with at least one skip
};

/// Masking-ratio sweep. Per seed the covariance, signal, design and noise are
/// drawn once; each (scheme, p, rep) cell redraws only the mask (and, with
/// resample_noise_per_rep, the noise). The first row per seed is the null
/// predictor. Output order is canonical and independent of `threads`.
/// Throws Error(TooManySkips) if more than half of the repetitions at any
/// grid point hit an empty target set.
SweepResult sweep_mask_ratio(const ExperimentConfig& config, unsigned threads = 1);

struct ComparisonRow {
  std::string experiment_id;
  std::uint64_t seed = 0;
  std::string covariance_kind;
  double best_p = 0.0;
  double best_risk = 0.0;
  double mid_p = 0.0;
  double mid_risk = 0.0;
  double r2mae_p_min = 0.0;
  double r2mae_p_max = 0.0;
  double r2mae_risk = 0.0;
  /// Mean normalized risk per fixed grid point; grid points where more than
  /// half of the runs had no targets are absent.
  std::vector<std::pair<double, double>> fixed_curve;
};

/// Fixed-ratio search against a mid-range fixed ratio and an R2MAE range.
/// Every scheme reads the same per-run mask streams, so R2mae(p, p) and
/// Fixed(p) agree bitwise. Uses config.r2mae.front() and config.p_grid.
std::vector<ComparisonRow> r2mae_protocol(const ExperimentConfig& config, unsigned threads = 1);

/// Mean normalized risk of one scheme over config.reps runs on the instance
/// of `seed`, with the protocol's shared mask streams. NaN when more than
/// half of the runs had no targets.
double protocol_mean_risk(const ExperimentConfig& config, std::uint64_t seed, const MaskScheme& scheme,
                          unsigned threads = 1);

/// Known ids: fig1a, fig1b, fig1c, fig1d, fig1e, fig1g, fig3, table5, table9.
/// Throws Error(UnknownPreset).
std::vector<ExperimentConfig> figure_preset(const std::string& preset_id);
std::vector<std::string> preset_ids();

}  // namespace maskrisk
