#include "maskrisk/experiments.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "maskrisk/detail/overloaded.hpp"
#include "maskrisk/error.hpp"
#include "maskrisk/metrics.hpp"
#include "maskrisk/oracle.hpp"
#include "maskrisk/parallel.hpp"
#include "maskrisk/theory.hpp"

namespace maskrisk {

using detail::Overloaded;

std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(i * 0.05);
  return grid;
}

std::vector<double> fine_p_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 99; ++i) grid.push_back(i * 0.01);
  return grid;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  return seeds.empty() ? std::vector<std::uint64_t>{master_seed} : seeds;
}

void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (c.experiment_id.empty()) fail("experiment_id must be non-empty");
  if (c.n < 2 || c.d < 2) fail("n and d must be >= 2");
  if (!(c.sigma2 >= 0.0)) fail("sigma2 must be >= 0");
  if (c.reps < 1) fail("reps must be >= 1");
  if (c.n_test < 0) fail("n_test must be >= 0");
  if (!(c.theory_lambda_reg >= 0.0)) fail("theory_lambda_reg must be >= 0");
  for (double p : c.p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) fail("p_grid values must lie in [0,1]");
  }
  for (const auto& r : c.r2mae) validate(MaskScheme{r});
  if (!c.fixed_schemes && c.r2mae.empty()) fail("no masking scheme configured");
  validate(c.fit);
}

ModelInstance build_model(const ExperimentConfig& c, std::uint64_t seed) {
  Rng cov_rng = derive_stream(seed, c.tag(), streams::kCovariance, 0);
  CovarianceModel model = build_covariance(c.covariance, c.d, cov_rng);
  Rng sig_rng = derive_stream(seed, c.tag(), streams::kSignal, 0);
  SignalVector beta = make_signal(c.signal, model, sig_rng);
  return ModelInstance{std::move(model), std::move(beta)};
}

namespace {

struct Instance {
  CovarianceModel model;
  SignalVector beta;
  std::shared_ptr<const Matrix> X;
  Vector x_beta;
  Vector noise;
  double null_risk = 0.0;
  // Paired signals for the magnitude ratio (spiked models only).
  bool has_contrast = false;
  Vector x_beta_aligned;   // beta_1 = v
  Vector x_beta_orthogonal;  // beta_0 perpendicular to v
  Matrix X_eval;
};

Instance build_instance(const ExperimentConfig& c, std::uint64_t seed) {
  const std::string& tag = c.tag();
  auto [model, beta] = build_model(c, seed);
  Rng design_rng = derive_stream(seed, tag, streams::kDesign, 0);
  auto X = std::make_shared<const Matrix>(sample_design(model, c.n, design_rng));
  Rng noise_rng = derive_stream(seed, tag, streams::kNoise, 0);
  Instance inst{std::move(model), std::move(beta), std::move(X), {}, {}, 0.0, false, {}, {}, {}};
  inst.x_beta = *inst.X * inst.beta.beta;
  inst.noise = std::sqrt(c.sigma2) * noise_rng.normal_vector(c.n);
  inst.null_risk = inst.model.quadratic_form(inst.beta.beta);

  if (c.flags.emit_metrics && inst.model.spike_direction() != nullptr) {
    const Vector& v = *inst.model.spike_direction();
    Rng contrast_rng = derive_stream(seed, tag, streams::kContrastSignal, 0);
    const SignalVector orthogonal = make_signal(AngleSignalSpec{std::numbers::pi / 2.0}, inst.model, contrast_rng);
    inst.has_contrast = true;
    inst.x_beta_aligned = *inst.X * v;
    inst.x_beta_orthogonal = *inst.X * orthogonal.beta;
    Rng eval_rng = derive_stream(seed, tag, streams::kEvaluation, 0);
    inst.X_eval = sample_design(inst.model, c.test_rows(), eval_rng);
  }
  return inst;
}

struct CellSpec {
  MaskScheme scheme;
  std::uint64_t p_index = 0;
  int rep = 0;
};

struct CellOutput {
  bool skipped = false;
  SweepRow row;
};

std::string scheme_tag(const MaskScheme& s) {
  return std::holds_alternative<FixedMask>(s) ? "fixed" : "r2mae";
}

std::pair<double, double> scheme_range(const MaskScheme& s) {
  return std::visit(Overloaded{
                        [](const FixedMask& m) { return std::pair{m.p, m.p}; },
                        [](const R2maeMask& m) { return std::pair{m.p_min, m.p_max}; },
                    },
                    s);
}

Vector subset(const Vector& x, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[rows[i]];
  return out;
}

// One (scheme, p, rep) cell. Reads only its own derived streams.
CellOutput run_cell(const ExperimentConfig& c, const Instance& inst, std::uint64_t seed, const CellSpec& cell,
                    bool metrics) {
  const std::string& tag = c.tag();
  Vector noise = inst.noise;
  if (c.flags.resample_noise_per_rep) {
    Rng noise_rng = derive_stream(seed, tag + "/noise", cell.p_index, static_cast<std::uint64_t>(cell.rep));
    noise = std::sqrt(c.sigma2) * noise_rng.normal_vector(c.n);
  }
  auto y = std::make_shared<const Vector>(inst.x_beta + noise);

  Rng mask_rng = derive_stream(seed, tag, cell.p_index, static_cast<std::uint64_t>(cell.rep));
  CellOutput out;
  MaskedDataset ds;
  try {
    ds = apply_mask_scheme(inst.X, y, cell.scheme, mask_rng, MaskOptions{c.flags.deterministic_subset});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyTargetSet) throw;
    out.skipped = true;
    return out;
  }
  ds.sigma2 = c.sigma2;

  const ThinSvd svd = thin_svd(ds.X_tilde);
  const Vector beta_hat = apply_fit(svd, ds.y_tilde, c.fit);
  RiskValue risk;
  if (c.flags.use_sample_risk) {
    Rng test_rng = derive_stream(seed, tag + "/test", cell.p_index, static_cast<std::uint64_t>(cell.rep));
    risk = sample_risk(beta_hat, inst.beta, inst.model, c.test_rows(), test_rng);
  } else {
    risk = exact_risk(beta_hat, inst.beta, inst.model);
  }

  SweepRow& row = out.row;
  const auto [lo, hi] = scheme_range(cell.scheme);
  row.scheme_tag = scheme_tag(cell.scheme);
  row.p_min = lo;
  row.p_max = hi;
  row.rep = cell.rep;
  row.n_targets = ds.n_targets();
  row.risk = risk.risk;
  row.risk_normalized = risk.normalized;

  if (metrics) {
    if (svd.s.size() > 0 && svd.s[0] > 0.0) row.erank = effective_rank_from_singular_values(svd.s);
    if (inst.has_contrast) {
      Matrix rhs(ds.n_targets(), 2);
      rhs.col(0) = subset(inst.x_beta_orthogonal + noise, ds.selected);
      rhs.col(1) = subset(inst.x_beta_aligned + noise, ds.selected);
      const Matrix fits = apply_fit(svd, rhs, c.fit);
      try {
        row.magnitude_ratio = magnitude_ratio(inst.X_eval, fits.col(0), fits.col(1));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DivisionByZero) throw;
      }
    }
    if (c.d <= 100) {
      const ConditionalDecomposition dec = lemma1_bias_variance(ds, inst.model, inst.beta, c.sigma2);
      row.bias = dec.bias / inst.null_risk;
      row.variance = dec.variance / inst.null_risk;
    }
  }
  return out;
}

// Limiting risk for identity and spiked models, in null-risk units.
std::optional<double> theory_overlay(const ExperimentConfig& c, const Instance& inst, double p) {
  const double r2 = inst.beta.norm * inst.beta.norm;
  if (!(r2 > 0.0) || !(p > 0.0 && p < 1.0)) return std::nullopt;
  const TheoryParams params = TheoryParams::from_sizes(p, c.n, c.d, c.sigma2 / r2);
  try {
    if (std::holds_alternative<IdentityKind>(inst.model.kind())) {
      return isotropic_risk(params) * r2 / inst.null_risk;
    }
    if (const auto* k = std::get_if<SpikedKind>(&inst.model.kind())) {
      if (params.n_tilde >= c.d) return std::nullopt;
      const TheoryResult t = spiked_risk(k->delta, k->v, inst.beta, params, c.theory_lambda_reg * params.n_tilde);
      return t.total * r2 / inst.null_risk;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AtPhaseTransition) throw;
  }
  return std::nullopt;
}

}  // namespace

SweepResult sweep_mask_ratio(const ExperimentConfig& c, unsigned threads) {
  validate(c);
  std::vector<CellSpec> cells;
  std::vector<MaskScheme> schemes;
  std::vector<std::uint64_t> scheme_index;
  if (c.fixed_schemes) {
    for (std::size_t i = 0; i < c.p_grid.size(); ++i) {
      schemes.emplace_back(FixedMask{c.p_grid[i]});
      scheme_index.push_back(i);
    }
  }
  for (std::size_t k = 0; k < c.r2mae.size(); ++k) {
    schemes.emplace_back(c.r2mae[k]);
    scheme_index.push_back(c.p_grid.size() + k);
  }
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (int rep = 0; rep < c.reps; ++rep) cells.push_back(CellSpec{schemes[s], scheme_index[s], rep});
  }

  SweepResult result;
  for (std::uint64_t seed : c.seed_list()) {
    const Instance inst = build_instance(c, seed);
    const double gamma = c.gamma();

    std::vector<std::optional<double>> theory(schemes.size());
    if (std::holds_alternative<IdentityKind>(inst.model.kind()) ||
        std::holds_alternative<SpikedKind>(inst.model.kind())) {
      parallel_for(schemes.size(), threads, [&](std::size_t s) {
        if (const auto* f = std::get_if<FixedMask>(&schemes[s])) theory[s] = theory_overlay(c, inst, f->p);
      });
    }

    std::vector<CellOutput> outputs(cells.size());
    parallel_for(cells.size(), threads,
                 [&](std::size_t i) { outputs[i] = run_cell(c, inst, seed, cells[i], c.flags.emit_metrics); });

    SweepRow null_row;
    null_row.scheme_tag = "null";
    null_row.rep = 0;
    null_row.n_targets = c.n;
    null_row.risk = inst.null_risk;
    null_row.risk_normalized = 1.0;
    std::vector<SweepRow> rows{null_row};

    for (std::size_t s = 0; s < schemes.size(); ++s) {
      int skipped = 0;
      for (int rep = 0; rep < c.reps; ++rep) {
        CellOutput& out = outputs[s * static_cast<std::size_t>(c.reps) + static_cast<std::size_t>(rep)];
        if (out.skipped) {
          ++skipped;
          continue;
        }
        out.row.theory_risk = theory[s];
        rows.push_back(std::move(out.row));
      }
      const auto [lo, hi] = scheme_range(schemes[s]);
      if (skipped > 0) result.skips.push_back(SkipCount{seed, scheme_tag(schemes[s]), lo, hi, skipped, c.reps});
      if (2 * skipped > c.reps) {
        throw Error(ErrorCode::TooManySkips, "more than half of the repetitions at p=" + std::to_string(lo) +
                                                 " had no target rows");
      }
    }
    for (SweepRow& row : rows) {
      row.experiment_id = c.experiment_id;
      row.seed = seed;
      row.covariance_kind = inst.model.kind_name();
      row.n = c.n;
      row.d = c.d;
      row.gamma = gamma;
      row.sigma2 = c.sigma2;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

namespace {

// Mean normalized risk of each scheme over the protocol's shared mask
// streams; NaN where more than half of the runs were empty.
std::vector<double> protocol_means(const ExperimentConfig& c, const Instance& inst, std::uint64_t seed,
                                   const std::vector<MaskScheme>& schemes, unsigned threads) {
  const auto reps = static_cast<std::size_t>(c.reps);
  std::vector<CellOutput> outputs(schemes.size() * reps);
  parallel_for(outputs.size(), threads, [&](std::size_t i) {
    const CellSpec cell{schemes[i / reps], streams::kCommonMask, static_cast<int>(i % reps)};
    outputs[i] = run_cell(c, inst, seed, cell, false);
  });
  std::vector<double> means(schemes.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    double sum = 0.0;
    int used = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const CellOutput& out = outputs[s * reps + r];
      if (out.skipped) continue;
      sum += out.row.risk_normalized;
      ++used;
    }
    if (2 * (c.reps - used) <= c.reps && used > 0) means[s] = sum / used;
  }
  return means;
}

}  // namespace

double protocol_mean_risk(const ExperimentConfig& config, std::uint64_t seed, const MaskScheme& scheme,
                          unsigned threads) {
  validate(config);
  const Instance inst = build_instance(config, seed);
  return protocol_means(config, inst, seed, {scheme}, threads).front();
}

std::vector<ComparisonRow> r2mae_protocol(const ExperimentConfig& c, unsigned threads) {
  validate(c);
  if (c.r2mae.empty()) throw Error(ErrorCode::InvalidSpec, "r2mae protocol needs one R2MAE range");
  const R2maeMask range = c.r2mae.front();
  const double mid = 0.5 * (range.p_min + range.p_max);

  std::vector<MaskScheme> schemes;
  for (double p : c.p_grid) schemes.emplace_back(FixedMask{p});
  schemes.emplace_back(FixedMask{mid});
  schemes.emplace_back(range);

  std::vector<ComparisonRow> rows;
  for (std::uint64_t seed : c.seed_list()) {
    const Instance inst = build_instance(c, seed);
    const std::vector<double> means = protocol_means(c, inst, seed, schemes, threads);
    ComparisonRow row;
    row.experiment_id = c.experiment_id;
    row.seed = seed;
    row.covariance_kind = inst.model.kind_name();
    row.best_risk = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.p_grid.size(); ++i) {
      if (std::isnan(means[i])) continue;
      row.fixed_curve.emplace_back(c.p_grid[i], means[i]);
      if (means[i] < row.best_risk) {
        row.best_risk = means[i];
        row.best_p = c.p_grid[i];
      }
    }
    if (row.fixed_curve.empty()) throw Error(ErrorCode::TooManySkips, "no usable fixed masking ratio");
    row.mid_p = mid;
    row.mid_risk = means[c.p_grid.size()];
    row.r2mae_p_min = range.p_min;
    row.r2mae_p_max = range.p_max;
    row.r2mae_risk = means[c.p_grid.size() + 1];
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

std::string fmt_number(double x) {
  std::string s = std::to_string(x);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

ExperimentConfig spiked_base(const std::string& id, const std::string& tag, double delta, SpikeDirection dir,
                             double cos_theta) {
  ExperimentConfig c;
  c.experiment_id = id;
  c.stream_tag = tag;
  c.n = 200;
  c.d = 1000;
  c.covariance = SpikedSpec{delta, dir, {}};
  c.signal = AngleSignalSpec{std::acos(cos_theta)};
  c.fit = PseudoInverse{};
  c.theory_lambda_reg = 1e-8;
  return c;
}

std::vector<ExperimentConfig> delta_family(const std::string& prefix, SpikeDirection dir, bool metrics) {
  std::vector<ExperimentConfig> out;
  for (double delta : {1.0, 10.0, 100.0}) {
    const std::string id = prefix + "_delta" + fmt_number(delta);
    ExperimentConfig c = spiked_base(id, id, delta, dir, 1.0);
    c.flags.emit_metrics = metrics;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ExperimentConfig> r2mae_tables(const std::string& prefix, double quantile, R2maeMask range) {
  std::vector<ExperimentConfig> out;
  const std::pair<std::string, CovarianceSpec> families[] = {
      {"beta", SpectrumProjectedSpec{SpectrumDistribution::Beta}},
      {"latent", LatentIidSpec{500}},
  };
  for (const auto& [name, spec] : families) {
    ExperimentConfig c;
    c.experiment_id = prefix + "_" + name;
    c.n = 200;
    c.d = 1000;
    c.covariance = spec;
    c.signal = EigenvectorSignalSpec{quantile};
    c.seeds = {2, 12, 22, 32, 42};
    c.p_grid = fine_p_grid();
    c.r2mae = {range};
    c.fit = RidgeLimit{1e-6};
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<std::string> preset_ids() {
  return {"fig1a", "fig1b", "fig1c", "fig1d", "fig1e", "fig1g", "fig3", "table5", "table9"};
}

std::vector<ExperimentConfig> figure_preset(const std::string& id) {
  if (id == "fig1a") {
    std::vector<ExperimentConfig> out;
    for (const auto& [name, n, d] : {std::tuple{"fig1a_over", 2000, 10000}, std::tuple{"fig1a_under", 4000, 2000}}) {
      ExperimentConfig c;
      c.experiment_id = name;
      c.n = n;
      c.d = d;
      c.covariance = IdentitySpec{};
      c.signal = UniformSignalSpec{};
      c.fit = RidgeLimit{1e-6};
      out.push_back(std::move(c));
    }
    return out;
  }
  if (id == "fig1b") {
    std::vector<ExperimentConfig> out;
    for (double cos_theta : {0.0, 0.5, 1.0}) {
      out.push_back(spiked_base("fig1b_cos" + fmt_number(cos_theta), "fig1b", 10.0, SpikeDirection::Uniform,
                                cos_theta));
    }
    return out;
  }
  if (id == "fig1c") return delta_family("fig1c", SpikeDirection::Uniform, false);
  if (id == "fig1d") return delta_family("fig1d", SpikeDirection::Uniform, true);
  if (id == "fig3") return delta_family("fig3", SpikeDirection::Constant, true);
  if (id == "fig1e") {
    std::vector<ExperimentConfig> out;
    const std::pair<std::string, CovarianceSpec> families[] = {
        {"uniform", SpectrumProjectedSpec{SpectrumDistribution::Uniform}},
        {"beta", SpectrumProjectedSpec{SpectrumDistribution::Beta}},
        {"latent", LatentIidSpec{1250}},
    };
    for (const auto& [name, spec] : families) {
      for (double q : {1.0, 0.9, 0.5, 0.1}) {
        ExperimentConfig c;
        c.experiment_id = "fig1e_" + name + "_q" + fmt_number(q);
        c.stream_tag = "fig1e_" + name;
        c.n = 500;
        c.d = 2500;
        c.covariance = spec;
        c.signal = EigenvectorSignalSpec{q};
        c.fit = RidgeLimit{1e-6};
        out.push_back(std::move(c));
      }
    }
    return out;
  }
  if (id == "fig1g") {
    ExperimentConfig c;
    c.experiment_id = "fig1g";
    c.n = 100;
    c.d = 5000;
    c.covariance = LatentStructuredSpec{50, 100.0};
    c.signal = LatentProjectedSignalSpec{};
    c.fit = RidgeLimit{1e-6};
    return {c};
  }
  if (id == "table5") return r2mae_tables("table5", 1.0, R2maeMask{0.5, 0.6});
  // A tenth of the spectrum lies above the signal eigenvalue.
  if (id == "table9") return r2mae_tables("table9", 0.9, R2maeMask{0.4, 0.5});
  throw Error(ErrorCode::UnknownPreset, "unknown preset '" + id + "'");
}

}  // namespace maskrisk
