#include "maskrisk_cli/run.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "maskrisk/error.hpp"
#include "maskrisk/oracle.hpp"
#include "maskrisk/theory.hpp"
#include "maskrisk_cli/config.hpp"
#include "maskrisk_cli/csv.hpp"

#ifndef MASKRISK_VERSION
#define MASKRISK_VERSION "0.0.0"
#endif

namespace maskrisk::cli {

using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SweepRow theory_row(const ExperimentConfig& c, std::uint64_t seed, const ModelInstance& inst, const char* tag,
                    double p, double total, double bias, double variance) {
  const double r2 = inst.beta.norm * inst.beta.norm;
  const double null_risk = inst.model.quadratic_form(inst.beta.beta);
  const double to_null = r2 / null_risk;
  SweepRow row;
  row.experiment_id = c.experiment_id;
  row.seed = seed;
  row.covariance_kind = inst.model.kind_name();
  row.n = c.n;
  row.d = c.d;
  row.gamma = c.gamma();
  row.sigma2 = c.sigma2;
  row.scheme_tag = tag;
  row.p_min = p;
  row.p_max = p;
  row.n_targets = static_cast<int>(std::lround(c.n * p));
  row.risk = total * r2;
  row.risk_normalized = total * to_null;
  row.bias = bias * to_null;
  row.variance = variance * to_null;
  row.theory_risk = row.risk_normalized;
  return row;
}

}  // namespace

std::vector<SweepRow> theory_rows(const ExperimentConfig& c) {
  validate(c);
  std::vector<SweepRow> rows;
  for (std::uint64_t seed : c.seed_list()) {
    const ModelInstance inst = build_model(c, seed);
    const double r2 = inst.beta.norm * inst.beta.norm;
    if (!(r2 > 0.0)) throw Error(ErrorCode::InvalidSpec, "theory curves need a nonzero signal");
    const auto* spiked = std::get_if<SpikedKind>(&inst.model.kind());
    const bool identity = std::holds_alternative<IdentityKind>(inst.model.kind());
    if (!identity && spiked == nullptr) {
      throw Error(ErrorCode::InvalidSpec, "theory curves need an identity or spiked covariance");
    }
    for (double p : c.p_grid) {
      if (!(p > 0.0 && p < 1.0)) continue;
      const TheoryParams params = TheoryParams::from_sizes(p, c.n, c.d, c.sigma2 / r2);
      if (identity) {
        if (std::abs(params.gamma - p) <= 1e-9) continue;
        const double total = isotropic_risk(params);
        const double bias = params.gamma > p ? 1.0 - p / params.gamma : 0.0;
        rows.push_back(theory_row(c, seed, inst, "isotropic", p, total, bias, total - bias));
        continue;
      }
      if (params.n_tilde >= c.d) continue;
      const double guard = c.theory_lambda_reg * params.n_tilde;
      const TheoryResult a = spiked_risk(spiked->delta, spiked->v, inst.beta, params, guard);
      rows.push_back(theory_row(c, seed, inst, "spiked", p, a.total, a.bias, a.variance));
      const MaskedSpectrum spectrum = spiked_masked_spectrum(spiked->delta, spiked->v, p);
      const SpectralMeasures measures = spectral_measures(spectrum, inst.beta.unit, spiked->v);
      const TheoryResult b = spectral_risk(measures, spiked->delta, spiked->v.dot(inst.beta.unit), params, guard);
      rows.push_back(theory_row(c, seed, inst, "spectral", p, b.total, b.bias, b.variance));
    }
  }
  return rows;
}

json RunManifest::to_json() const {
  json skip_list = json::array();
  for (const SkipCount& s : skips) {
    skip_list.push_back(json{{"seed", s.seed},
                             {"scheme_tag", s.scheme_tag},
                             {"p_min", s.p_min},
                             {"p_max", s.p_max},
                             {"skipped", s.skipped},
                             {"attempted", s.attempted}});
  }
  return json{{"version", version},       {"config", config},        {"master_seed", master_seed},
              {"started_at", started_at}, {"finished_at", finished_at}, {"row_count", row_count},
              {"skips", skip_list},       {"outputs", outputs}};
}

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  unsigned threads = 0;
  std::string format = "csv";
};

void add_common(CLI::App* sub, CommonOptions& o, bool needs_config) {
  auto* cfg = sub->add_option("--config", o.config_path, "Experiment config (JSON object or array)");
  if (needs_config) cfg->required();
  sub->add_option("--seed", o.seed, "Master seed; overrides the config and MASKRISK_SEED");
  sub->add_option("--out", o.out_path, "Output file (default: standard output)");
  sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("MASKRISK_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(raw, &used);
    if (used != std::string(raw).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("MASKRISK_SEED is not an unsigned integer: ") + raw);
  }
}

void apply_seed(std::vector<ExperimentConfig>& configs, const CommonOptions& o) {
  std::optional<std::uint64_t> seed = o.seed ? o.seed : env_seed();
  if (!seed) return;
  for (auto& c : configs) {
    c.master_seed = *seed;
    c.seeds.clear();
  }
}

json configs_json(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() == 1) return config_to_json(configs.front());
  json arr = json::array();
  for (const auto& c : configs) arr.push_back(config_to_json(c));
  return arr;
}

// Writes `body` to --out (plus a manifest next to it) or to `out`.
void deliver(const CommonOptions& o, const std::string& body, RunManifest manifest, std::ostream& out) {
  if (o.out_path.empty()) {
    out << body;
    return;
  }
  {
    std::ofstream file(o.out_path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file " + o.out_path);
    file << body;
    if (!file) throw std::runtime_error("failed writing " + o.out_path);
  }
  const std::string manifest_path = o.out_path + ".manifest.json";
  manifest.outputs = {o.out_path, manifest_path};
  manifest.finished_at = utc_now();
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open manifest file " + manifest_path);
  mf << manifest.to_json().dump(2) << '\n';
}

RunManifest start_manifest(const std::vector<ExperimentConfig>& configs) {
  RunManifest m;
  m.version = MASKRISK_VERSION;
  m.config = configs_json(configs);
  m.master_seed = configs.front().master_seed;
  m.started_at = utc_now();
  return m;
}

std::string render_rows(const std::vector<SweepRow>& rows, const std::vector<SkipCount>& skips,
                        const std::string& format) {
  if (format == "json") {
    json skip_list = json::array();
    for (const SkipCount& s : skips) {
      skip_list.push_back(json{{"seed", s.seed}, {"scheme_tag", s.scheme_tag}, {"p_min", s.p_min},
                               {"p_max", s.p_max}, {"skipped", s.skipped}, {"attempted", s.attempted}});
    }
    return json{{"rows", rows_to_json(rows)}, {"skips", skip_list}}.dump(2) + "\n";
  }
  std::ostringstream ss;
  emit_csv(rows, ss);
  return ss.str();
}

std::string render_comparisons(const std::vector<ComparisonRow>& rows, const std::string& format) {
  if (format == "json") return comparisons_to_json(rows).dump(2) + "\n";
  std::ostringstream ss;
  emit_comparison_csv(rows, ss);
  return ss.str();
}

bool is_protocol_config(const ExperimentConfig& c) { return !c.r2mae.empty() && c.p_grid.size() > 1 && c.p_grid.front() == 0.0; }

int cmd_theory(const CommonOptions& o, std::ostream& out) {
  auto configs = load_configs(o.config_path);
  apply_seed(configs, o);
  RunManifest manifest = start_manifest(configs);
  std::vector<SweepRow> rows;
  for (const auto& c : configs) {
    auto part = theory_rows(c);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw ConfigError("no theory rows: the p-grid has no admissible ratio");
  manifest.row_count = rows.size();
  deliver(o, render_rows(rows, {}, o.format), manifest, out);
  return kExitOk;
}

int run_sweeps(const std::vector<ExperimentConfig>& configs, const CommonOptions& o, std::ostream& out,
               std::ostream& err) {
  RunManifest manifest = start_manifest(configs);
  std::vector<SweepRow> rows;
  for (const auto& c : configs) {
    err << "simulate " << c.experiment_id << " (n=" << c.n << ", d=" << c.d << ")\n";
    SweepResult r = sweep_mask_ratio(c, o.threads);
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
    manifest.skips.insert(manifest.skips.end(), r.skips.begin(), r.skips.end());
  }
  manifest.row_count = rows.size();
  deliver(o, render_rows(rows, manifest.skips, o.format), manifest, out);
  return kExitOk;
}

int run_protocols(const std::vector<ExperimentConfig>& configs, const CommonOptions& o, std::ostream& out,
                  std::ostream& err) {
  RunManifest manifest = start_manifest(configs);
  std::vector<ComparisonRow> rows;
  for (const auto& c : configs) {
    err << "r2mae " << c.experiment_id << " (" << c.seed_list().size() << " seeds)\n";
    auto part = r2mae_protocol(c, o.threads);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  manifest.row_count = rows.size();
  deliver(o, render_comparisons(rows, o.format), manifest, out);
  return kExitOk;
}

int cmd_oracle(const CommonOptions& o, int instances, long draws, std::ostream& out) {
  OracleSuiteOptions opts;
  opts.instances = instances;
  opts.draws = draws;
  opts.threads = o.threads;
  if (!o.config_path.empty()) {
    auto configs = load_configs(o.config_path);
    opts.master_seed = configs.front().master_seed;
  }
  if (auto s = o.seed ? o.seed : env_seed()) opts.master_seed = *s;

  const std::vector<OracleCheck> checks = run_oracle_suite(opts);
  std::ostringstream ss;
  int mc_failures = 0;
  int mc_total = 0;
  bool exact_ok = true;
  for (const OracleCheck& c : checks) {
    ss << (c.passed ? "PASS " : "FAIL ") << c.name << " kind=" << c.covariance_kind << " n=" << c.n << " d=" << c.d
       << " p=" << format_double(c.p) << " reference=" << format_double(c.reference)
       << " candidate=" << format_double(c.candidate) << " tolerance=" << format_double(c.tolerance) << '\n';
    if (c.name == "lemma1_vs_monte_carlo") {
      ++mc_total;
      if (!c.passed) ++mc_failures;
    } else if (!c.passed) {
      exact_ok = false;
    }
  }
  // Three-standard-error bands miss about 0.3% of the time; allow one miss
  // per fifteen Monte-Carlo comparisons.
  const bool ok = exact_ok && mc_failures <= mc_total / 15;
  ss << (ok ? "oracle: PASS" : "oracle: FAIL") << " (" << (mc_total - mc_failures) << "/" << mc_total
     << " Monte-Carlo comparisons within 3 SE)\n";
  RunManifest manifest;
  manifest.version = MASKRISK_VERSION;
  manifest.master_seed = opts.master_seed;
  manifest.started_at = utc_now();
  manifest.config = json{{"instances", instances}, {"draws", draws}};
  manifest.row_count = checks.size();
  deliver(o, ss.str(), manifest, out);
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Masked ridgeless regression: risk theory, simulation and oracles", "maskrisk"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", MASKRISK_VERSION);

  CommonOptions theory_o, simulate_o, r2mae_o, oracle_o, preset_o;
  auto* theory = app.add_subcommand("theory", "Limiting risk curves over the config's p-grid");
  add_common(theory, theory_o, true);
  auto* simulate = app.add_subcommand("simulate", "Masking-ratio sweep");
  add_common(simulate, simulate_o, true);
  auto* r2mae = app.add_subcommand("r2mae", "R2MAE versus fixed-ratio comparison");
  add_common(r2mae, r2mae_o, true);
  auto* oracle = app.add_subcommand("oracle", "Cross-check exact conditional risk against Monte Carlo");
  add_common(oracle, oracle_o, false);
  int instances = 30;
  long draws = 100000;
  oracle->add_option("--instances", instances, "Random instances")->check(CLI::PositiveNumber);
  oracle->add_option("--draws", draws, "Monte-Carlo draws per instance")->check(CLI::Range(100L, 1000000000L));
  auto* preset = app.add_subcommand("preset", "Print a figure/table preset config, or run it");
  add_common(preset, preset_o, false);
  std::string preset_id;
  bool preset_run = false;
  preset->add_option("id", preset_id, "Preset id")->required();
  preset->add_flag("--run", preset_run, "Run the preset instead of printing its config");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  try {
    if (theory->parsed()) return cmd_theory(theory_o, out);
    if (simulate->parsed()) {
      auto configs = load_configs(simulate_o.config_path);
      apply_seed(configs, simulate_o);
      return run_sweeps(configs, simulate_o, out, err);
    }
    if (r2mae->parsed()) {
      auto configs = load_configs(r2mae_o.config_path);
      apply_seed(configs, r2mae_o);
      for (const auto& c : configs) {
        if (c.r2mae.empty()) throw ConfigError(c.experiment_id + ": r2mae needs an R2MAE range");
      }
      return run_protocols(configs, r2mae_o, out, err);
    }
    if (oracle->parsed()) return cmd_oracle(oracle_o, instances, draws, out);
    if (preset->parsed()) {
      auto configs = figure_preset(preset_id);
      apply_seed(configs, preset_o);
      if (!preset_run) {
        json arr = json::array();
        for (const auto& c : configs) arr.push_back(config_to_json(c));
        const std::string body = arr.dump(2) + "\n";
        deliver(preset_o, body, start_manifest(configs), out);
        return kExitOk;
      }
      if (is_protocol_config(configs.front())) return run_protocols(configs, preset_o, out, err);
      return run_sweeps(configs, preset_o, out, err);
    }
  } catch (const ConfigError& e) {
    err << "maskrisk: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const Error& e) {
    err << "maskrisk: " << e.what() << '\n';
    if (e.code() == ErrorCode::InvalidSpec || e.code() == ErrorCode::UnknownPreset ||
        e.code() == ErrorCode::MissingSpike) {
      return kExitInvalidConfig;
    }
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "maskrisk: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInvalidConfig;
}

}  // namespace maskrisk::cli
