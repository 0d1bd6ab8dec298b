#include "maskrisk_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "maskrisk/detail/overloaded.hpp"
#include "maskrisk/error.hpp"

namespace maskrisk::cli {

using nlohmann::json;
using detail::Overloaded;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string get_kind(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(where + ": missing string field '" + key + "'");
  return j.at(key).get<std::string>();
}

CovarianceSpec parse_covariance(const json& j) {
  const std::string where = "covariance";
  require_object(j, where);
  const std::string kind = get_kind(j, "kind", where);
  if (kind == "identity") {
    reject_unknown(j, {"kind"}, where);
    return IdentitySpec{};
  }
  if (kind == "spiked") {
    reject_unknown(j, {"kind", "delta", "direction", "values"}, where);
    SpikedSpec s;
    s.delta = get(j, "delta", 0.0, where);
    const std::string dir = get<std::string>(j, "direction", "uniform", where);
    if (dir == "uniform") {
      s.direction = SpikeDirection::Uniform;
    } else if (dir == "constant") {
      s.direction = SpikeDirection::Constant;
    } else if (dir == "explicit") {
      s.direction = SpikeDirection::Explicit;
    } else {
      throw ConfigError(where + ".direction: unknown value '" + dir + "'");
    }
    s.values = get(j, "values", std::vector<double>{}, where);
    return s;
  }
  if (kind == "spectrum_projected") {
    reject_unknown(j, {"kind", "spectrum"}, where);
    const std::string spectrum = get<std::string>(j, "spectrum", "uniform", where);
    if (spectrum == "uniform") return SpectrumProjectedSpec{SpectrumDistribution::Uniform};
    if (spectrum == "beta") return SpectrumProjectedSpec{SpectrumDistribution::Beta};
    throw ConfigError(where + ".spectrum: unknown value '" + spectrum + "'");
  }
  if (kind == "latent_iid") {
    reject_unknown(j, {"kind", "q"}, where);
    return LatentIidSpec{get(j, "q", 0, where)};
  }
  if (kind == "latent_structured") {
    reject_unknown(j, {"kind", "q", "eig_value"}, where);
    return LatentStructuredSpec{get(j, "q", 0, where), get(j, "eig_value", 100.0, where)};
  }
  throw ConfigError(where + ".kind: unknown value '" + kind + "'");
}

json covariance_to_json(const CovarianceSpec& spec) {
  return std::visit(
      Overloaded{
          [](const IdentitySpec&) { return json{{"kind", "identity"}}; },
          [](const SpikedSpec& s) {
            const char* dir = s.direction == SpikeDirection::Uniform    ? "uniform"
                              : s.direction == SpikeDirection::Constant ? "constant"
                                                                        : "explicit";
            json j{{"kind", "spiked"}, {"delta", s.delta}, {"direction", dir}};
            if (!s.values.empty()) j["values"] = s.values;
            return j;
          },
          [](const SpectrumProjectedSpec& s) {
            return json{{"kind", "spectrum_projected"},
                        {"spectrum", s.spectrum == SpectrumDistribution::Uniform ? "uniform" : "beta"}};
          },
          [](const LatentIidSpec& s) { return json{{"kind", "latent_iid"}, {"q", s.q}}; },
          [](const LatentStructuredSpec& s) {
            return json{{"kind", "latent_structured"}, {"q", s.q}, {"eig_value", s.eig_value}};
          },
      },
      spec);
}

SignalSpec parse_signal(const json& j) {
  const std::string where = "signal";
  require_object(j, where);
  const std::string kind = get_kind(j, "kind", where);
  if (kind == "eigenvector") {
    reject_unknown(j, {"kind", "quantile"}, where);
    return EigenvectorSignalSpec{get(j, "quantile", 1.0, where)};
  }
  if (kind == "angle") {
    reject_unknown(j, {"kind", "theta"}, where);
    return AngleSignalSpec{get(j, "theta", 0.0, where)};
  }
  if (kind == "uniform") {
    reject_unknown(j, {"kind"}, where);
    return UniformSignalSpec{};
  }
  if (kind == "latent_projected") {
    reject_unknown(j, {"kind"}, where);
    return LatentProjectedSignalSpec{};
  }
  if (kind == "explicit") {
    reject_unknown(j, {"kind", "values"}, where);
    return ExplicitSignalSpec{get(j, "values", std::vector<double>{}, where)};
  }
  throw ConfigError(where + ".kind: unknown value '" + kind + "'");
}

json signal_to_json(const SignalSpec& spec) {
  return std::visit(Overloaded{
                        [](const EigenvectorSignalSpec& s) { return json{{"kind", "eigenvector"}, {"quantile", s.quantile}}; },
                        [](const AngleSignalSpec& s) { return json{{"kind", "angle"}, {"theta", s.theta}}; },
                        [](const UniformSignalSpec&) { return json{{"kind", "uniform"}}; },
                        [](const LatentProjectedSignalSpec&) { return json{{"kind", "latent_projected"}}; },
                        [](const ExplicitSignalSpec& s) { return json{{"kind", "explicit"}, {"values", s.values}}; },
                    },
                    spec);
}

FitMethod parse_fit(const json& j) {
  const std::string where = "fit";
  require_object(j, where);
  const std::string method = get_kind(j, "method", where);
  if (method == "pseudo_inverse") {
    reject_unknown(j, {"method", "rcond"}, where);
    return PseudoInverse{get(j, "rcond", 0.0, where)};
  }
  if (method == "ridge") {
    reject_unknown(j, {"method", "lambda"}, where);
    return RidgeLimit{get(j, "lambda", 1e-6, where)};
  }
  throw ConfigError(where + ".method: unknown value '" + method + "'");
}

json fit_to_json(const FitMethod& fit) {
  return std::visit(Overloaded{
                        [](const PseudoInverse& m) { return json{{"method", "pseudo_inverse"}, {"rcond", m.rcond}}; },
                        [](const RidgeLimit& m) { return json{{"method", "ridge"}, {"lambda", m.lambda}}; },
                    },
                    fit);
}

ExperimentFlags parse_flags(const json& j) {
  const std::string where = "flags";
  require_object(j, where);
  reject_unknown(j, {"deterministic_subset", "resample_noise_per_rep", "use_sample_risk", "emit_metrics"}, where);
  ExperimentFlags f;
  f.deterministic_subset = get(j, "deterministic_subset", false, where);
  f.resample_noise_per_rep = get(j, "resample_noise_per_rep", false, where);
  f.use_sample_risk = get(j, "use_sample_risk", false, where);
  f.emit_metrics = get(j, "emit_metrics", false, where);
  return f;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  const std::string where = "config";
  require_object(j, where);
  reject_unknown(j,
                 {"experiment_id", "stream_tag", "master_seed", "seeds", "n", "d", "gamma", "sigma2", "covariance",
                  "signal", "p_grid", "fixed_schemes", "r2mae", "reps", "fit", "theory_lambda_reg", "n_test", "flags"},
                 where);
  ExperimentConfig c;
  c.experiment_id = get(j, "experiment_id", c.experiment_id, where);
  c.stream_tag = get(j, "stream_tag", c.stream_tag, where);
  c.master_seed = get(j, "master_seed", c.master_seed, where);
  c.seeds = get(j, "seeds", c.seeds, where);
  c.n = get(j, "n", c.n, where);
  if (j.contains("gamma")) {
    const double gamma = get(j, "gamma", 0.0, where);
    if (!(gamma > 0.0)) throw ConfigError("config.gamma: must be positive");
    const auto d = static_cast<int>(std::lround(gamma * c.n));
    if (j.contains("d") && get(j, "d", 0, where) != d) {
      throw ConfigError("config: 'd' and 'gamma' disagree");
    }
    c.d = d;
  } else {
    c.d = get(j, "d", c.d, where);
  }
  c.sigma2 = get(j, "sigma2", c.sigma2, where);
  if (j.contains("covariance")) c.covariance = parse_covariance(j.at("covariance"));
  if (j.contains("signal")) c.signal = parse_signal(j.at("signal"));
  c.p_grid = get(j, "p_grid", c.p_grid, where);
  c.fixed_schemes = get(j, "fixed_schemes", c.fixed_schemes, where);
  if (j.contains("r2mae")) {
    const json& list = j.at("r2mae");
    if (!list.is_array()) throw ConfigError("config.r2mae: expected an array");
    c.r2mae.clear();
    for (const json& item : list) {
      require_object(item, "r2mae");
      reject_unknown(item, {"p_min", "p_max"}, "r2mae");
      c.r2mae.push_back(R2maeMask{get(item, "p_min", 0.0, "r2mae"), get(item, "p_max", 0.0, "r2mae")});
    }
  }
  c.reps = get(j, "reps", c.reps, where);
  if (j.contains("fit")) c.fit = parse_fit(j.at("fit"));
  c.theory_lambda_reg = get(j, "theory_lambda_reg", c.theory_lambda_reg, where);
  c.n_test = get(j, "n_test", c.n_test, where);
  if (j.contains("flags")) c.flags = parse_flags(j.at("flags"));

  try {
    validate(c);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment_id"] = c.experiment_id;
  if (!c.stream_tag.empty()) j["stream_tag"] = c.stream_tag;
  j["master_seed"] = c.master_seed;
  if (!c.seeds.empty()) j["seeds"] = c.seeds;
  j["n"] = c.n;
  j["d"] = c.d;
  j["sigma2"] = c.sigma2;
  j["covariance"] = covariance_to_json(c.covariance);
  j["signal"] = signal_to_json(c.signal);
  j["p_grid"] = c.p_grid;
  j["fixed_schemes"] = c.fixed_schemes;
  j["r2mae"] = json::array();
  for (const auto& r : c.r2mae) j["r2mae"].push_back(json{{"p_min", r.p_min}, {"p_max", r.p_max}});
  j["reps"] = c.reps;
  j["fit"] = fit_to_json(c.fit);
  j["theory_lambda_reg"] = c.theory_lambda_reg;
  j["n_test"] = c.n_test;
  j["flags"] = json{{"deterministic_subset", c.flags.deterministic_subset},
                    {"resample_noise_per_rep", c.flags.resample_noise_per_rep},
                    {"use_sample_risk", c.flags.use_sample_risk},
                    {"emit_metrics", c.flags.emit_metrics}};
  return j;
}

std::vector<ExperimentConfig> configs_from_json(const json& j) {
  std::vector<ExperimentConfig> out;
  if (j.is_array()) {
    for (const json& item : j) out.push_back(config_from_json(item));
  } else {
    out.push_back(config_from_json(j));
  }
  if (out.empty()) throw ConfigError("config: empty array");
  return out;
}

std::vector<ExperimentConfig> load_configs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return configs_from_json(j);
}

}  // namespace maskrisk::cli
