#include "maskrisk_cli/csv.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maskrisk::cli {

using nlohmann::json;

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> columns = {
      "experiment_id", "seed",    "covariance_kind", "n",        "d",    "gamma",
      "sigma2",        "scheme_tag", "p_min",        "p_max",    "rep",  "n_targets",
      "risk",          "risk_normalized", "bias",    "variance", "erank", "magnitude_ratio",
      "theory_risk"};
  return columns;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string cell(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::runtime_error("bad CSV number '" + s + "'");
  return value;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_number<double>(s);
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  const auto& cols = sweep_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const SweepRow& r : rows) {
    out << r.experiment_id << ',' << r.seed << ',' << r.covariance_kind << ',' << r.n << ',' << r.d << ','
        << format_double(r.gamma) << ',' << format_double(r.sigma2) << ',' << r.scheme_tag << ',' << cell(r.p_min)
        << ',' << cell(r.p_max) << ',' << r.rep << ',' << r.n_targets << ',' << format_double(r.risk) << ','
        << format_double(r.risk_normalized) << ',' << cell(r.bias) << ',' << cell(r.variance) << ',' << cell(r.erank)
        << ',' << cell(r.magnitude_ratio) << ',' << cell(r.theory_risk) << '\n';
  }
}

std::vector<SweepRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  if (split(line) != sweep_columns()) throw std::runtime_error("unexpected CSV header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != sweep_columns().size()) throw std::runtime_error("wrong number of CSV fields");
    SweepRow r;
    r.experiment_id = f[0];
    r.seed = parse_number<std::uint64_t>(f[1]);
    r.covariance_kind = f[2];
    r.n = parse_number<int>(f[3]);
    r.d = parse_number<int>(f[4]);
    r.gamma = parse_number<double>(f[5]);
    r.sigma2 = parse_number<double>(f[6]);
    r.scheme_tag = f[7];
    r.p_min = parse_optional(f[8]);
    r.p_max = parse_optional(f[9]);
    r.rep = parse_number<int>(f[10]);
    r.n_targets = parse_number<int>(f[11]);
    r.risk = parse_number<double>(f[12]);
    r.risk_normalized = parse_number<double>(f[13]);
    r.bias = parse_optional(f[14]);
    r.variance = parse_optional(f[15]);
    r.erank = parse_optional(f[16]);
    r.magnitude_ratio = parse_optional(f[17]);
    r.theory_risk = parse_optional(f[18]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out) {
  out << "experiment_id,seed,covariance_kind,best_p,best_risk,mid_p,mid_risk,r2mae_p_min,r2mae_p_max,r2mae_risk\n";
  for (const ComparisonRow& r : rows) {
    out << r.experiment_id << ',' << r.seed << ',' << r.covariance_kind << ',' << format_double(r.best_p) << ','
        << format_double(r.best_risk) << ',' << format_double(r.mid_p) << ',' << format_double(r.mid_risk) << ','
        << format_double(r.r2mae_p_min) << ',' << format_double(r.r2mae_p_max) << ',' << format_double(r.r2mae_risk)
        << '\n';
  }
}

json rows_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const SweepRow& r : rows) {
    out.push_back(json{{"experiment_id", r.experiment_id},
                       {"seed", r.seed},
                       {"covariance_kind", r.covariance_kind},
                       {"n", r.n},
                       {"d", r.d},
                       {"gamma", r.gamma},
                       {"sigma2", r.sigma2},
                       {"scheme_tag", r.scheme_tag},
                       {"p_min", optional_json(r.p_min)},
                       {"p_max", optional_json(r.p_max)},
                       {"rep", r.rep},
                       {"n_targets", r.n_targets},
                       {"risk", r.risk},
                       {"risk_normalized", r.risk_normalized},
                       {"bias", optional_json(r.bias)},
                       {"variance", optional_json(r.variance)},
                       {"erank", optional_json(r.erank)},
                       {"magnitude_ratio", optional_json(r.magnitude_ratio)},
                       {"theory_risk", optional_json(r.theory_risk)}});
  }
  return out;
}

json comparisons_to_json(const std::vector<ComparisonRow>& rows) {
  json out = json::array();
  for (const ComparisonRow& r : rows) {
    json curve = json::array();
    for (const auto& [p, risk] : r.fixed_curve) curve.push_back(json::array({p, risk}));
    out.push_back(json{{"experiment_id", r.experiment_id},
                       {"seed", r.seed},
                       {"covariance_kind", r.covariance_kind},
                       {"best_p", r.best_p},
                       {"best_risk", r.best_risk},
                       {"mid_p", r.mid_p},
                       {"mid_risk", r.mid_risk},
                       {"r2mae_p_min", r.r2mae_p_min},
                       {"r2mae_p_max", r.r2mae_p_max},
                       {"r2mae_risk", r.r2mae_risk},
                       {"fixed_curve", curve}});
  }
  return out;
}

}  // namespace maskrisk::cli
