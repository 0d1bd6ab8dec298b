#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

#ifdef MASKRISK_HAVE_CLI
#include "maskrisk_cli/config.hpp"
#include "maskrisk_cli/csv.hpp"
#include "maskrisk_cli/run.hpp"

using namespace maskrisk;
using namespace maskrisk::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "maskrisk_unit";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("theory example row") {
    const fs::path cfg = write_temp("iso.json", R"({"n": 200, "gamma": 5, "sigma2": 0, "p_grid": [0.5]})");
    const Result r = invoke({"theory", "--config", cfg.string()});
    CHECK(r.code == kExitOk);
    std::istringstream in(r.out);
    const auto rows = parse_csv(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].scheme_tag == "isotropic");
    // 91/90 evaluated in double precision; its 17-digit rendering is
    // 1.0111111111111111 and the next double up is 1.0111111111111112.
    CHECK(std::abs(rows[0].risk_normalized - 91.0 / 90.0) <= 2.3e-16);
    CHECK(r.out.find(",1.011111111111111") != std::string::npos);
  }

  TEST_CASE("spiked theory rows agree across paths") {
    const fs::path cfg = write_temp("spiked.json", R"({"n": 60, "d": 300, "p_grid": [0.3, 0.6],
      "covariance": {"kind": "spiked", "delta": 10}, "signal": {"kind": "angle", "theta": 0.5}})");
    const Result r = invoke({"theory", "--config", cfg.string()});
    REQUIRE(r.code == kExitOk);
    std::istringstream in(r.out);
    const auto rows = parse_csv(in);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].scheme_tag == "spiked");
    CHECK(rows[1].scheme_tag == "spectral");
    CHECK(std::abs(rows[0].risk_normalized - rows[1].risk_normalized) < 1e-8);
  }

  TEST_CASE("theory refuses other covariance kinds") {
    const fs::path cfg = write_temp("latent.json", R"({"n": 20, "d": 40, "covariance": {"kind": "latent_iid", "q": 4}})");
    CHECK(invoke({"theory", "--config", cfg.string()}).code == kExitInvalidConfig);
  }

  TEST_CASE("preset fig1a prints two configs") {
    const Result r = invoke({"preset", "fig1a"});
    REQUIRE(r.code == kExitOk);
    const auto configs = configs_from_json(nlohmann::json::parse(r.out));
    REQUIRE(configs.size() == 2);
    CHECK(configs == figure_preset("fig1a"));
  }

  TEST_CASE("simulate output is byte-identical across thread counts") {
    const fs::path cfg = write_temp("sim.json", R"({"experiment_id": "sim", "n": 30, "d": 60, "reps": 3,
      "p_grid": [0.3, 0.7], "covariance": {"kind": "spiked", "delta": 5}, "signal": {"kind": "angle", "theta": 1.0},
      "flags": {"emit_metrics": true}})");
    const Result one = invoke({"simulate", "--config", cfg.string(), "--seed", "7", "--threads", "1"});
    const Result eight = invoke({"simulate", "--config", cfg.string(), "--seed", "7", "--threads", "8"});
    REQUIRE(one.code == kExitOk);
    CHECK(one.out == eight.out);
    CHECK(one.out.find("\nsim,7,spiked,") != std::string::npos);
    const Result other = invoke({"simulate", "--config", cfg.string(), "--seed", "8"});
    CHECK(other.out != one.out);
  }

  TEST_CASE("--out writes the file and a manifest") {
    const fs::path cfg = write_temp("out.json", R"({"experiment_id": "o", "n": 20, "d": 30, "reps": 2, "p_grid": [0.5]})");
    const fs::path out = fs::temp_directory_path() / "maskrisk_unit" / "o.csv";
    const Result r = invoke({"simulate", "--config", cfg.string(), "--out", out.string(), "--format", "csv"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.empty());
    std::ifstream in(out);
    const auto rows = parse_csv(in);
    CHECK(rows.size() == 3);
    std::ifstream mf(out.string() + ".manifest.json");
    const auto manifest = nlohmann::json::parse(mf);
    CHECK(manifest.at("row_count") == 3);
    CHECK(config_from_json(manifest.at("config")) == load_configs(cfg).front());
    CHECK(!manifest.at("started_at").get<std::string>().empty());
  }

  TEST_CASE("json format") {
    const fs::path cfg = write_temp("j.json", R"({"n": 200, "gamma": 5, "p_grid": [0.5]})");
    const Result r = invoke({"theory", "--config", cfg.string(), "--format", "json"});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("rows").size() == 1);
  }

  TEST_CASE("invalid configs exit 1") {
    const fs::path typo = write_temp("typo.json", R"({"n": 20, "d": 30, "repz": 3})");
    CHECK(invoke({"simulate", "--config", typo.string()}).code == kExitInvalidConfig);
    const fs::path nested = write_temp("nested.json", R"({"covariance": {"kind": "spiked", "delta": 1, "dleta": 2}})");
    CHECK(invoke({"simulate", "--config", nested.string()}).code == kExitInvalidConfig);
    const fs::path bad = write_temp("bad.json", R"({"reps": 0})");
    CHECK(invoke({"simulate", "--config", bad.string()}).code == kExitInvalidConfig);
    const fs::path conflict = write_temp("conflict.json", R"({"n": 10, "d": 30, "gamma": 2})");
    CHECK(invoke({"theory", "--config", conflict.string()}).code == kExitInvalidConfig);
    CHECK(invoke({"simulate", "--config", "/nonexistent/x.json"}).code == kExitInvalidConfig);
    CHECK(invoke({"bogus"}).code == kExitInvalidConfig);
    CHECK(invoke({"simulate"}).code == kExitInvalidConfig);
  }

  TEST_CASE("numerical failures exit 2") {
    const fs::path cfg = write_temp("skip.json", R"({"n": 10, "d": 20, "reps": 4, "p_grid": [0.0]})");
    CHECK(invoke({"simulate", "--config", cfg.string()}).code == kExitNumerical);
  }

  TEST_CASE("seed precedence: flag over environment over config") {
    const fs::path cfg = write_temp("seed.json", R"({"master_seed": 3, "n": 20, "d": 30, "reps": 1, "p_grid": [0.5]})");
    const auto seed_of = [](const std::string& csv) {
      std::istringstream in(csv);
      return parse_csv(in).front().seed;
    };
    ::unsetenv("MASKRISK_SEED");
    CHECK(seed_of(invoke({"simulate", "--config", cfg.string()}).out) == 3);
    ::setenv("MASKRISK_SEED", "11", 1);
    CHECK(seed_of(invoke({"simulate", "--config", cfg.string()}).out) == 11);
    CHECK(seed_of(invoke({"simulate", "--config", cfg.string(), "--seed", "5"}).out) == 5);
    ::setenv("MASKRISK_SEED", "abc", 1);
    CHECK(invoke({"simulate", "--config", cfg.string()}).code == kExitInvalidConfig);
    ::unsetenv("MASKRISK_SEED");
  }

  TEST_CASE("oracle subcommand") {
    const Result r = invoke({"oracle", "--instances", "3", "--draws", "2000", "--seed", "1"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("oracle: PASS") != std::string::npos);
  }

  TEST_CASE("config round trip on every preset") {
    for (const auto& id : preset_ids()) {
      for (const auto& c : figure_preset(id)) {
        const ExperimentConfig back = config_from_json(config_to_json(c));
        CHECK(back == c);
      }
    }
  }

  TEST_CASE("csv formatting and round trip") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.10000000000000001");
    SweepRow row;
    row.experiment_id = "x";
    row.scheme_tag = "fixed";
    row.p_min = 0.3;
    row.p_max = 0.3;
    row.n_targets = 3;
    row.risk = 1.0;
    row.risk_normalized = 1.0 / 3.0;
    std::ostringstream one;
    emit_csv({row}, one);
    const std::string text = one.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);

    Rng rng(1);
    std::vector<SweepRow> rows;
    for (int i = 0; i < 20; ++i) {
      SweepRow r = row;
      r.seed = rng.next_u64();
      r.rep = i;
      r.risk = std::exp(rng.normal() * 20);
      r.risk_normalized = rng.uniform();
      if (i % 2) r.bias = rng.normal();
      if (i % 3) r.variance = 1e-300 * rng.uniform();
      if (i % 5) r.erank = rng.uniform(1, 100);
      if (i % 7) r.magnitude_ratio = rng.uniform();
      if (i % 4) r.theory_risk = std::nextafter(1.0, 2.0);
      rows.push_back(r);
    }
    std::ostringstream out;
    emit_csv(rows, out);
    std::istringstream in(out.str());
    CHECK(parse_csv(in) == rows);
  }
}
#endif
