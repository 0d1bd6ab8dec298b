#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrisk/experiments.hpp"

namespace maskrisk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidConfig = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitCheckFailed = 3;

/// Theory curves over a config's p-grid: Theorem-1 rows for identity models,
/// resolvent and spectral rows for spiked models.
std::vector<SweepRow> theory_rows(const ExperimentConfig& config);

struct RunManifest {
  std::string version;
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  std::string started_at;
  std::string finished_at;
  std::size_t row_count = 0;
  std::vector<SkipCount> skips;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

/// Entry point behind the `maskrisk` executable. `args` excludes the program
/// name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maskrisk::cli
