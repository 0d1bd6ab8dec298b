#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrisk/experiments.hpp"

namespace maskrisk::cli {

/// Column order of the sweep CSV.
const std::vector<std::string>& sweep_columns();

/// Shortest form with 17 significant digits ("%.17g"); "1" for 1.0.
std::string format_double(double x);

/// Header plus one line per row, '\n' line endings, empty cells for absent
/// optionals.
void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out);

/// Inverse of emit_csv. Throws std::runtime_error on malformed input.
std::vector<SweepRow> parse_csv(std::istream& in);

void emit_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out);

nlohmann::json rows_to_json(const std::vector<SweepRow>& rows);
nlohmann::json comparisons_to_json(const std::vector<ComparisonRow>& rows);

}  // namespace maskrisk::cli
