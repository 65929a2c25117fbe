#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scene/survival.hpp"

namespace scene::io {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Strict full-string parse; throws ErrorKind::parse mentioning `what`.
double parse_double(std::string_view text, std::string_view what);
long parse_long(std::string_view text, std::string_view what);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Dataset CSV: header `time,event,x1,...,xp`.
Dataset parse_dataset_csv(std::string_view text);
std::string dataset_to_csv(const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& data, const std::filesystem::path& path);

/// Two-column numeric CSV with the given header (e.g. `t,s`).
struct Series {
  std::vector<double> x;
  std::vector<double> y;
};
Series parse_series_csv(std::string_view text, std::string_view expected_header);
std::string series_to_csv(const Series& series, std::string_view header);

}  // namespace scene::io
