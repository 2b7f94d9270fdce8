// util.hpp -- errors, file IO, number formatting, RFC-4180 CSV.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens {

// Operational failure inside a pipeline stage (maps to exit code 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration or CLI usage (maps to exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Shortest round-trip decimal form, locale independent.
std::string format_double(double v);
std::string format_float(float v);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with(std::string_view s, std::string_view prefix);

// CSV with RFC-4180 quoting. Rows are terminated with '\n'.
std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Epoch seconds <-> "YYYY-MM-DDTHH:MM:SSZ" / "YYYY-MM-DD" (UTC, proleptic
// Gregorian). Parsers return false on any deviation from the fixed format.
bool parse_utc_timestamp(std::string_view s, std::int64_t* epoch_seconds);
bool parse_utc_date(std::string_view s, std::int64_t* epoch_days);
std::string format_utc_timestamp(std::int64_t epoch_seconds);
std::string format_utc_date(std::int64_t epoch_days);

}  // namespace floodlens
