#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace echometrics::csv {

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

// Shortest decimal representation that round-trips.
std::string format_double(double value);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws ValidationError if absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

// Reads one numeric column; throws on a non-numeric cell.
std::vector<double> read_numeric_column(const std::filesystem::path& path,
                                        std::string_view name);

}  // namespace echometrics::csv
