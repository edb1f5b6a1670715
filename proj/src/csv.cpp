#include "echometrics/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "echometrics/error.hpp"

namespace echometrics::csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string{field};
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

std::string format_double(double value) { return fmt::format("{}", value); }

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError(fmt::format("missing column '{}'", name));
}

Table read(std::istream& in) {
  Table table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  return read(in);
}

std::vector<double> read_numeric_column(const std::filesystem::path& path,
                                        std::string_view name) {
  const Table table = read_file(path);
  const std::size_t col = table.column(name);
  std::vector<double> values;
  values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    double v = 0.0;
    const char* begin = col < row.size() ? row[col].data() : nullptr;
    const char* end = col < row.size() ? begin + row[col].size() : nullptr;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (begin == nullptr || ec != std::errc{} || ptr != end) {
      throw ValidationError(
          fmt::format("{}: row {} column '{}' is not numeric", path.string(), r + 2, name));
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace echometrics::csv
