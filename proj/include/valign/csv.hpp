#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace valign::csv {

struct Row {
  std::size_t line = 0;  // 1-based line of the row's first physical line
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of a header column; throws ValidationError when absent.
  std::size_t column(std::string_view name, std::string_view file = {}) const;
};

/// RFC 4180 parsing: quoted fields, doubled quotes, embedded newlines.
Table parse(std::string_view text, const std::string& file_label = "<memory>");
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace valign::csv
