#include "valign/csv.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "valign/errors.hpp"
#include "valign/io.hpp"

namespace valign::csv {

std::size_t Table::column(std::string_view name, std::string_view file) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError(fmt::format("{}: missing column '{}'", file.empty() ? "<csv>" : file, name));
}

Table parse(std::string_view text, const std::string& file_label) {
  Table table;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t row_start_line = 1;
  bool have_header = false;

  // Strip UTF-8 BOM.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  auto end_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
    const bool blank = fields.size() == 1 && fields[0].empty();
    if (!blank) {
      if (!have_header) {
        table.header = std::move(fields);
        have_header = true;
      } else {
        if (fields.size() != table.header.size()) {
          throw ParseError(file_label, row_start_line,
                           fmt::format("expected {} fields, found {}", table.header.size(), fields.size()));
        }
        table.rows.push_back(Row{row_start_line, std::move(fields)});
      }
    }
    fields.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw ParseError(file_label, line, "unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_start_line = line;
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(file_label, row_start_line, "unterminated quoted field");
  if (!field.empty() || !fields.empty()) end_row();
  if (!have_header) throw ParseError(file_label, 1, "empty file (no header row)");
  return table;
}

Table read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("missing file: " + path.string());
  return parse(io::read_text(path), path.string());
}

std::string escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  return fmt::format("{}", value);
}

}  // namespace valign::csv
