#include "pdsim/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pdsim/error.hpp"

namespace pdsim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(std::string_view line, const std::string& label,
                                    std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(label, line_no, fields.size() + 1, "unterminated quoted field");
  fields.push_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

}  // namespace

CsvTable CsvTable::parse(std::string_view text, std::string label) {
  CsvTable table;
  table.label_ = std::move(label);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    auto fields = split_line(line, table.label_, line_no);
    if (!have_header) {
      table.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header_.size()) {
      throw ParseError(table.label_, line_no, std::min(fields.size(), table.header_.size()) + 1,
                       "expected " + std::to_string(table.header_.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    table.rows_.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw ParseError(table.label_, 1, 1, "missing header row");
  return table;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw ParseError(label_, 1, header_.size() + 1, "missing column '" + std::string(name) + "'");
}

const std::string& CsvTable::field(const Row& row, std::size_t column) const {
  return row.fields.at(column);
}

double CsvTable::number(const Row& row, std::size_t column) const {
  if (auto v = optional_number(row, column)) return *v;
  throw ParseError(label_, row.line, column + 1, "empty value in column '" + header_[column] + "'");
}

std::optional<double> CsvTable::optional_number(const Row& row, std::size_t column) const {
  const std::string& text = row.fields.at(column);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError(label_, row.line, column + 1,
                     "malformed number '" + text + "' in column '" + header_[column] + "'");
  }
  return value;
}

std::int64_t CsvTable::integer(const Row& row, std::size_t column) const {
  const std::string& text = row.fields.at(column);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(label_, row.line, column + 1,
                     "malformed integer '" + text + "' in column '" + header_[column] + "'");
  }
  return value;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace pdsim
