#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pdsim {

/// A parsed CSV file with a header row. Fields may be quoted ("" escapes a quote).
class CsvTable {
 public:
  struct Row {
    std::size_t line = 0;  // 1-based line in the source
    std::vector<std::string> fields;
  };

  static CsvTable parse(std::string_view text, std::string label);
  static CsvTable read(const std::filesystem::path& path);

  const std::string& label() const noexcept { return label_; }
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  /// Column position by header name; throws ParseError when absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;

  const std::string& field(const Row& row, std::size_t column) const;
  double number(const Row& row, std::size_t column) const;
  /// Blank fields are missing.
  std::optional<double> optional_number(const Row& row, std::size_t column) const;
  std::int64_t integer(const Row& row, std::size_t column) const;

 private:
  std::string label_;
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

/// Shortest decimal that parses back to the same double.
std::string format_number(double value);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace pdsim
