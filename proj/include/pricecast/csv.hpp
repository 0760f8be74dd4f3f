#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pricecast {

/// Parsed RFC-4180 document: header row plus data rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column_index(std::string_view name) const;
};

/// Parses quoted fields, doubled quotes, embedded newlines, and CRLF endings.
/// A trailing empty line is ignored. Rows whose field count differs from the
/// header raise ParseError naming the 1-based data row.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Round-trip decimal form (17 significant digits).
std::string format_double(double value);

}  // namespace pricecast
