#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pricecast/date.hpp"

namespace pricecast {

/// One cleaned listing snapshot row.
struct ListingRecord {
  std::int64_t listing_id = 0;
  double price = 0.0;  // USD per night
  int bedrooms = 0;
  double bathrooms = 0.0;
  int accommodates = 0;
  std::optional<double> cleaning_fee;
  std::optional<double> security_deposit;
  std::optional<double> extra_people;
  std::string room_type;
  std::string zipcode;
  std::optional<std::string> neighborhood;
  double latitude = 0.0;
  double longitude = 0.0;
  int availability_30 = 0;
  int availability_60 = 0;
  int availability_90 = 0;
  int availability_365 = 0;
  std::optional<Date> snapshot_date;
  std::string city;

  bool operator==(const ListingRecord&) const = default;

  /// Days available in the given window (30, 60, 90 or 365).
  int availability(int window) const;
};

struct CalendarEntry {
  std::int64_t listing_id = 0;
  Date date;
  bool available = false;
  std::optional<double> price;

  bool operator==(const CalendarEntry&) const = default;
};

/// Rows dropped during loading, keyed by reason.
struct DropReport {
  std::map<std::string, std::size_t> counts;

  void add(const std::string& reason, std::size_t n = 1) { counts[reason] += n; }
  std::size_t total() const;
  std::size_t count(const std::string& reason) const;
  void merge(const DropReport& other);
};

template <typename Record>
struct LoadResult {
  std::vector<Record> records;
  DropReport drops;
};

/// Logical column name -> CSV header name. Unmapped names are looked up verbatim.
struct ListingSchema {
  std::map<std::string, std::string> remap;

  std::string column(const std::string& logical) const;
};

/// Columns every listings file must carry.
const std::vector<std::string>& required_listing_columns();

/// Strips a leading "$" and "," separators. Blank text is absent.
/// Throws ParseError on anything else that is not a decimal number.
std::optional<double> parse_money(std::string_view text);
/// As above; the error message names the 1-based data row and the column.
std::optional<double> parse_money(std::string_view text, std::size_t row, std::string_view column);

/// Trims whitespace; keeps the first five characters of longer codes ("94103-1234" -> "94103").
std::string normalize_zipcode(std::string_view text);

LoadResult<ListingRecord> load_listings(const std::filesystem::path& path, const ListingSchema& schema = {});
LoadResult<CalendarEntry> load_calendar(const std::filesystem::path& path);

/// Writes records using the default column names; load_listings reads them back unchanged.
void write_listings(const std::filesystem::path& path, const std::vector<ListingRecord>& records);

}  // namespace pricecast
