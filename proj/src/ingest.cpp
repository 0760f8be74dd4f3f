#include "pricecast/ingest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "pricecast/csv.hpp"
#include "pricecast/error.hpp"

namespace pricecast {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError(fmt::format("malformed number '{}'", text));
  }
  return value;
}

// Per-row failure that maps onto a DropReport reason.
struct RowReject {
  std::string reason;
};

class RowReader {
 public:
  RowReader(const std::vector<std::string>& row, std::size_t row_number) : row_(row), row_number_(row_number) {}

  std::string_view text(std::size_t col) const { return trim(row_[col]); }

  std::optional<double> number(std::size_t col) const {
    try {
      return parse_decimal(row_[col]);
    } catch (const ParseError&) {
      throw RowReject{"malformed"};
    }
  }

  double required_number(std::size_t col) const {
    auto v = number(col);
    if (!v) throw RowReject{"missing_value"};
    return *v;
  }

  int required_count(std::size_t col) const {
    const double v = required_number(col);
    if (v != std::floor(v) || v < 0 || v > 1e9) throw RowReject{"malformed"};
    return static_cast<int>(v);
  }

  std::optional<double> money(std::size_t col) const {
    try {
      return parse_money(row_[col], row_number_, std::to_string(col));
    } catch (const ParseError&) {
      throw RowReject{"malformed"};
    }
  }

  std::size_t row_number() const { return row_number_; }

 private:
  const std::vector<std::string>& row_;
  std::size_t row_number_;
};

struct ListingColumns {
  std::size_t id, price, bedrooms, bathrooms, accommodates, cleaning_fee, security_deposit, extra_people,
      room_type, zipcode, latitude, longitude, av30, av60, av90, av365;
  std::optional<std::size_t> neighborhood, snapshot_date, city;
};

ListingColumns resolve_columns(const CsvTable& table, const ListingSchema& schema) {
  std::vector<std::string> missing;
  auto need = [&](const std::string& logical) -> std::size_t {
    auto idx = table.column_index(schema.column(logical));
    if (!idx) {
      missing.push_back(schema.column(logical));
      return 0;
    }
    return *idx;
  };
  ListingColumns c{};
  c.id = need("id");
  c.price = need("price");
  c.bedrooms = need("bedrooms");
  c.bathrooms = need("bathrooms");
  c.accommodates = need("accommodates");
  c.cleaning_fee = need("cleaning_fee");
  c.security_deposit = need("security_deposit");
  c.extra_people = need("extra_people");
  c.room_type = need("room_type");
  c.zipcode = need("zipcode");
  c.latitude = need("latitude");
  c.longitude = need("longitude");
  c.av30 = need("availability_30");
  c.av60 = need("availability_60");
  c.av90 = need("availability_90");
  c.av365 = need("availability_365");
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw SchemaError(fmt::format("listings file is missing required columns: {}", names));
  }
  c.neighborhood = table.column_index(schema.column("neighborhood"));
  c.snapshot_date = table.column_index(schema.column("snapshot_date"));
  c.city = table.column_index(schema.column("city"));
  return c;
}

ListingRecord read_listing(const RowReader& r, const ListingColumns& c) {
  ListingRecord rec;
  const auto id = r.number(c.id);
  if (!id) throw RowReject{"missing_id"};
  if (*id != std::floor(*id)) throw RowReject{"malformed"};
  rec.listing_id = static_cast<std::int64_t>(*id);

  const auto price = r.money(c.price);
  if (!price) throw RowReject{"missing_value"};
  if (*price < 0) throw RowReject{"negative_price"};
  rec.price = *price;

  rec.bedrooms = r.required_count(c.bedrooms);
  rec.bathrooms = r.required_number(c.bathrooms);
  if (rec.bathrooms < 0) throw RowReject{"malformed"};
  rec.accommodates = r.required_count(c.accommodates);
  rec.cleaning_fee = r.money(c.cleaning_fee);
  rec.security_deposit = r.money(c.security_deposit);
  rec.extra_people = r.money(c.extra_people);

  rec.room_type = std::string(r.text(c.room_type));
  rec.zipcode = normalize_zipcode(r.text(c.zipcode));
  if (rec.room_type.empty() || rec.zipcode.empty()) throw RowReject{"missing_value"};
  if (c.neighborhood) {
    auto n = r.text(*c.neighborhood);
    if (!n.empty()) rec.neighborhood = std::string(n);
  }

  rec.latitude = r.required_number(c.latitude);
  rec.longitude = r.required_number(c.longitude);
  if (rec.latitude < -90 || rec.latitude > 90) throw RowReject{"lat_range"};
  if (rec.longitude < -180 || rec.longitude > 180) throw RowReject{"lon_range"};

  const std::pair<std::size_t, int> windows[] = {{c.av30, 30}, {c.av60, 60}, {c.av90, 90}, {c.av365, 365}};
  int* targets[] = {&rec.availability_30, &rec.availability_60, &rec.availability_90, &rec.availability_365};
  for (int i = 0; i < 4; ++i) {
    const int days = r.required_count(windows[i].first);
    if (days > windows[i].second) throw RowReject{"availability_range"};
    *targets[i] = days;
  }

  if (c.snapshot_date) {
    auto t = r.text(*c.snapshot_date);
    if (!t.empty()) {
      rec.snapshot_date = parse_iso_date(t);
      if (!rec.snapshot_date) throw RowReject{"bad_date"};
    }
  }
  if (c.city) rec.city = std::string(r.text(*c.city));
  return rec;
}

}  // namespace

int ListingRecord::availability(int window) const {
  switch (window) {
    case 30: return availability_30;
    case 60: return availability_60;
    case 90: return availability_90;
    case 365: return availability_365;
    default: throw DomainError(fmt::format("availability window must be 30, 60, 90 or 365, got {}", window));
  }
}

std::size_t DropReport::total() const {
  std::size_t t = 0;
  for (const auto& [_, n] : counts) t += n;
  return t;
}

std::size_t DropReport::count(const std::string& reason) const {
  auto it = counts.find(reason);
  return it == counts.end() ? 0 : it->second;
}

void DropReport::merge(const DropReport& other) {
  for (const auto& [reason, n] : other.counts) counts[reason] += n;
}

std::string ListingSchema::column(const std::string& logical) const {
  auto it = remap.find(logical);
  return it == remap.end() ? logical : it->second;
}

const std::vector<std::string>& required_listing_columns() {
  static const std::vector<std::string> cols = {
      "id",           "price",     "bedrooms",  "bathrooms",       "accommodates",    "cleaning_fee",
      "security_deposit", "extra_people", "room_type", "zipcode", "latitude",       "longitude",
      "availability_30",  "availability_60", "availability_90", "availability_365"};
  return cols;
}

std::optional<double> parse_money(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::string cleaned;
  std::size_t start = 0;
  if (text.front() == '$') start = 1;
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text[i] != ',') cleaned.push_back(text[i]);
  }
  if (cleaned.empty()) throw ParseError(fmt::format("malformed money value '{}'", text));
  try {
    return parse_decimal(cleaned);
  } catch (const ParseError&) {
    throw ParseError(fmt::format("malformed money value '{}'", text));
  }
}

std::optional<double> parse_money(std::string_view text, std::size_t row, std::string_view column) {
  try {
    return parse_money(text);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("row {}, column '{}': {}", row, column, e.what()));
  }
}

std::string normalize_zipcode(std::string_view text) {
  text = trim(text);
  if (text.size() > 5) text = text.substr(0, 5);
  return std::string(text);
}

LoadResult<ListingRecord> load_listings(const std::filesystem::path& path, const ListingSchema& schema) {
  const CsvTable table = read_csv(path);
  const ListingColumns cols = resolve_columns(table, schema);
  LoadResult<ListingRecord> out;
  out.records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    try {
      out.records.push_back(read_listing(RowReader(table.rows[i], i + 1), cols));
    } catch (const RowReject& reject) {
      out.drops.add(reject.reason);
    }
  }
  return out;
}

LoadResult<CalendarEntry> load_calendar(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<std::string> missing;
  auto need = [&](const char* name) {
    auto idx = table.column_index(name);
    if (!idx) missing.emplace_back(name);
    return idx.value_or(0);
  };
  const std::size_t id_col = need("listing_id");
  const std::size_t date_col = need("date");
  const std::size_t avail_col = need("available");
  const std::size_t price_col = need("price");
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw SchemaError(fmt::format("calendar file is missing required columns: {}", names));
  }

  LoadResult<CalendarEntry> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const RowReader r(table.rows[i], i + 1);
    try {
      CalendarEntry e;
      const auto id = r.number(id_col);
      if (!id) throw RowReject{"missing_id"};
      e.listing_id = static_cast<std::int64_t>(*id);
      const auto date = parse_iso_date(r.text(date_col));
      if (!date) throw RowReject{"bad_date"};
      e.date = *date;
      const auto flag = r.text(avail_col);
      if (flag == "t") {
        e.available = true;
      } else if (flag == "f") {
        e.available = false;
      } else {
        throw RowReject{"bad_flag"};
      }
      e.price = r.money(price_col);
      if (e.price && *e.price < 0) throw RowReject{"negative_price"};
      out.records.push_back(e);
    } catch (const RowReject& reject) {
      out.drops.add(reject.reason);
    }
  }
  return out;
}

void write_listings(const std::filesystem::path& path, const std::vector<ListingRecord>& records) {
  CsvTable table;
  table.header = required_listing_columns();
  table.header.insert(table.header.end(), {"neighborhood", "snapshot_date", "city"});
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : records) {
    table.rows.push_back({std::to_string(r.listing_id), format_double(r.price), std::to_string(r.bedrooms),
                          format_double(r.bathrooms), std::to_string(r.accommodates), opt(r.cleaning_fee),
                          opt(r.security_deposit), opt(r.extra_people), r.room_type, r.zipcode,
                          format_double(r.latitude), format_double(r.longitude), std::to_string(r.availability_30),
                          std::to_string(r.availability_60), std::to_string(r.availability_90),
                          std::to_string(r.availability_365), r.neighborhood.value_or(""),
                          r.snapshot_date ? r.snapshot_date->iso() : "", r.city});
  }
  write_csv(path, table);
}

}  // namespace pricecast
