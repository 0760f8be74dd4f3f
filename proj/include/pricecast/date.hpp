#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace pricecast {

/// Calendar date (proleptic Gregorian), ISO-8601 text form YYYY-MM-DD.
struct Date {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  auto operator<=>(const Date&) const = default;

  std::chrono::year_month_day ymd() const {
    return std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day};
  }

  /// 0 = Sunday ... 6 = Saturday.
  unsigned weekday() const { return std::chrono::weekday{std::chrono::sys_days{ymd()}}.c_encoding(); }

  std::string iso() const;
};

/// Strict YYYY-MM-DD parse; returns nullopt on any malformed or impossible date.
std::optional<Date> parse_iso_date(std::string_view text);

}  // namespace pricecast
