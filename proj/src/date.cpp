#include "pricecast/date.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>

namespace pricecast {

std::string Date::iso() const { return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day); }

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
  }
  Date d;
  unsigned m = 0, day = 0;
  std::from_chars(text.data(), text.data() + 4, d.year);
  std::from_chars(text.data() + 5, text.data() + 7, m);
  std::from_chars(text.data() + 8, text.data() + 10, day);
  d.month = m;
  d.day = day;
  if (!d.ymd().ok()) return std::nullopt;
  return d;
}

}  // namespace pricecast
