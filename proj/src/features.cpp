#include "pricecast/features.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pricecast/error.hpp"
#include "pricecast/rng.hpp"

namespace pricecast {

double log1p_transform(double x) {
  if (!(x >= 0.0)) throw DomainError(fmt::format("log1p_transform: input must be >= 0, got {}", x));
  return std::log1p(x);
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw NumericError("quantile of empty sample");
  if (q < 0.0 || q > 1.0) throw DomainError(fmt::format("quantile fraction {} outside [0, 1]", q));
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

LoadResult<ListingRecord> filter_outliers(std::span<const ListingRecord> records, const OutlierRules& rules) {
  if (!(rules.price_upper_quantile > 0.5 && rules.price_upper_quantile <= 1.0)) {
    throw DomainError(fmt::format("price_upper_quantile must lie in (0.5, 1], got {}", rules.price_upper_quantile));
  }
  LoadResult<ListingRecord> out;
  if (records.empty()) return out;
  std::vector<double> prices;
  prices.reserve(records.size());
  for (const auto& r : records) prices.push_back(r.price);
  const double cap = empirical_quantile(std::move(prices), rules.price_upper_quantile);
  for (const auto& r : records) {
    if (r.price > cap) {
      out.drops.add("price_quantile");
    } else if (r.bedrooms > rules.max_bedrooms) {
      out.drops.add("bedrooms");
    } else {
      out.records.push_back(r);
    }
  }
  return out;
}

std::optional<double> numeric_field(const ListingRecord& r, const std::string& name) {
  if (name == "price") return r.price;
  if (name == "bedrooms") return r.bedrooms;
  if (name == "bathrooms") return r.bathrooms;
  if (name == "accommodates") return r.accommodates;
  if (name == "cleaning_fee") return r.cleaning_fee;
  if (name == "security_deposit") return r.security_deposit;
  if (name == "extra_people") return r.extra_people;
  if (name == "latitude") return r.latitude;
  if (name == "longitude") return r.longitude;
  if (name == "availability_30") return r.availability_30;
  if (name == "availability_60") return r.availability_60;
  if (name == "availability_90") return r.availability_90;
  if (name == "availability_365") return r.availability_365;
  throw SchemaError(fmt::format("unknown numeric column '{}'", name));
}

std::optional<std::string> categorical_field(const ListingRecord& r, const std::string& name) {
  if (name == "room_type") return r.room_type;
  if (name == "zipcode") return r.zipcode;
  if (name == "neighborhood") return r.neighborhood;
  if (name == "city") return r.city;
  throw SchemaError(fmt::format("unknown categorical column '{}'", name));
}

namespace {

bool is_fee(const std::string& name) {
  return name == "cleaning_fee" || name == "security_deposit" || name == "extra_people";
}

}  // namespace

std::vector<std::string> EncodingSpec::column_names() const {
  std::vector<std::string> names;
  for (const auto& c : numeric_columns) names.push_back(c.transform == Transform::log1p ? "log1p_" + c.name : c.name);
  if (include_month) names.emplace_back("month");
  for (const auto& c : categorical_columns) {
    for (const auto& v : c.vocabulary) names.push_back(c.name + "=" + v);
    names.push_back(c.name + "=" + kOtherCategory);
  }
  return names;
}

std::size_t EncodingSpec::width() const {
  std::size_t w = numeric_columns.size() + (include_month ? 1 : 0);
  for (const auto& c : categorical_columns) w += c.vocabulary.size() + 1;
  return w;
}

bool EncodingSpec::operator==(const EncodingSpec& o) const {
  return numeric_columns == o.numeric_columns && categorical_columns == o.categorical_columns &&
         outlier_rules.price_upper_quantile == o.outlier_rules.price_upper_quantile &&
         outlier_rules.max_bedrooms == o.outlier_rules.max_bedrooms &&
         impute_absent_fee_as_zero == o.impute_absent_fee_as_zero && include_month == o.include_month;
}

void to_json(nlohmann::json& j, const EncodingSpec& spec) {
  nlohmann::json numeric = nlohmann::json::array();
  for (const auto& c : spec.numeric_columns) {
    numeric.push_back({{"name", c.name}, {"transform", c.transform == Transform::log1p ? "log1p" : "identity"}});
  }
  nlohmann::json categorical = nlohmann::json::array();
  for (const auto& c : spec.categorical_columns) {
    categorical.push_back({{"name", c.name}, {"vocabulary", c.vocabulary}});
  }
  j = {{"numeric_columns", numeric},
       {"categorical_columns", categorical},
       {"outlier_rules",
        {{"price_upper_quantile", spec.outlier_rules.price_upper_quantile},
         {"max_bedrooms", spec.outlier_rules.max_bedrooms}}},
       {"impute_absent_fee_as_zero", spec.impute_absent_fee_as_zero},
       {"include_month", spec.include_month}};
}

void from_json(const nlohmann::json& j, EncodingSpec& spec) {
  spec = EncodingSpec{};
  for (const auto& c : j.at("numeric_columns")) {
    const std::string t = c.at("transform");
    if (t != "log1p" && t != "identity") throw SchemaError(fmt::format("unknown transform '{}'", t));
    spec.numeric_columns.push_back({c.at("name"), t == "log1p" ? Transform::log1p : Transform::identity});
  }
  for (const auto& c : j.at("categorical_columns")) {
    spec.categorical_columns.push_back({c.at("name"), c.at("vocabulary").get<std::vector<std::string>>()});
  }
  spec.outlier_rules.price_upper_quantile = j.at("outlier_rules").at("price_upper_quantile");
  spec.outlier_rules.max_bedrooms = j.at("outlier_rules").at("max_bedrooms");
  spec.impute_absent_fee_as_zero = j.at("impute_absent_fee_as_zero");
  spec.include_month = j.at("include_month");
}

EncodingSpec fit_encoding(std::span<const ListingRecord> records, const EncodingOptions& options) {
  EncodingSpec spec;
  spec.numeric_columns = options.numeric_columns;
  spec.outlier_rules = options.outlier_rules;
  spec.impute_absent_fee_as_zero = options.impute_absent_fee_as_zero;
  spec.include_month = options.include_month;
  for (const auto& name : options.categorical_columns) {
    std::set<std::string> seen;
    for (const auto& r : records) {
      if (auto v = categorical_field(r, name)) seen.insert(*v);
    }
    spec.categorical_columns.push_back({name, {seen.begin(), seen.end()}});
  }
  return spec;
}

std::vector<double> encode_row(const ListingRecord& record, const EncodingSpec& spec) {
  std::vector<double> row;
  row.reserve(spec.width());
  for (const auto& c : spec.numeric_columns) {
    auto v = numeric_field(record, c.name);
    if (!v) {
      if (spec.impute_absent_fee_as_zero && is_fee(c.name)) {
        v = 0.0;
      } else {
        throw SchemaError(fmt::format("listing {} has no value for column '{}'", record.listing_id, c.name));
      }
    }
    row.push_back(c.transform == Transform::log1p ? log1p_transform(*v) : *v);
  }
  if (spec.include_month) row.push_back(record.snapshot_date ? static_cast<double>(record.snapshot_date->month) : 0.0);
  for (const auto& c : spec.categorical_columns) {
    const auto v = categorical_field(record, c.name);
    if (!v) throw SchemaError(fmt::format("listing {} has no value for column '{}'", record.listing_id, c.name));
    const auto it = std::lower_bound(c.vocabulary.begin(), c.vocabulary.end(), *v);
    const bool known = it != c.vocabulary.end() && *it == *v;
    const auto slot = known ? static_cast<std::size_t>(it - c.vocabulary.begin()) : c.vocabulary.size();
    for (std::size_t i = 0; i <= c.vocabulary.size(); ++i) row.push_back(i == slot ? 1.0 : 0.0);
  }
  return row;
}

FeatureMatrix encode(std::span<const ListingRecord> records, const EncodingSpec& spec) {
  FeatureMatrix fm;
  fm.column_names = spec.column_names();
  fm.values = Matrix(0, spec.width());
  fm.values.reserve_rows(records.size());
  for (const auto& r : records) {
    fm.values.append_row(encode_row(r, spec));
    fm.target.push_back(log1p_transform(r.price));
    fm.listing_ids.push_back(r.listing_id);
    fm.row_dates.push_back(r.snapshot_date);
  }
  return fm;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.values = values.select_rows(indices);
  out.column_names = column_names;
  out.target = select<double>(target, indices);
  out.listing_ids = select<std::int64_t>(listing_ids, indices);
  out.row_dates = select<std::optional<Date>>(row_dates, indices);
  return out;
}

bool weekend_flag(const Date& date, const WeekendConvention& convention) {
  return convention.nights.contains(date.weekday());
}

double median(std::vector<double> values) {
  if (values.empty()) throw NumericError("median of empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

namespace {

// Uniform subset of the requested size; selection order follows a seeded partial shuffle.
std::vector<double> subsample(std::vector<double> values, std::size_t size, Rng& rng) {
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + rng.uniform_index(values.size() - i);
    std::swap(values[i], values[j]);
  }
  values.resize(size);
  return values;
}

}  // namespace

WeekendComparison weekend_median_comparison(std::span<const CalendarEntry> entries, bool balance,
                                            std::uint64_t seed, const WeekendConvention& convention) {
  std::vector<double> weekday, weekend;
  for (const auto& e : entries) {
    if (!e.price) continue;
    (weekend_flag(e.date, convention) ? weekend : weekday).push_back(*e.price);
  }
  if (weekday.empty()) throw NumericError("weekend_median_comparison: no priced weekday nights");
  if (weekend.empty()) throw NumericError("weekend_median_comparison: no priced weekend nights");
  if (balance && weekday.size() != weekend.size()) {
    Rng rng = Rng::stream(seed, {0x77});
    const std::size_t n = std::min(weekday.size(), weekend.size());
    if (weekday.size() > n) weekday = subsample(std::move(weekday), n, rng);
    if (weekend.size() > n) weekend = subsample(std::move(weekend), n, rng);
  }
  return {median(weekday), median(weekend), weekday.size(), weekend.size()};
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson_correlation: length mismatch");
  if (x.size() < 2) throw DomainError("pearson_correlation: need at least 2 points");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) throw NumericError("pearson_correlation: undefined for a constant vector");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace pricecast
