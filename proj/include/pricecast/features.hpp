#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pricecast/date.hpp"
#include "pricecast/ingest.hpp"
#include "pricecast/matrix.hpp"

namespace pricecast {

/// ln(1 + x) for x >= 0; throws DomainError otherwise.
double log1p_transform(double x);

struct OutlierRules {
  double price_upper_quantile = 0.95;
  int max_bedrooms = 4;
};

/// Linear-interpolation empirical quantile (numpy default), q in [0, 1].
double empirical_quantile(std::vector<double> values, double q);

/// Removes rows priced above the empirical quantile of the input prices or with
/// more than max_bedrooms bedrooms. Drop reasons: "price_quantile", "bedrooms".
LoadResult<ListingRecord> filter_outliers(std::span<const ListingRecord> records, const OutlierRules& rules = {});

enum class Transform { identity, log1p };

struct NumericColumn {
  std::string name;
  Transform transform = Transform::identity;
  bool operator==(const NumericColumn&) const = default;
};

struct CategoricalColumn {
  std::string name;
  std::vector<std::string> vocabulary;  // sorted, unique; the "other" slot is implicit
  bool operator==(const CategoricalColumn&) const = default;
};

/// Frozen train-time encoding. Encoding the same records with the same spec is
/// bit-identical.
struct EncodingSpec {
  std::vector<NumericColumn> numeric_columns;
  std::vector<CategoricalColumn> categorical_columns;
  OutlierRules outlier_rules;
  bool impute_absent_fee_as_zero = true;
  bool include_month = true;

  std::vector<std::string> column_names() const;
  std::size_t width() const;

  bool operator==(const EncodingSpec& o) const;
};

void to_json(nlohmann::json& j, const EncodingSpec& spec);
void from_json(const nlohmann::json& j, EncodingSpec& spec);

/// Which record fields fit_encoding turns into columns.
struct EncodingOptions {
  std::vector<NumericColumn> numeric_columns = {
      {"accommodates", Transform::identity},    {"bathrooms", Transform::identity},
      {"bedrooms", Transform::identity},        {"cleaning_fee", Transform::log1p},
      {"security_deposit", Transform::log1p},   {"extra_people", Transform::log1p},
      {"latitude", Transform::identity},        {"longitude", Transform::identity}};
  std::vector<std::string> categorical_columns = {"room_type", "zipcode"};
  OutlierRules outlier_rules;
  bool impute_absent_fee_as_zero = true;
  bool include_month = true;
};

/// Numeric record fields addressable by name (throws SchemaError for unknown names).
std::optional<double> numeric_field(const ListingRecord& r, const std::string& name);
/// Categorical record fields addressable by name.
std::optional<std::string> categorical_field(const ListingRecord& r, const std::string& name);

EncodingSpec fit_encoding(std::span<const ListingRecord> records, const EncodingOptions& options = {});

inline constexpr const char* kOtherCategory = "<other>";

/// Numeric design matrix with aligned target (log1p of USD price) and listing ids.
struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> column_names;
  std::vector<double> target;
  std::vector<std::int64_t> listing_ids;
  std::vector<std::optional<Date>> row_dates;

  std::size_t rows() const { return values.rows(); }
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
};

/// Layout: numeric columns in spec order, then "month" (1-12, 0 when the row has
/// no date), then one one-hot block per categorical (vocabulary order, "other" last).
/// Throws SchemaError when a record lacks a value the spec requires.
FeatureMatrix encode(std::span<const ListingRecord> records, const EncodingSpec& spec);
std::vector<double> encode_row(const ListingRecord& record, const EncodingSpec& spec);

/// Weekday numbers (0 = Sunday) counted as weekend nights.
struct WeekendConvention {
  std::set<unsigned> nights = {5, 6};  // Friday and Saturday
};

bool weekend_flag(const Date& date, const WeekendConvention& convention = {});

struct WeekendComparison {
  double weekday_median = 0.0;
  double weekend_median = 0.0;
  std::size_t weekday_count = 0;  // after balancing
  std::size_t weekend_count = 0;
};

double median(std::vector<double> values);

/// Median nightly price for weekday vs weekend nights. Entries without a price
/// are skipped. With balance, the larger class is uniformly subsampled (seeded)
/// down to the size of the smaller one.
WeekendComparison weekend_median_comparison(std::span<const CalendarEntry> entries, bool balance,
                                            std::uint64_t seed, const WeekendConvention& convention = {});

/// Sample Pearson correlation. Throws NumericError for constant input.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace pricecast
