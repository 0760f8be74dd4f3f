#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pricecast/balance.hpp"
#include "pricecast/features.hpp"
#include "pricecast/forest.hpp"
#include "pricecast/ingest.hpp"
#include "pricecast/linear.hpp"
#include "pricecast/prob.hpp"
#include "pricecast/report.hpp"
#include "pricecast/select.hpp"

namespace pricecast {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 42;

/// USD price from a log1p-space prediction.
inline double to_usd(double log_price) { return std::expm1(log_price); }

// ---------------------------------------------------------------- exploration

struct EdaConfig {
  std::uint64_t seed = kDefaultSeed;
  std::size_t heatmap_bins = 50;
  CellStatistic heatmap_stat = CellStatistic::median;
  WeekendConvention weekend;
};

/// Distributions, weekday/weekend medians, correlation screen and price heatmap.
/// Fills report.eda and adds figure tables.
void run_eda(std::span<const ListingRecord> listings, std::span<const CalendarEntry> calendar,
             const EdaConfig& config, RunReport& report);

// ----------------------------------------------------------- price hypothesis

struct BaselineResult {
  LinearModel model;                  // fitted on every row
  std::vector<double> oof_errors_usd;  // |expm1(oof prediction) - price| per row
  double rmse_usd = 0.0;
  double mape_percent = 0.0;
  std::size_t mape_rows = 0;  // rows with a positive price
  ErrorBucketTable buckets;
};

/// Out-of-fold OLS predictions. Columns that are linearly dependent within a
/// training fold are dropped for that fold.
BaselineResult baseline_stage(const FeatureMatrix& matrix, std::size_t k, std::uint64_t seed,
                              FoldMode mode = FoldMode::row);

struct GateLabel {
  std::int64_t listing_id = 0;
  double oof_abs_error = 0.0;  // mean over the listing's rows
  bool easy = false;
  double threshold = 0.0;
};

/// One label per listing, ascending by listing id; easy iff mean error <= threshold.
std::vector<GateLabel> label_easy_hard(std::span<const std::int64_t> listing_ids, std::span<const double> errors,
                                       double threshold_usd = 30.0);

inline constexpr double kEasy = 1.0;
inline constexpr double kHard = 0.0;

struct GateResult {
  Forest forest;  // classifier over all rows; class 1 = easy
  double holdout_accuracy = 0.0;
  std::size_t holdout_rows = 0;
  std::vector<FigureTable> distributions;  // easy/hard histograms per non-indicator column
};

/// Trains the easy/hard classifier on rows labelled by their listing. Accuracy is
/// measured on a seeded 20% of listings held out from a first fit.
GateResult train_gate(const FeatureMatrix& matrix, std::span<const GateLabel> labels, const HyperParams& params,
                      std::uint64_t seed, double holdout_fraction = 0.2);

HyperParams default_gate_params();

struct PriceConfig {
  std::uint64_t seed = kDefaultSeed;
  EncodingOptions encoding;
  BalanceConfig balance;
  double gate_threshold = 30.0;
  HyperParams gate_params = default_gate_params();
  SearchSpace space;
  std::size_t n_iter = 100;
  std::size_t folds = 10;
  FoldMode fold_mode = FoldMode::row;
  bool easy_only = false;  // train the price forest on easy listings only
};

struct PricePipelineModel {
  EncodingSpec encoding;
  LinearModel baseline;
  Forest gate;
  Forest price_model;
  HyperParams chosen_params;
  std::uint64_t seed = 0;
  double gate_threshold = 30.0;
  std::size_t target_per_listing = 100;
  bool easy_only = false;
  std::string dataset_fingerprint;

  bool operator==(const PricePipelineModel&) const = default;
};

void to_json(nlohmann::json& j, const PricePipelineModel& m);
void from_json(const nlohmann::json& j, PricePipelineModel& m);

struct PriceRun {
  PricePipelineModel model;
  SearchResult search;
  RunReport report;
};

/// Stage errors are rethrown with the stage name prefixed.
PriceRun hypothesis1_run(std::span<const ListingRecord> records, const PriceConfig& config);

enum class GateVerdict { easy, hard };

struct PricePrediction {
  double price_usd = 0.0;
  GateVerdict verdict = GateVerdict::hard;
  double easy_probability = 0.0;
  std::string note;
};

PricePrediction predict_price(const PricePipelineModel& model, const ListingRecord& record);
std::vector<PricePrediction> predict_price(const PricePipelineModel& model, std::span<const ListingRecord> records);

/// FNV-1a over the matrix contents, as 16 hex digits.
std::string fingerprint(const FeatureMatrix& matrix);

// ---------------------------------------------------- availability hypothesis

struct AvailabilityConfig {
  int window = 365;  // window whose clusters label the classifier
  std::uint64_t seed = kDefaultSeed;
  double alpha = 1.0;
  std::size_t k = 2;
};

struct AvailabilityModel {
  int window = 365;
  double centroid_low = 0.0;
  double centroid_high = 0.0;
  NBModel nb;
  MajorityBaseline majority;
  double nb_accuracy = 0.0;

  bool operator==(const AvailabilityModel&) const = default;
};

void to_json(nlohmann::json& j, const AvailabilityModel& m);
void from_json(const nlohmann::json& j, AvailabilityModel& m);

struct AvailabilityRun {
  AvailabilityModel model;
  std::vector<Availability> labels;  // per record, for the configured window
};

/// Clusters each window's normalized availability into low/high, then fits naive
/// Bayes on (zipcode, room_type) against the configured window's labels.
/// Fills report.availability and adds figure tables.
AvailabilityRun hypothesis2_run(std::span<const ListingRecord> records, const AvailabilityConfig& config,
                                RunReport& report);

/// Posterior probability of the high-availability class.
double availability_likelihood(const AvailabilityModel& model, const std::string& zipcode,
                               const std::string& room_type);

}  // namespace pricecast
