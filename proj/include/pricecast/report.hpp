#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pricecast {

double rmse(std::span<const double> y_true, std::span<const double> y_pred);
double mae(std::span<const double> y_true, std::span<const double> y_pred);

/// 100 * mean(|y - y_hat| / y). Every y_true must be positive; otherwise a
/// DomainError lists the offending row indices.
double mape(std::span<const double> y_true, std::span<const double> y_pred);

inline const std::vector<double> kDefaultBucketThresholds = {5.0, 10.0, 20.0, 30.0};

struct ErrorBucketTable {
  std::vector<double> thresholds;              // USD
  std::vector<double> cumulative_percentages;  // percent of errors <= threshold
};

ErrorBucketTable error_buckets(std::span<const double> errors,
                               std::span<const double> thresholds = kDefaultBucketThresholds);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

/// Bins are [e_i, e_{i+1}) except the last, which is closed. Values outside the
/// edges are not counted.
Histogram histogram(std::span<const double> values, std::span<const double> edges);
/// Equal-width bins over [min, max] of the values ([0, 1] when empty or constant range is widened by 0.5).
Histogram histogram(std::span<const double> values, std::size_t bin_count);

enum class CellStatistic { median, mean };

struct HeatmapGrid {
  std::vector<double> lat_edges;
  std::vector<double> lon_edges;
  std::vector<std::vector<std::optional<double>>> cell_stat;  // [lat_bin][lon_bin]
  std::vector<std::vector<std::size_t>> cell_count;
};

/// Equal-width bins over the observed latitude and longitude ranges; points on the
/// upper edge land in the last bin.
HeatmapGrid heatmap_grid(std::span<const double> lat, std::span<const double> lon, std::span<const double> price,
                         std::size_t lat_bins = 50, std::size_t lon_bins = 50,
                         CellStatistic stat = CellStatistic::median);

/// A figure's data as a CSV table.
struct FigureTable {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

FigureTable histogram_table(const std::string& name, const Histogram& h);
FigureTable buckets_table(const std::string& name, const ErrorBucketTable& t);
FigureTable heatmap_table(const std::string& name, const HeatmapGrid& g);

/// Machine-readable run report. Sections are null until the stage runs.
struct RunReport {
  static inline const std::vector<std::string> kSections = {"meta",  "eda",   "baseline",     "gate",   "balance",
                                                             "search", "final", "availability", "warnings"};

  nlohmann::json meta = nlohmann::json::object();
  nlohmann::json eda;
  nlohmann::json baseline;
  nlohmann::json gate;
  nlohmann::json balance;
  nlohmann::json search;
  nlohmann::json final;
  nlohmann::json availability;
  std::vector<std::string> warnings;
  std::vector<FigureTable> figures;

  /// Throws if a stage section is set twice.
  void set_section(const std::string& name, nlohmann::json value);
  nlohmann::json to_json() const;
};

/// Writes report.json and one CSV per figure into `dir`. The only
/// non-deterministic field is meta.generated_at, filled in when `timestamp` is set.
void emit_report(const RunReport& report, const std::filesystem::path& dir, bool timestamp = true);

/// JSON text with sorted keys, two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pricecast
