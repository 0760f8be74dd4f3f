#include "pricecast/report.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "pricecast/csv.hpp"
#include "pricecast/error.hpp"
#include "pricecast/features.hpp"

namespace pricecast {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DomainError(fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
  if (a.empty()) throw DomainError(fmt::format("{}: empty input", what));
}

}  // namespace

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  return std::sqrt(s / static_cast<double>(y_true.size()));
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
  return s / static_cast<double>(y_true.size());
}

double mape(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred, "mape");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!(y_true[i] > 0.0)) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw DomainError(fmt::format("mape: y_true must be positive; offending rows {}", fmt::join(bad, ", ")));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]) / y_true[i];
  return 100.0 * s / static_cast<double>(y_true.size());
}

ErrorBucketTable error_buckets(std::span<const double> errors, std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw DomainError("error_buckets: thresholds must be ascending");
  }
  ErrorBucketTable t;
  t.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double th : thresholds) {
    const auto hits = std::count_if(errors.begin(), errors.end(), [th](double e) { return e <= th; });
    t.cumulative_percentages.push_back(errors.empty() ? 0.0
                                                      : 100.0 * static_cast<double>(hits) /
                                                            static_cast<double>(errors.size()));
  }
  return t;
}

Histogram histogram(std::span<const double> values, std::span<const double> edges) {
  if (edges.size() < 2) throw DomainError("histogram: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw DomainError("histogram: edges must be strictly increasing");
  }
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.counts.assign(edges.size() - 1, 0);
  for (double v : values) {
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;
    ++h.counts[bin];
  }
  return h;
}

namespace {

std::vector<double> equal_edges(double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  edges.back() = hi;
  return edges;
}

std::size_t bin_of(double v, const std::vector<double>& edges) {
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  const auto bin = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - edges.begin() - 1, 0));
  return std::min(bin, edges.size() - 2);
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bin_count) {
  if (bin_count < 1) throw DomainError("histogram: bin_count must be >= 1");
  if (values.empty()) return histogram(values, equal_edges(0.0, 1.0, bin_count));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return histogram(values, equal_edges(*lo, *hi, bin_count));
}

HeatmapGrid heatmap_grid(std::span<const double> lat, std::span<const double> lon, std::span<const double> price,
                         std::size_t lat_bins, std::size_t lon_bins, CellStatistic stat) {
  if (lat.size() != lon.size() || lat.size() != price.size()) throw DomainError("heatmap_grid: length mismatch");
  if (lat.empty()) throw DomainError("heatmap_grid: no points");
  if (lat_bins < 1 || lon_bins < 1) throw DomainError("heatmap_grid: bin counts must be >= 1");
  HeatmapGrid g;
  const auto [lat_lo, lat_hi] = std::minmax_element(lat.begin(), lat.end());
  const auto [lon_lo, lon_hi] = std::minmax_element(lon.begin(), lon.end());
  g.lat_edges = equal_edges(*lat_lo, *lat_hi, lat_bins);
  g.lon_edges = equal_edges(*lon_lo, *lon_hi, lon_bins);
  std::vector<std::vector<std::vector<double>>> cells(lat_bins, std::vector<std::vector<double>>(lon_bins));
  for (std::size_t i = 0; i < lat.size(); ++i) {
    cells[bin_of(lat[i], g.lat_edges)][bin_of(lon[i], g.lon_edges)].push_back(price[i]);
  }
  g.cell_stat.assign(lat_bins, std::vector<std::optional<double>>(lon_bins));
  g.cell_count.assign(lat_bins, std::vector<std::size_t>(lon_bins, 0));
  for (std::size_t a = 0; a < lat_bins; ++a) {
    for (std::size_t b = 0; b < lon_bins; ++b) {
      auto& c = cells[a][b];
      g.cell_count[a][b] = c.size();
      if (c.empty()) continue;
      if (stat == CellStatistic::median) {
        g.cell_stat[a][b] = median(c);
      } else {
        double s = 0.0;
        for (double v : c) s += v;
        g.cell_stat[a][b] = s / static_cast<double>(c.size());
      }
    }
  }
  return g;
}

FigureTable histogram_table(const std::string& name, const Histogram& h) {
  FigureTable t{name, {"bin_lower", "bin_upper", "count"}, {}};
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    t.rows.push_back({format_double(h.edges[i]), format_double(h.edges[i + 1]), std::to_string(h.counts[i])});
  }
  return t;
}

FigureTable buckets_table(const std::string& name, const ErrorBucketTable& b) {
  FigureTable t{name, {"error_at_most_usd", "cumulative_percent"}, {}};
  for (std::size_t i = 0; i < b.thresholds.size(); ++i) {
    t.rows.push_back({format_double(b.thresholds[i]), format_double(b.cumulative_percentages[i])});
  }
  return t;
}

FigureTable heatmap_table(const std::string& name, const HeatmapGrid& g) {
  FigureTable t{name, {"lat_lower", "lat_upper", "lon_lower", "lon_upper", "count", "median_price"}, {}};
  for (std::size_t a = 0; a + 1 < g.lat_edges.size(); ++a) {
    for (std::size_t b = 0; b + 1 < g.lon_edges.size(); ++b) {
      if (g.cell_count[a][b] == 0) continue;
      t.rows.push_back({format_double(g.lat_edges[a]), format_double(g.lat_edges[a + 1]),
                        format_double(g.lon_edges[b]), format_double(g.lon_edges[b + 1]),
                        std::to_string(g.cell_count[a][b]), format_double(*g.cell_stat[a][b])});
    }
  }
  return t;
}

void RunReport::set_section(const std::string& name, nlohmann::json value) {
  nlohmann::json* slot = nullptr;
  if (name == "eda") slot = &eda;
  if (name == "baseline") slot = &baseline;
  if (name == "gate") slot = &gate;
  if (name == "balance") slot = &balance;
  if (name == "search") slot = &search;
  if (name == "final") slot = &final;
  if (name == "availability") slot = &availability;
  if (!slot) throw DomainError(fmt::format("unknown report section '{}'", name));
  if (!slot->is_null()) throw DomainError(fmt::format("report section '{}' already set", name));
  *slot = std::move(value);
}

nlohmann::json RunReport::to_json() const {
  return {{"meta", meta},         {"eda", eda},     {"baseline", baseline},         {"gate", gate},
          {"balance", balance},   {"search", search}, {"final", final},           {"availability", availability},
          {"warnings", warnings}};
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void emit_report(const RunReport& report, const std::filesystem::path& dir, bool timestamp) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  nlohmann::json doc = report.to_json();
  doc["meta"]["generated_at"] =
      timestamp ? nlohmann::json(fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))))
                : nlohmann::json(nullptr);
  write_text(dir / "report.json", dump_json(doc));
  for (const auto& fig : report.figures) {
    write_csv(dir / (fig.name + ".csv"), CsvTable{fig.header, fig.rows});
  }
}

}  // namespace pricecast
