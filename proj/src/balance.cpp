#include "pricecast/balance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pricecast/error.hpp"

namespace pricecast {

std::vector<double> column_median(const Matrix& rows, std::span<const std::size_t> subset) {
  if (subset.empty()) throw NumericError("column_median: no rows");
  std::vector<double> out(rows.cols());
  std::vector<double> column(subset.size());
  for (std::size_t c = 0; c < rows.cols(); ++c) {
    for (std::size_t i = 0; i < subset.size(); ++i) column[i] = rows(subset[i], c);
    out[c] = median(column);
  }
  return out;
}

std::vector<double> column_median(const Matrix& rows) {
  std::vector<std::size_t> all(rows.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return column_median(rows, all);
}

std::vector<std::size_t> upsample(std::size_t row_count, std::size_t target) {
  if (row_count == 0) throw NumericError("upsample: no rows to repeat");
  if (row_count > target) throw DomainError(fmt::format("upsample: {} rows exceed target {}", row_count, target));
  std::vector<std::size_t> out(target);
  for (std::size_t i = 0; i < target; ++i) out[i] = i % row_count;
  return out;
}

std::vector<std::size_t> downsample(const Matrix& rows, std::span<const std::size_t> subset, std::size_t target,
                                    const BalanceConfig& config) {
  if (subset.size() <= target) {
    throw DomainError(fmt::format("downsample: needs more than {} rows, got {}", target, subset.size()));
  }
  std::vector<std::size_t> columns = config.distance_columns;
  if (columns.empty()) {
    columns.resize(rows.cols());
    std::iota(columns.begin(), columns.end(), std::size_t{0});
  }
  for (std::size_t r : subset) {
    for (std::size_t c : columns) {
      if (!std::isfinite(rows(r, c))) throw NumericError(fmt::format("downsample: non-finite value in row {}", r));
    }
  }
  const std::vector<double> center = column_median(rows, subset);

  struct Ranked {
    double distance;
    std::size_t position;
  };
  std::vector<Ranked> ranked(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    double sq = 0.0;
    for (std::size_t c : columns) {
      const double d = rows(subset[i], c) - center[c];
      sq += d * d;
    }
    ranked[i] = {std::sqrt(sq), i};
  }
  const bool farthest = config.downsample_order == DownsampleOrder::farthest_from_median;
  std::stable_sort(ranked.begin(), ranked.end(), [farthest](const Ranked& a, const Ranked& b) {
    return farthest ? a.distance > b.distance : a.distance < b.distance;
  });
  std::vector<std::size_t> out(target);
  for (std::size_t i = 0; i < target; ++i) out[i] = subset[ranked[i].position];
  return out;
}

std::vector<std::size_t> downsample(const Matrix& rows, std::size_t target, const BalanceConfig& config) {
  std::vector<std::size_t> all(rows.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return downsample(rows, all, target, config);
}

BalanceResult balance_dataset(const FeatureMatrix& matrix, const BalanceConfig& config) {
  if (config.target_per_listing < 1) throw DomainError("balance: target_per_listing must be >= 1");
  for (std::size_t c : config.distance_columns) {
    if (c >= matrix.values.cols()) throw DomainError(fmt::format("balance: distance column {} out of range", c));
  }
  const std::size_t target = config.target_per_listing;

  std::vector<std::size_t> order(matrix.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return matrix.listing_ids[a] < matrix.listing_ids[b]; });

  BalanceResult result;
  result.summary.rows_in = matrix.rows();
  std::vector<std::size_t>& selected = result.source_rows;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin;
    while (end < order.size() && matrix.listing_ids[order[end]] == matrix.listing_ids[order[begin]]) ++end;
    const std::span<const std::size_t> group(order.data() + begin, end - begin);
    ++result.summary.listings;
    if (group.size() == target) {
      ++result.summary.unchanged;
      selected.insert(selected.end(), group.begin(), group.end());
    } else if (group.size() < target) {
      ++result.summary.upsampled;
      for (std::size_t i : upsample(group.size(), target)) selected.push_back(group[i]);
    } else {
      ++result.summary.downsampled;
      const auto picks = downsample(matrix.values, group, target, config);
      selected.insert(selected.end(), picks.begin(), picks.end());
    }
    begin = end;
  }
  result.matrix = matrix.select_rows(selected);
  result.summary.rows_out = selected.size();
  return result;
}

}  // namespace pricecast
