#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pricecast/features.hpp"
#include "pricecast/matrix.hpp"

namespace pricecast {

enum class DownsampleOrder { farthest_from_median, nearest_to_median };

struct BalanceConfig {
  std::size_t target_per_listing = 100;
  DownsampleOrder downsample_order = DownsampleOrder::farthest_from_median;
  std::vector<std::size_t> distance_columns;  // empty: every feature column
};

/// Independent per-column medians; even counts average the two middle values.
std::vector<double> column_median(const Matrix& rows);
std::vector<double> column_median(const Matrix& rows, std::span<const std::size_t> subset);

/// Cyclic repetition 0, 1, ..., k-1, 0, 1, ... truncated at target.
/// Requires 1 <= row_count <= target.
std::vector<std::size_t> upsample(std::size_t row_count, std::size_t target);

/// Selects `target` of the rows by Euclidean distance to their per-column median
/// row, in the configured order, ties broken by lower row index. Requires
/// rows() > target. Returned indices are in selection order.
std::vector<std::size_t> downsample(const Matrix& rows, std::size_t target, const BalanceConfig& config = {});
/// Same, over the listed rows only; ties break by position in `subset`.
std::vector<std::size_t> downsample(const Matrix& rows, std::span<const std::size_t> subset, std::size_t target,
                                    const BalanceConfig& config);

struct BalanceSummary {
  std::size_t listings = 0;
  std::size_t upsampled = 0;
  std::size_t downsampled = 0;
  std::size_t unchanged = 0;
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
};

struct BalanceResult {
  FeatureMatrix matrix;
  BalanceSummary summary;
  std::vector<std::size_t> source_rows;  // row of the input each output row copies
};

/// Every listing ends up with exactly target_per_listing rows. Output is ordered
/// by ascending listing id, then selection rank within the listing.
BalanceResult balance_dataset(const FeatureMatrix& matrix, const BalanceConfig& config = {});

}  // namespace pricecast
