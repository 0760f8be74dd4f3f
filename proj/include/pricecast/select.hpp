#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pricecast/forest.hpp"
#include "pricecast/matrix.hpp"
#include "pricecast/rng.hpp"

namespace pricecast {

using Folds = std::vector<std::vector<std::size_t>>;

/// Seeded permutation of 0..n-1 cut into k folds; the first n % k folds hold one
/// extra index. Indices within a fold are ascending.
Folds kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// Folds over groups: every row of a group lands in the same fold. Groups are
/// permuted and dealt out so fold group counts differ by at most one.
Folds group_kfold_split(std::span<const std::int64_t> groups, std::size_t k, std::uint64_t seed);

enum class FoldMode { row, group };

/// Training indices for fold `held_out`: every index not in it, ascending.
std::vector<std::size_t> training_indices(const Folds& folds, std::size_t held_out);

/// 1 - SS_res / SS_tot. Throws NumericError for a constant y_true.
double r2_score(std::span<const double> y_true, std::span<const double> y_pred);

struct SearchSpace {
  std::size_t n_estimators_min = 100;
  std::size_t n_estimators_max = 200;
  std::vector<MaxFeatures> max_features = {MaxFeatures::automatic, MaxFeatures::sqrt};
  std::vector<std::optional<std::size_t>> max_depth = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, std::nullopt};
  std::vector<std::size_t> min_samples_split = {2, 5, 10};
  std::vector<std::size_t> min_samples_leaf = {1, 2, 4};
  std::vector<bool> bootstrap = {true, false};

  void validate() const;
  bool contains(const HyperParams& p) const;
};

void to_json(nlohmann::json& j, const SearchSpace& s);
/// Keys absent from j keep their defaults.
void from_json(const nlohmann::json& j, SearchSpace& s);

/// Each dimension drawn independently and uniformly, in the fixed order
/// n_estimators, max_features, max_depth, min_samples_split, min_samples_leaf, bootstrap.
HyperParams sample_params(const SearchSpace& space, Rng& rng);

struct TrialResult {
  HyperParams params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
  double std_score = 0.0;  // population standard deviation across folds
  std::size_t rank = 0;
  std::size_t trial_index = 0;
};

struct FailedTrial {
  HyperParams params;
  std::size_t trial_index = 0;
  std::string reason;
};

struct SearchOptions {
  std::size_t n_iter = 100;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  FoldMode fold_mode = FoldMode::row;
  std::span<const std::int64_t> groups;  // required for FoldMode::group
};

struct SearchResult {
  std::vector<TrialResult> ranked;  // rank 1 first
  std::vector<FailedTrial> failed;
};

/// Randomized search over regression forests scored by fold R². Ranking is by
/// mean score descending, then std ascending, then trial index ascending.
SearchResult randomized_search(const Matrix& x, std::span<const double> y, const SearchSpace& space,
                               const SearchOptions& options);

void to_json(nlohmann::json& j, const TrialResult& t);

/// Python-dict rendering used in the search report, e.g.
/// {'n_estimators': 131, 'min_samples_split': 5, ..., 'max_depth': None, 'bootstrap': True}
std::string format_params(const HyperParams& p);

/// "Model with rank: k / Mean validation score: x (std: y) / Parameters: {...}" blocks
/// for the first `top` trials.
std::string format_top_trials(const SearchResult& result, std::size_t top = 3);

struct TreesCurvePoint {
  std::size_t n_trees = 0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
};

struct TreesCurveOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  FoldMode fold_mode = FoldMode::row;
  std::span<const std::int64_t> groups;
  /// Maps model-space values to the reporting space before the RMSE (e.g. expm1).
  std::function<double(double)> to_output;
};

/// Per tree count, train and held-out RMSE averaged over folds. One forest of
/// max(n_list) trees is grown per fold and evaluated on its tree prefixes, which
/// equal smaller forests with the same seed.
std::vector<TreesCurvePoint> trees_curve(const Matrix& x, std::span<const double> y, const HyperParams& params,
                                         std::span<const std::size_t> n_list, const TreesCurveOptions& options);

/// Row or group folds depending on mode; groups must cover n rows in group mode.
Folds make_folds(std::size_t n, std::size_t k, std::uint64_t seed, FoldMode mode,
                 std::span<const std::int64_t> groups = {});

}  // namespace pricecast
