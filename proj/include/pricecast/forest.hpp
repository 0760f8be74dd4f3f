#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pricecast/tree.hpp"

namespace pricecast {

/// Bagged CART ensemble.
struct Forest {
  Task task = Task::regression;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;  // classification only
  HyperParams params;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  std::vector<double> feature_importances;

  bool operator==(const Forest&) const = default;
};

/// Tree i draws its bootstrap sample and feature subsets from a stream that depends
/// only on (seed, i), so a forest's first k trees equal a k-tree forest with the same
/// seed. Identical (row, target) pairs are folded into weights before growing; the
/// result is the same as growing on the repeated rows.
Forest fit_forest(const Matrix& x, std::span<const double> y, const HyperParams& params, Task task,
                  std::uint64_t seed);

/// Regression: mean of the first `n_trees` trees (0 = all). Classification: class
/// index with the highest averaged leaf frequency, ties to the lower index.
std::vector<double> predict_forest(const Forest& forest, const Matrix& x, std::size_t n_trees = 0);
double predict_forest(const Forest& forest, std::span<const double> row, std::size_t n_trees = 0);

/// Averaged per-tree leaf class frequencies.
std::vector<double> predict_proba(const Forest& forest, std::span<const double> row);

/// Normalized total impurity decrease per feature; all zeros when no tree split.
const std::vector<double>& feature_importances(const Forest& forest);

/// (name, importance) pairs, descending by importance, ties by column order.
std::vector<std::pair<std::string, double>> ranked_importances(const Forest& forest,
                                                               std::span<const std::string> names);

void to_json(nlohmann::json& j, const Forest& f);
void from_json(const nlohmann::json& j, Forest& f);

}  // namespace pricecast
