#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "pricecast/matrix.hpp"
#include "pricecast/rng.hpp"

namespace pricecast {

enum class Task { regression, classification };

enum class MaxFeatures {
  automatic,  // all features for regression, ceil(sqrt(p)) for classification
  sqrt,       // ceil(sqrt(p))
};

struct HyperParams {
  std::size_t n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::automatic;
  std::optional<std::size_t> max_depth;  // nullopt: grow until another rule stops
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;

  /// Throws DomainError when an invariant is violated.
  void validate() const;

  bool operator==(const HyperParams&) const = default;
};

void to_json(nlohmann::json& j, const HyperParams& p);
void from_json(const nlohmann::json& j, HyperParams& p);

/// Features examined at each node.
std::size_t features_per_split(MaxFeatures mode, Task task, std::size_t n_features);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Best axis-aligned split of the rows.
///
/// Regression gain is the size-weighted variance reduction and classification gain
/// the size-weighted Gini decrease (y holds class indices 0, 1, ...). Thresholds are
/// midpoints between consecutive distinct values and a row goes left when its value
/// is <= threshold. Ties go to the lower feature index, then the lower threshold.
/// Returns nullopt when no split has positive gain.
std::optional<Split> best_split(const Matrix& x, std::span<const double> y, std::span<const std::size_t> features,
                                Task task, std::size_t min_samples_leaf = 1);

/// Flat CART node. Leaves have feature == -1.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;                // regression: weighted mean of the node's targets
  std::vector<double> class_counts;  // classification: per-class sample counts
  double weight = 0.0;               // samples reaching the node

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> row) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

/// Draws a fresh sorted feature subset at every node.
class FeatureSampler {
 public:
  FeatureSampler(Rng& rng, std::size_t per_split) : rng_(&rng), per_split_(per_split) {}
  std::vector<std::size_t> draw(std::size_t n_features);

 private:
  Rng* rng_;
  std::size_t per_split_;
};

/// Per-row multiplicities for a weighted fit; a weight of k is equivalent to the
/// row appearing k times.
struct TreeFitOptions {
  std::span<const double> weights;  // empty: every row once
  std::size_t n_classes = 0;        // classification; 0 infers max(y) + 1
  std::vector<double>* importances = nullptr;  // accumulates node weight * gain per feature
};

Tree fit_tree(const Matrix& x, std::span<const double> y, const HyperParams& params, Task task,
              FeatureSampler& sampler, const TreeFitOptions& options = {});

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);

namespace detail {

/// Rows of a weighted training bag with their per-feature sort orders.
struct TrainingBag {
  std::vector<std::size_t> rows;                 // row index into x, per bag position
  std::vector<double> weights;                   // multiplicity per bag position
  std::vector<std::vector<std::uint32_t>> sorted;  // per feature: bag positions sorted by value, ties by position
};

/// Builds a tree over a prepared bag; shared by fit_tree and the forest.
Tree grow_tree(const Matrix& x, std::span<const double> y, std::size_t n_classes, const HyperParams& params,
               Task task, TrainingBag bag, FeatureSampler& sampler, std::vector<double>* importances);

std::vector<std::vector<std::uint32_t>> sort_positions(const Matrix& x, std::span<const std::size_t> rows);

std::size_t infer_classes(std::span<const double> y);

}  // namespace detail

}  // namespace pricecast
