#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pricecast {

/// days / window, with days in [0, window] and window one of 30, 60, 90, 365.
double normalize_availability(int days, int window);

struct KMeansResult {
  std::vector<double> centroids;         // ascending
  std::vector<std::size_t> assignments;  // index into centroids, per point
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step
  bool degenerate = false;              // fewer distinct values than k; centroids repeat
};

/// Lloyd's algorithm on a line with seeded k-means++ initialization. Stops when no
/// centroid moves by `tol` or more, or after max_iter iterations. An emptied
/// cluster is reseeded at the point farthest from its current centroid.
KMeansResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300,
                       double tol = 1e-6);

enum class Availability { low = 0, high = 1 };

/// Lowest centroid -> low, highest -> high. Requires exactly two centroids.
std::vector<Availability> split_low_high(const KMeansResult& result);

/// Categorical naive Bayes with additive smoothing over each feature's vocabulary
/// plus an "other" slot for categories unseen in training.
struct NBModel {
  std::vector<int> labels;                             // ascending class labels
  std::vector<double> class_log_priors;                // per class
  std::vector<std::vector<std::string>> vocabularies;  // per feature, sorted; "other" is the slot after the last
  std::vector<std::vector<std::vector<double>>> log_likelihoods;  // [feature][class][category]
  double alpha = 1.0;

  std::size_t n_features() const { return vocabularies.size(); }
  bool operator==(const NBModel&) const = default;
};

void to_json(nlohmann::json& j, const NBModel& m);
void from_json(const nlohmann::json& j, NBModel& m);

using CategoricalRow = std::vector<std::string>;

NBModel fit_multinomial_nb(std::span<const CategoricalRow> rows, std::span<const int> labels, double alpha = 1.0);

/// Normalized class posteriors, same order as model.labels.
std::vector<double> nb_posteriors(const NBModel& model, const CategoricalRow& row);

struct NBPrediction {
  int label = 0;
  std::vector<double> posteriors;
};

/// Argmax of log posterior; ties go to the larger prior, then the lower label.
NBPrediction predict_nb(const NBModel& model, const CategoricalRow& row);
std::vector<int> predict_nb(const NBModel& model, std::span<const CategoricalRow> rows);

struct MajorityBaseline {
  int label = 0;
  double accuracy = 0.0;

  bool operator==(const MajorityBaseline&) const = default;
};

/// Most frequent label (ties to the lower label) and its frequency.
MajorityBaseline majority_baseline(std::span<const int> labels);

double accuracy(std::span<const int> truth, std::span<const int> predicted);

}  // namespace pricecast
