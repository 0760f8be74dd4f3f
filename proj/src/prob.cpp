#include "pricecast/prob.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "pricecast/error.hpp"
#include "pricecast/rng.hpp"

namespace pricecast {

double normalize_availability(int days, int window) {
  if (window != 30 && window != 60 && window != 90 && window != 365) {
    throw DomainError(fmt::format("availability window must be 30, 60, 90 or 365, got {}", window));
  }
  if (days < 0 || days > window) {
    throw DomainError(fmt::format("availability {} days outside [0, {}]", days, window));
  }
  return static_cast<double>(days) / static_cast<double>(window);
}

namespace {

std::size_t nearest(const std::vector<double>& centroids, double v) {
  std::size_t best = 0;
  double best_d = std::abs(v - centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = std::abs(v - centroids[c]);
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

double squared(double v) { return v * v; }

std::vector<double> plus_plus_init(std::span<const double> values, std::size_t k, Rng& rng) {
  std::vector<double> centroids{values[rng.uniform_index(values.size())]};
  std::vector<double> d2(values.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      d2[i] = squared(values[i] - centroids[nearest(centroids, values[i])]);
      total += d2[i];
    }
    const double target = rng.uniform01() * total;
    double acc = 0.0;
    std::size_t pick = values.size() - 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] == 0.0 && pick > 0) --pick;
    centroids.push_back(values[pick]);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                       double tol) {
  if (k < 1) throw DomainError("kmeans_1d: k must be >= 1");
  if (values.size() < k) throw DomainError(fmt::format("kmeans_1d: {} values for k = {}", values.size(), k));
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("kmeans_1d: non-finite value");
  }
  KMeansResult result;
  const std::set<double> distinct(values.begin(), values.end());

  if (distinct.size() < k) {
    result.degenerate = true;
    result.centroids.assign(distinct.begin(), distinct.end());
    while (result.centroids.size() < k) result.centroids.push_back(result.centroids.back());
    for (double v : values) {
      const std::size_t c = nearest(result.centroids, v);
      result.assignments.push_back(c);
      result.inertia += squared(v - result.centroids[c]);
    }
    result.inertia_history.push_back(result.inertia);
    return result;
  }

  Rng rng = Rng::stream(seed, {0x6B6D});
  std::vector<double> centroids = plus_plus_init(values, k, rng);
  std::vector<std::size_t> assign(values.size(), 0);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      assign[i] = nearest(centroids, values[i]);
      inertia += squared(values[i] - centroids[assign[i]]);
    }
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;

    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[assign[i]] += values[i];
      ++count[assign[i]];
    }
    std::vector<double> next(k);
    std::vector<char> taken(values.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        next[c] = sum[c] / static_cast<double>(count[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-fit point not already used for a reseed.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = squared(values[i] - centroids[assign[i]]);
        if (!taken[i] && d > far_d) {
          far = i;
          far_d = d;
        }
      }
      taken[far] = 1;
      next[c] = values[far];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) moved = std::max(moved, std::abs(next[c] - centroids[c]));
    centroids = std::move(next);
    if (moved < tol) break;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centroids[a] < centroids[b]; });
  for (std::size_t c : order) result.centroids.push_back(centroids[c]);
  result.inertia = 0.0;
  for (double v : values) {
    const std::size_t c = nearest(result.centroids, v);
    result.assignments.push_back(c);
    result.inertia += squared(v - result.centroids[c]);
  }
  return result;
}

std::vector<Availability> split_low_high(const KMeansResult& result) {
  if (result.centroids.size() != 2) throw DomainError("split_low_high: expects exactly two clusters");
  std::vector<Availability> out;
  out.reserve(result.assignments.size());
  for (std::size_t a : result.assignments) out.push_back(a == 0 ? Availability::low : Availability::high);
  return out;
}

void to_json(nlohmann::json& j, const NBModel& m) {
  j = {{"labels", m.labels},
       {"class_log_priors", m.class_log_priors},
       {"vocabularies", m.vocabularies},
       {"log_likelihoods", m.log_likelihoods},
       {"alpha", m.alpha}};
}

void from_json(const nlohmann::json& j, NBModel& m) {
  m.labels = j.at("labels").get<std::vector<int>>();
  m.class_log_priors = j.at("class_log_priors").get<std::vector<double>>();
  m.vocabularies = j.at("vocabularies").get<std::vector<std::vector<std::string>>>();
  m.log_likelihoods = j.at("log_likelihoods").get<std::vector<std::vector<std::vector<double>>>>();
  m.alpha = j.at("alpha");
  if (m.labels.size() != m.class_log_priors.size() || m.log_likelihoods.size() != m.vocabularies.size()) {
    throw SchemaError("naive Bayes model tables are inconsistent");
  }
}

NBModel fit_multinomial_nb(std::span<const CategoricalRow> rows, std::span<const int> labels, double alpha) {
  if (!(alpha > 0.0)) throw DomainError(fmt::format("fit_multinomial_nb: alpha must be > 0, got {}", alpha));
  if (rows.size() != labels.size()) throw DomainError("fit_multinomial_nb: rows and labels differ in length");
  if (rows.empty()) throw NumericError("fit_multinomial_nb: no training rows");
  const std::size_t n_features = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != n_features) throw DomainError("fit_multinomial_nb: rows differ in feature count");
  }

  NBModel model;
  model.alpha = alpha;
  const std::set<int> label_set(labels.begin(), labels.end());
  model.labels.assign(label_set.begin(), label_set.end());
  const std::size_t n_classes = model.labels.size();
  auto class_index = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(model.labels.begin(), model.labels.end(), label) -
                                    model.labels.begin());
  };

  std::vector<double> class_count(n_classes, 0.0);
  for (int l : labels) class_count[class_index(l)] += 1.0;
  for (double c : class_count) model.class_log_priors.push_back(std::log(c / static_cast<double>(rows.size())));

  for (std::size_t f = 0; f < n_features; ++f) {
    std::set<std::string> vocab;
    for (const auto& r : rows) vocab.insert(r[f]);
    model.vocabularies.emplace_back(vocab.begin(), vocab.end());
    const auto& v = model.vocabularies.back();
    const std::size_t slots = v.size() + 1;
    std::vector<std::vector<double>> counts(n_classes, std::vector<double>(slots, 0.0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto slot = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), rows[i][f]) - v.begin());
      counts[class_index(labels[i])][slot] += 1.0;
    }
    std::vector<std::vector<double>> table(n_classes, std::vector<double>(slots));
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double denom = class_count[c] + alpha * static_cast<double>(slots);
      for (std::size_t s = 0; s < slots; ++s) table[c][s] = std::log((counts[c][s] + alpha) / denom);
    }
    model.log_likelihoods.push_back(std::move(table));
  }
  return model;
}

namespace {

std::vector<double> log_joint(const NBModel& model, const CategoricalRow& row) {
  if (row.size() != model.n_features()) {
    throw DomainError(fmt::format("naive Bayes: expected {} features, got {}", model.n_features(), row.size()));
  }
  std::vector<double> scores = model.class_log_priors;
  for (std::size_t f = 0; f < row.size(); ++f) {
    const auto& v = model.vocabularies[f];
    auto it = std::lower_bound(v.begin(), v.end(), row[f]);
    const std::size_t slot = (it != v.end() && *it == row[f]) ? static_cast<std::size_t>(it - v.begin()) : v.size();
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += model.log_likelihoods[f][c][slot];
  }
  return scores;
}

}  // namespace

std::vector<double> nb_posteriors(const NBModel& model, const CategoricalRow& row) {
  std::vector<double> scores = log_joint(model, row);
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

NBPrediction predict_nb(const NBModel& model, const CategoricalRow& row) {
  const std::vector<double> scores = log_joint(model, row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best] ||
        (scores[c] == scores[best] && model.class_log_priors[c] > model.class_log_priors[best])) {
      best = c;
    }
  }
  return {model.labels[best], nb_posteriors(model, row)};
}

std::vector<int> predict_nb(const NBModel& model, std::span<const CategoricalRow> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict_nb(model, r).label);
  return out;
}

MajorityBaseline majority_baseline(std::span<const int> labels) {
  if (labels.empty()) throw NumericError("majority_baseline: no labels");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  MajorityBaseline out;
  std::size_t best = 0;
  for (const auto& [label, n] : counts) {
    if (n > best) {
      best = n;
      out.label = label;
    }
  }
  out.accuracy = static_cast<double>(best) / static_cast<double>(labels.size());
  return out;
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw DomainError("accuracy: length mismatch or empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace pricecast
