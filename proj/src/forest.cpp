#include "pricecast/forest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pricecast/error.hpp"

namespace pricecast {

namespace {

// Groups identical (row, target) pairs. unique[g] is the first row of group g,
// in order of first appearance; group_of[r] maps every row to its group.
struct RowGroups {
  std::vector<std::size_t> unique;
  std::vector<std::size_t> group_of;
  std::vector<double> multiplicity;
};

RowGroups group_rows(const Matrix& x, std::span<const double> y) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a), rb = x.row(b);
    for (std::size_t c = 0; c < ra.size(); ++c) {
      if (ra[c] != rb[c]) return ra[c] < rb[c];
    }
    if (y[a] != y[b]) return y[a] < y[b];
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);

  std::vector<std::size_t> first_of(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    auto same = [&](std::size_t a, std::size_t b) {
      const auto ra = x.row(a), rb = x.row(b);
      return std::equal(ra.begin(), ra.end(), rb.begin()) && y[a] == y[b];
    };
    while (j < n && same(order[i], order[j])) ++j;
    for (std::size_t k = i; k < j; ++k) first_of[order[k]] = order[i];
    i = j;
  }

  RowGroups g;
  g.group_of.resize(n);
  std::vector<std::size_t> group_index(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t head = first_of[r];
    if (group_index[head] == n) {
      group_index[head] = g.unique.size();
      g.unique.push_back(head);
      g.multiplicity.push_back(0.0);
    }
    g.group_of[r] = group_index[head];
    g.multiplicity[group_index[head]] += 1.0;
  }
  return g;
}

}  // namespace

Forest fit_forest(const Matrix& x, std::span<const double> y, const HyperParams& params, Task task,
                  std::uint64_t seed) {
  params.validate();
  if (x.rows() == 0) throw NumericError("fit_forest: no training rows");
  if (y.size() != x.rows()) throw DomainError("fit_forest: target length does not match row count");
  if (x.rows() > 0xFFFFFFFFu) throw DomainError("fit_forest: more than 2^32 - 1 rows");

  Forest forest;
  forest.task = task;
  forest.n_features = x.cols();
  forest.params = params;
  forest.seed = seed;
  if (task == Task::classification) forest.n_classes = detail::infer_classes(y);
  forest.feature_importances.assign(x.cols(), 0.0);

  const RowGroups groups = group_rows(x, y);
  const std::size_t n_unique = groups.unique.size();
  // Sort orders over unique rows, computed once; each tree filters them to its bag.
  const auto presorted = detail::sort_positions(x, groups.unique);
  const std::size_t per_split = features_per_split(params.max_features, task, x.cols());

  std::vector<double> counts(n_unique);
  std::vector<std::uint32_t> position_of(n_unique);
  forest.trees.reserve(params.n_estimators);
  // Without bootstrap and with every feature tried at every split, trees draw
  // nothing from their streams and come out identical.
  const bool identical_trees = !params.bootstrap && per_split == x.cols();
  std::vector<double> tree_importances(x.cols(), 0.0);
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    if (identical_trees && t > 0) {
      forest.trees.push_back(forest.trees.front());
      for (std::size_t f = 0; f < x.cols(); ++f) forest.feature_importances[f] += tree_importances[f];
      continue;
    }
    Rng rng = Rng::stream(seed, {t});
    if (params.bootstrap) {
      std::fill(counts.begin(), counts.end(), 0.0);
      const auto n = static_cast<std::uint32_t>(x.rows());
      for (std::uint32_t i = 0; i < n; ++i) counts[groups.group_of[rng.uniform_index32(n)]] += 1.0;
    } else {
      counts = groups.multiplicity;
    }
    detail::TrainingBag bag;
    for (std::size_t u = 0; u < n_unique; ++u) {
      if (counts[u] == 0.0) continue;
      position_of[u] = static_cast<std::uint32_t>(bag.rows.size());
      bag.rows.push_back(groups.unique[u]);
      bag.weights.push_back(counts[u]);
    }
    bag.sorted.resize(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      auto& order = bag.sorted[f];
      order.reserve(bag.rows.size());
      for (std::uint32_t u : presorted[f]) {
        if (counts[u] != 0.0) order.push_back(position_of[u]);
      }
    }
    FeatureSampler sampler(rng, per_split);
    std::fill(tree_importances.begin(), tree_importances.end(), 0.0);
    forest.trees.push_back(
        detail::grow_tree(x, y, forest.n_classes, params, task, std::move(bag), sampler, &tree_importances));
    for (std::size_t f = 0; f < x.cols(); ++f) forest.feature_importances[f] += tree_importances[f];
  }

  const double total = std::accumulate(forest.feature_importances.begin(), forest.feature_importances.end(), 0.0);
  if (total > 0.0) {
    for (double& v : forest.feature_importances) v /= total;
  } else {
    std::fill(forest.feature_importances.begin(), forest.feature_importances.end(), 0.0);
  }
  return forest;
}

std::vector<double> predict_proba(const Forest& forest, std::span<const double> row) {
  if (forest.task != Task::classification) throw DomainError("predict_proba: forest is not a classifier");
  std::vector<double> proba(forest.n_classes, 0.0);
  for (const auto& tree : forest.trees) {
    const TreeNode& leaf = tree.leaf_for(row);
    double total = 0.0;
    for (double c : leaf.class_counts) total += c;
    for (std::size_t c = 0; c < leaf.class_counts.size(); ++c) proba[c] += leaf.class_counts[c] / total;
  }
  for (double& p : proba) p /= static_cast<double>(forest.trees.size());
  return proba;
}

double predict_forest(const Forest& forest, std::span<const double> row, std::size_t n_trees) {
  if (row.size() != forest.n_features) {
    throw DomainError(fmt::format("predict_forest: expected {} features, got {}", forest.n_features, row.size()));
  }
  const std::size_t used = n_trees == 0 ? forest.trees.size() : std::min(n_trees, forest.trees.size());
  if (forest.task == Task::regression) {
    double sum = 0.0;
    for (std::size_t t = 0; t < used; ++t) sum += forest.trees[t].leaf_for(row).value;
    return sum / static_cast<double>(used);
  }
  std::vector<double> votes(forest.n_classes, 0.0);
  for (std::size_t t = 0; t < used; ++t) {
    const TreeNode& leaf = forest.trees[t].leaf_for(row);
    double total = 0.0;
    for (double c : leaf.class_counts) total += c;
    for (std::size_t c = 0; c < leaf.class_counts.size(); ++c) votes[c] += leaf.class_counts[c] / total;
  }
  // Strict comparison keeps the lowest index on ties.
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best]) best = c;
  }
  return static_cast<double>(best);
}

std::vector<double> predict_forest(const Forest& forest, const Matrix& x, std::size_t n_trees) {
  // Identical rows get identical predictions; evaluate each distinct row once.
  const std::size_t n = x.rows();
  std::vector<double> out(n);
  const auto values = x.data();
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    for (std::size_t r = 0; r < n; ++r) out[r] = predict_forest(forest, x.row(r), n_trees);
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a), rb = x.row(b);
    const auto diff = std::mismatch(ra.begin(), ra.end(), rb.begin());
    if (diff.first != ra.end()) return *diff.first < *diff.second;
    return a < b;
  });
  for (std::size_t i = 0; i < n;) {
    const auto head = x.row(order[i]);
    const double value = predict_forest(forest, head, n_trees);
    std::size_t j = i;
    while (j < n && std::ranges::equal(x.row(order[j]), head)) out[order[j++]] = value;
    i = j;
  }
  return out;
}

const std::vector<double>& feature_importances(const Forest& forest) { return forest.feature_importances; }

std::vector<std::pair<std::string, double>> ranked_importances(const Forest& forest,
                                                               std::span<const std::string> names) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < forest.feature_importances.size(); ++i) {
    out.emplace_back(i < names.size() ? names[i] : fmt::format("f{}", i), forest.feature_importances[i]);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

void to_json(nlohmann::json& j, const Forest& f) {
  j = {{"task", f.task == Task::regression ? "regression" : "classification"},
       {"n_features", f.n_features},
       {"n_classes", f.n_classes},
       {"params", f.params},
       {"seed", f.seed},
       {"feature_importances", f.feature_importances},
       {"trees", f.trees}};
}

void from_json(const nlohmann::json& j, Forest& f) {
  const std::string task = j.at("task");
  if (task != "regression" && task != "classification") throw SchemaError(fmt::format("unknown task '{}'", task));
  f.task = task == "regression" ? Task::regression : Task::classification;
  f.n_features = j.at("n_features");
  f.n_classes = j.at("n_classes");
  f.params = j.at("params").get<HyperParams>();
  f.seed = j.at("seed");
  f.feature_importances = j.at("feature_importances").get<std::vector<double>>();
  f.trees = j.at("trees").get<std::vector<Tree>>();
  if (f.trees.empty()) throw SchemaError("forest has no trees");
}

}  // namespace pricecast
