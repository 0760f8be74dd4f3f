#include "pricecast/select.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pricecast/error.hpp"
#include "pricecast/report.hpp"

namespace pricecast {

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

}  // namespace

Folds kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DomainError(fmt::format("kfold_split: k must be >= 2, got {}", k));
  if (k > n) throw DomainError(fmt::format("kfold_split: k = {} exceeds n = {}", k, n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, {0xF01D});
  shuffle(perm, rng);
  Folds folds;
  std::size_t start = 0;
  for (std::size_t size : fold_sizes(n, k)) {
    folds.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                       perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(folds.back().begin(), folds.back().end());
    start += size;
  }
  return folds;
}

Folds group_kfold_split(std::span<const std::int64_t> groups, std::size_t k, std::uint64_t seed) {
  std::map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  if (k < 2) throw DomainError(fmt::format("group_kfold_split: k must be >= 2, got {}", k));
  if (k > members.size()) {
    throw DomainError(fmt::format("group_kfold_split: k = {} exceeds {} groups", k, members.size()));
  }
  std::vector<std::int64_t> ids;
  for (const auto& [id, _] : members) ids.push_back(id);
  Rng rng = Rng::stream(seed, {0x6F01D});
  shuffle(ids, rng);
  Folds folds;
  std::size_t start = 0;
  for (std::size_t size : fold_sizes(ids.size(), k)) {
    std::vector<std::size_t> fold;
    for (std::size_t g = start; g < start + size; ++g) {
      const auto& rows = members[ids[g]];
      fold.insert(fold.end(), rows.begin(), rows.end());
    }
    std::sort(fold.begin(), fold.end());
    folds.push_back(std::move(fold));
    start += size;
  }
  return folds;
}

Folds make_folds(std::size_t n, std::size_t k, std::uint64_t seed, FoldMode mode,
                 std::span<const std::int64_t> groups) {
  if (mode == FoldMode::row) return kfold_split(n, k, seed);
  if (groups.size() != n) throw DomainError("group folds need one group id per row");
  return group_kfold_split(groups, k, seed);
}

std::vector<std::size_t> training_indices(const Folds& folds, std::size_t held_out) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw DomainError("r2_score: length mismatch");
  if (y_true.size() < 2) throw DomainError("r2_score: need at least 2 values");
  if (std::all_of(y_true.begin(), y_true.end(), [&](double v) { return v == y_true.front(); })) {
    throw NumericError("r2_score: undefined for constant y_true");
  }
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

void SearchSpace::validate() const {
  if (n_estimators_min < 1 || n_estimators_min > n_estimators_max) {
    throw DomainError("search space: n_estimators range must satisfy 1 <= min <= max");
  }
  if (max_features.empty() || max_depth.empty() || min_samples_split.empty() || min_samples_leaf.empty() ||
      bootstrap.empty()) {
    throw DomainError("search space: every dimension needs at least one option");
  }
  for (std::size_t s : min_samples_split) {
    if (s < 2) throw DomainError("search space: min_samples_split options must be >= 2");
  }
  for (std::size_t l : min_samples_leaf) {
    if (l < 1) throw DomainError("search space: min_samples_leaf options must be >= 1");
  }
}

bool SearchSpace::contains(const HyperParams& p) const {
  auto in = [](const auto& options, const auto& v) { return std::find(options.begin(), options.end(), v) != options.end(); };
  return p.n_estimators >= n_estimators_min && p.n_estimators <= n_estimators_max && in(max_features, p.max_features) &&
         in(max_depth, p.max_depth) && in(min_samples_split, p.min_samples_split) &&
         in(min_samples_leaf, p.min_samples_leaf) && in(bootstrap, p.bootstrap);
}

void to_json(nlohmann::json& j, const SearchSpace& s) {
  nlohmann::json mf = nlohmann::json::array();
  for (auto m : s.max_features) mf.push_back(m == MaxFeatures::sqrt ? "sqrt" : "auto");
  nlohmann::json md = nlohmann::json::array();
  for (const auto& d : s.max_depth) md.push_back(d ? nlohmann::json(*d) : nlohmann::json(nullptr));
  j = {{"n_estimators", {s.n_estimators_min, s.n_estimators_max}},
       {"max_features", mf},
       {"max_depth", md},
       {"min_samples_split", s.min_samples_split},
       {"min_samples_leaf", s.min_samples_leaf},
       {"bootstrap", s.bootstrap}};
}

void from_json(const nlohmann::json& j, SearchSpace& s) {
  if (j.contains("n_estimators")) {
    const auto& r = j.at("n_estimators");
    if (!r.is_array() || r.size() != 2) throw SchemaError("search space: n_estimators must be [min, max]");
    s.n_estimators_min = r[0];
    s.n_estimators_max = r[1];
  }
  if (j.contains("max_features")) {
    s.max_features.clear();
    for (const auto& m : j.at("max_features")) {
      const std::string v = m;
      if (v == "auto") {
        s.max_features.push_back(MaxFeatures::automatic);
      } else if (v == "sqrt") {
        s.max_features.push_back(MaxFeatures::sqrt);
      } else {
        throw SchemaError(fmt::format("search space: unknown max_features '{}'", v));
      }
    }
  }
  if (j.contains("max_depth")) {
    s.max_depth.clear();
    for (const auto& d : j.at("max_depth")) {
      s.max_depth.push_back(d.is_null() ? std::nullopt : std::optional<std::size_t>(d.get<std::size_t>()));
    }
  }
  if (j.contains("min_samples_split")) s.min_samples_split = j.at("min_samples_split").get<std::vector<std::size_t>>();
  if (j.contains("min_samples_leaf")) s.min_samples_leaf = j.at("min_samples_leaf").get<std::vector<std::size_t>>();
  if (j.contains("bootstrap")) s.bootstrap = j.at("bootstrap").get<std::vector<bool>>();
  s.validate();
}

HyperParams sample_params(const SearchSpace& space, Rng& rng) {
  auto pick = [&rng](const auto& options) { return options[rng.uniform_index(options.size())]; };
  HyperParams p;
  p.n_estimators = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(space.n_estimators_min),
                                                            static_cast<std::int64_t>(space.n_estimators_max)));
  p.max_features = pick(space.max_features);
  p.max_depth = pick(space.max_depth);
  p.min_samples_split = pick(space.min_samples_split);
  p.min_samples_leaf = pick(space.min_samples_leaf);
  p.bootstrap = pick(space.bootstrap);
  return p;
}

SearchResult randomized_search(const Matrix& x, std::span<const double> y, const SearchSpace& space,
                               const SearchOptions& options) {
  space.validate();
  if (options.n_iter < 1) throw DomainError("randomized_search: n_iter must be >= 1");
  if (y.size() != x.rows()) throw DomainError("randomized_search: target length does not match row count");
  const Folds folds = make_folds(x.rows(), options.folds, options.seed, options.fold_mode, options.groups);

  // Fold matrices are shared by every trial.
  std::vector<Matrix> train_x, test_x;
  std::vector<std::vector<double>> train_y, test_y;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = training_indices(folds, f);
    train_x.push_back(x.select_rows(train));
    train_y.push_back(select<double>(y, train));
    test_x.push_back(x.select_rows(folds[f]));
    test_y.push_back(select<double>(y, folds[f]));
  }

  Rng sampler = Rng::stream(options.seed, {0x5EA4C4});
  SearchResult result;
  std::vector<TrialResult> trials;
  for (std::size_t t = 0; t < options.n_iter; ++t) {
    const HyperParams params = sample_params(space, sampler);
    TrialResult trial;
    trial.params = params;
    trial.trial_index = t;
    try {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::uint64_t forest_seed = splitmix64(options.seed ^ splitmix64((t << 16) + f + 1));
        const Forest forest = fit_forest(train_x[f], train_y[f], params, Task::regression, forest_seed);
        trial.fold_scores.push_back(r2_score(test_y[f], predict_forest(forest, test_x[f])));
      }
    } catch (const Error& e) {
      result.failed.push_back({params, t, e.what()});
      continue;
    }
    const double n = static_cast<double>(trial.fold_scores.size());
    trial.mean_score = std::accumulate(trial.fold_scores.begin(), trial.fold_scores.end(), 0.0) / n;
    double var = 0.0;
    for (double s : trial.fold_scores) var += (s - trial.mean_score) * (s - trial.mean_score);
    trial.std_score = std::sqrt(var / n);
    trials.push_back(std::move(trial));
  }
  std::stable_sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
    if (a.std_score != b.std_score) return a.std_score < b.std_score;
    return a.trial_index < b.trial_index;
  });
  for (std::size_t i = 0; i < trials.size(); ++i) trials[i].rank = i + 1;
  result.ranked = std::move(trials);
  return result;
}

void to_json(nlohmann::json& j, const TrialResult& t) {
  j = {{"rank", t.rank},
       {"trial_index", t.trial_index},
       {"mean_score", t.mean_score},
       {"std_score", t.std_score},
       {"fold_scores", t.fold_scores},
       {"params", t.params}};
}

std::string format_params(const HyperParams& p) {
  return fmt::format(
      "{{'n_estimators': {}, 'min_samples_split': {}, 'min_samples_leaf': {}, 'max_features': '{}', "
      "'max_depth': {}, 'bootstrap': {}}}",
      p.n_estimators, p.min_samples_split, p.min_samples_leaf, p.max_features == MaxFeatures::sqrt ? "sqrt" : "auto",
      p.max_depth ? std::to_string(*p.max_depth) : "None", p.bootstrap ? "True" : "False");
}

std::string format_top_trials(const SearchResult& result, std::size_t top) {
  std::string out;
  for (std::size_t i = 0; i < std::min(top, result.ranked.size()); ++i) {
    const auto& t = result.ranked[i];
    if (i) out += '\n';
    out += fmt::format("Model with rank: {}\nMean validation score: {:.3f} (std: {:.3f})\nParameters: {}\n", t.rank,
                       t.mean_score, t.std_score, format_params(t.params));
  }
  return out;
}

std::vector<TreesCurvePoint> trees_curve(const Matrix& x, std::span<const double> y, const HyperParams& params,
                                         std::span<const std::size_t> n_list, const TreesCurveOptions& options) {
  if (n_list.empty()) return {};
  for (std::size_t n : n_list) {
    if (n < 1) throw DomainError("trees_curve: tree counts must be >= 1");
  }
  const Folds folds = make_folds(x.rows(), options.folds, options.seed, options.fold_mode, options.groups);
  HyperParams grown = params;
  grown.n_estimators = *std::max_element(n_list.begin(), n_list.end());
  auto out_space = [&](std::span<const double> v) {
    std::vector<double> o(v.begin(), v.end());
    if (options.to_output) {
      for (double& e : o) e = options.to_output(e);
    }
    return o;
  };

  std::vector<TreesCurvePoint> points(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) points[i].n_trees = n_list[i];
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = training_indices(folds, f);
    const Matrix train_x = x.select_rows(train), test_x = x.select_rows(folds[f]);
    const auto train_y = select<double>(y, train), test_y = select<double>(y, folds[f]);
    const Forest forest =
        fit_forest(train_x, train_y, grown, Task::regression, splitmix64(options.seed ^ splitmix64(f + 1)));
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      points[i].train_rmse += rmse(out_space(train_y), out_space(predict_forest(forest, train_x, n_list[i])));
      points[i].test_rmse += rmse(out_space(test_y), out_space(predict_forest(forest, test_x, n_list[i])));
    }
  }
  for (auto& p : points) {
    p.train_rmse /= static_cast<double>(folds.size());
    p.test_rmse /= static_cast<double>(folds.size());
  }
  return points;
}

}  // namespace pricecast
