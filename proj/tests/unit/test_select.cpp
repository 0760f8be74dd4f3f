#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "pricecast/error.hpp"
#include "pricecast/select.hpp"
#include "support.hpp"

using namespace pricecast;
using doctest::Approx;

namespace {

void check_partition(const Folds& folds, std::size_t n) {
  std::vector<std::size_t> all;
  std::size_t lo = n, hi = 0;
  for (const auto& f : folds) {
    all.insert(all.end(), f.begin(), f.end());
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(n);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(hi - lo <= 1);
}

}  // namespace

TEST_CASE("kfold_split") {
  auto ten = kfold_split(10, 10, 1);
  for (const auto& f : ten) CHECK(f.size() == 1);
  auto three = kfold_split(10, 3, 1);
  std::vector<std::size_t> sizes;
  for (const auto& f : three) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{4, 3, 3});
  CHECK(kfold_split(10, 3, 1) == three);
  CHECK_THROWS_AS(kfold_split(3, 4, 1), DomainError);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.uniform_index(100);
    const std::size_t k = 2 + rng.uniform_index(n - 1);
    check_partition(kfold_split(n, k, t), n);
  }
}

TEST_CASE("group folds keep groups together") {
  std::vector<std::int64_t> groups;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) groups.push_back(static_cast<std::int64_t>(rng.uniform_index(23)));
  auto folds = group_kfold_split(groups, 5, 3);
  std::vector<int> fold_of(200, -1);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (auto i : folds[f]) fold_of[i] = static_cast<int>(f);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 200; ++j)
      if (groups[i] == groups[j]) CHECK(fold_of[i] == fold_of[j]);
  auto train = training_indices(folds, 0);
  CHECK(train.size() + folds[0].size() == 200);
  CHECK(std::is_sorted(train.begin(), train.end()));
}

TEST_CASE("r2_score") {
  std::vector<double> y = {1, 2, 3};
  CHECK(r2_score(y, y) == 1.0);
  CHECK(r2_score(y, std::vector<double>{2, 2, 2}) == 0.0);
  CHECK(r2_score(y, std::vector<double>{1, 2, 4}) == Approx(0.5));
  CHECK_THROWS_AS(r2_score(std::vector<double>{5, 5}, std::vector<double>{1, 2}), NumericError);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(10), b(10);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    CHECK(r2_score(a, b) <= 1.0);
  }
}

TEST_CASE("sample_params") {
  SearchSpace single;
  single.n_estimators_min = single.n_estimators_max = 150;
  single.max_features = {MaxFeatures::sqrt};
  single.max_depth = {12};
  single.min_samples_split = {5};
  single.min_samples_leaf = {2};
  single.bootstrap = {false};
  Rng rng(4);
  auto p = sample_params(single, rng);
  CHECK(p == HyperParams{150, MaxFeatures::sqrt, 12, 5, 2, false});

  SearchSpace grid;
  std::size_t boot = 0;
  std::set<std::optional<std::size_t>> depths;
  for (int i = 0; i < 10000; ++i) {
    auto q = sample_params(grid, rng);
    CHECK(grid.contains(q));
    boot += q.bootstrap;
    depths.insert(q.max_depth);
  }
  CHECK(boot >= 4500);
  CHECK(boot <= 5500);
  CHECK(depths.size() == 12);
}

TEST_CASE("search space json overrides") {
  SearchSpace s;
  from_json(nlohmann::json::parse(R"({"n_estimators": [10, 20], "bootstrap": [true]})"), s);
  CHECK(s.n_estimators_min == 10);
  CHECK(s.bootstrap == std::vector<bool>{true});
  CHECK(s.min_samples_leaf == std::vector<std::size_t>{1, 2, 4});
  nlohmann::json j = s;
  SearchSpace back;
  from_json(j, back);
  CHECK(back.n_estimators_max == 20);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"max_features": ["log2"]})"), s), SchemaError);
}

namespace {

struct Data {
  Matrix x;
  std::vector<double> y;
};

Data smooth(std::size_t n) {
  Rng rng(9);
  Data d{Matrix(n, 2), std::vector<double>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    d.x(r, 0) = rng.uniform01();
    d.x(r, 1) = rng.uniform01();
    d.y[r] = 3 * d.x(r, 0) + d.x(r, 1) * d.x(r, 1) + 0.05 * rng.normal();
  }
  return d;
}

SearchSpace small_space() {
  SearchSpace s;
  s.n_estimators_min = 3;
  s.n_estimators_max = 8;
  return s;
}

}  // namespace

TEST_CASE("randomized_search") {
  auto d = smooth(120);
  SearchOptions opt;
  opt.n_iter = 6;
  opt.folds = 4;
  opt.seed = 5;
  auto res = randomized_search(d.x, d.y, small_space(), opt);
  REQUIRE(res.ranked.size() == 6);
  CHECK(res.failed.empty());
  double best = -INFINITY;
  std::vector<double> means;
  for (std::size_t i = 0; i < res.ranked.size(); ++i) {
    const auto& t = res.ranked[i];
    CHECK(t.rank == i + 1);
    CHECK(t.fold_scores.size() == 4);
    const double mean = std::accumulate(t.fold_scores.begin(), t.fold_scores.end(), 0.0) / 4;
    CHECK(t.mean_score == Approx(mean));
    best = std::max(best, t.mean_score);
    means.push_back(t.mean_score);
    if (i) CHECK(res.ranked[i - 1].mean_score >= t.mean_score);
  }
  CHECK(res.ranked[0].mean_score == best);
  std::sort(means.begin(), means.end());
  CHECK(res.ranked[0].mean_score >= means[means.size() / 2]);

  auto again = randomized_search(d.x, d.y, small_space(), opt);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(again.ranked[i].params == res.ranked[i].params);
    CHECK(again.ranked[i].fold_scores == res.ranked[i].fold_scores);
  }

  opt.n_iter = 1;
  auto one = randomized_search(d.x, d.y, small_space(), opt);
  REQUIRE(one.ranked.size() == 1);
  CHECK(one.ranked[0].rank == 1);
}

TEST_CASE("failed trials are recorded, not ranked") {
  auto d = smooth(30);
  // Most folds see a constant target, where R2 is undefined.
  std::vector<double> y(30, 2.0);
  y[0] = 3.0;
  SearchOptions opt;
  opt.n_iter = 2;
  opt.folds = 3;
  auto res = randomized_search(d.x, y, small_space(), opt);
  CHECK(res.ranked.size() + res.failed.size() == 2);
  CHECK(res.failed.size() == 2);
  for (const auto& f : res.failed) CHECK_FALSE(f.reason.empty());
}

TEST_CASE("format_params and the top-3 block") {
  HyperParams p{131, MaxFeatures::automatic, std::nullopt, 5, 2, true};
  CHECK(format_params(p) ==
        "{'n_estimators': 131, 'min_samples_split': 5, 'min_samples_leaf': 2, 'max_features': 'auto', "
        "'max_depth': None, 'bootstrap': True}");
  SearchResult r;
  TrialResult t;
  t.params = p;
  t.mean_score = 0.98;
  t.std_score = 0.001;
  t.rank = 1;
  r.ranked.push_back(t);
  const auto text = format_top_trials(r);
  CHECK(text.find("Model with rank: 1\n") != std::string::npos);
  CHECK(text.find("Mean validation score: 0.980 (std: 0.001)\n") != std::string::npos);
  CHECK(text.find("Parameters: {'n_estimators': 131") != std::string::npos);
}

TEST_CASE("trees_curve") {
  auto d = smooth(150);
  HyperParams p;
  p.max_features = MaxFeatures::sqrt;
  TreesCurveOptions opt;
  opt.folds = 3;
  opt.seed = 2;
  std::vector<std::size_t> one = {1};
  auto single = trees_curve(d.x, d.y, p, one, opt);
  CHECK(single.size() == 1);
  std::vector<std::size_t> ns = {1, 5, 20};
  auto curve = trees_curve(d.x, d.y, p, ns, opt);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].test_rmse == single[0].test_rmse);
  CHECK(curve[2].test_rmse <= curve[0].test_rmse);
  auto again = trees_curve(d.x, d.y, p, ns, opt);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].test_rmse == curve[i].test_rmse);
}
