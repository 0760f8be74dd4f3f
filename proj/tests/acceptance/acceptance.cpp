// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "oracles.hpp"
#include "pricecast/balance.hpp"
#include "pricecast/csv.hpp"
#include "pricecast/features.hpp"
#include "pricecast/forest.hpp"
#include "pricecast/linear.hpp"
#include "pricecast/pipelines.hpp"
#include "pricecast/prob.hpp"
#include "pricecast/report.hpp"
#include "pricecast/select.hpp"
#include "support.hpp"

using namespace pricecast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("'") + PRICECAST_CLI + "' " + args + " >'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const std::filesystem::path kSample = PRICECAST_SAMPLE_DIR;

// ------------------------------------------------------------------ 1
Outcome split_oracle() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  std::size_t mismatches = 0, ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(29);
    const std::size_t p = 1 + rng.uniform_index(3);
    const Task task = trial % 2 ? Task::classification : Task::regression;
    Matrix x(n, p);
    std::vector<double> y(n);
    // Small integer grids make equal-gain candidates common.
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < p; ++c) x(r, c) = static_cast<double>(rng.uniform_int(0, 6));
      y[r] = static_cast<double>(rng.uniform_int(0, task == Task::regression ? 5 : 2));
    }
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), 0);
    const auto got = best_split(x, y, features, task);
    const auto want = oracle::best_split(x, y, features, task);
    if (want) {
      std::size_t at_max = 0;
      for (const auto& c : oracle::all_splits(x, y, features, task, 1))
        if (std::abs(c.gain - want->gain) <= 1e-9 * std::max(1.0, want->gain)) ++at_max;
      ties += at_max > 1;
    }
    const bool same = got.has_value() == want.has_value() &&
                      (!got || (got->feature == want->feature && got->threshold == want->threshold &&
                                std::abs(got->gain - want->gain) <= 1e-9 * std::max(1.0, want->gain)));
    mismatches += !same;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt::format("200 instances, {} mismatches, {} with tied maximum gain, {:.3f} s", mismatches, ties, secs)};
}

// ------------------------------------------------------------------ 2
Outcome ols_oracle() {
  Rng rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = testing::random_matrix(rng, 50, 5);
    std::vector<double> y(50);
    for (std::size_t r = 0; r < 50; ++r) {
      y[r] = 1.5 + 5 * rng.normal();
      for (std::size_t c = 0; c < 5; ++c) y[r] += (static_cast<double>(c) - 2.0) * x(r, c);
    }
    const auto model = fit_ols(x, y);
    const auto b = oracle::normal_equations(x, y);
    std::vector<double> got = {model.intercept};
    got.insert(got.end(), model.coefficients.begin(), model.coefficients.end());
    for (std::size_t i = 0; i < b.size(); ++i) {
      worst = std::max(worst, std::abs(got[i] - b[i]) / std::max(std::abs(b[i]), 1e-300));
    }
  }
  return {worst <= 1e-8, fmt::format("100 systems of 50x5, worst relative difference {:.3e}", worst)};
}

// ------------------------------------------------------------------ 3
Outcome downsample_oracle() {
  Rng rng(1003);
  std::size_t mismatches = 0, cases = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(11);
    const std::size_t target = 1 + rng.uniform_index(std::min<std::size_t>(5, n - 1));
    const std::size_t p = 1 + rng.uniform_index(3);
    Matrix m(n, p);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < p; ++c)
        m(r, c) = trial % 2 ? static_cast<double>(rng.uniform_int(0, 3)) : rng.normal();
    for (auto order : {DownsampleOrder::farthest_from_median, DownsampleOrder::nearest_to_median}) {
      BalanceConfig cfg;
      cfg.downsample_order = order;
      mismatches += downsample(m, target, cfg) != oracle::downsample(m, target, order);
      ++cases;
    }
  }
  return {mismatches == 0, fmt::format("500 trials x 2 orders, {} of {} cases differ", mismatches, cases)};
}

// ------------------------------------------------------------------ 4
Outcome balancing_scale() {
  Rng rng(1004);
  FeatureMatrix fm;
  fm.column_names = {"a", "b"};
  std::vector<std::size_t> sizes(7000);
  for (auto& s : sizes) s = 1 + rng.uniform_index(4000);
  sizes[0] = 1;
  sizes[1] = 4000;
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  fm.values = Matrix(total, 2);
  fm.target.resize(total);
  fm.listing_ids.resize(total);
  fm.row_dates.resize(total);
  // Listings are interleaved in blocks so grouping has real work to do.
  std::vector<std::int64_t> ids(7000);
  std::iota(ids.begin(), ids.end(), 1);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  std::size_t row = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t k = 0; k < sizes[g]; ++k, ++row) {
      fm.values(row, 0) = rng.normal();
      fm.values(row, 1) = rng.normal();
      fm.target[row] = rng.normal();
      fm.listing_ids[row] = ids[g];
    }
  }
  const auto t0 = Clock::now();
  const auto res = balance_dataset(fm);
  const double secs = seconds_since(t0);
  std::map<std::int64_t, std::size_t> counts;
  for (auto id : res.matrix.listing_ids) ++counts[id];
  std::map<std::size_t, std::size_t> spike;
  for (const auto& [_, c] : counts) ++spike[c];
  const bool ok = res.matrix.rows() == 700000 && counts.size() == 7000 && spike.size() == 1 &&
                  spike.begin()->first == 100 && secs < 60.0;
  return {ok, fmt::format("{} input rows -> {} rows, {} listings, group-size histogram {{{}: {}}}, {:.2f} s", total,
                          res.matrix.rows(), counts.size(), spike.begin()->first, spike.begin()->second, secs)};
}

// ------------------------------------------------------------ 5 and 6
struct Synthetic {
  Matrix x;
  std::vector<double> y;
};

// y depends on features 0, 2 and 4 only.
Synthetic piecewise_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Synthetic d{Matrix(n, 6), std::vector<double>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 6; ++c) d.x(r, c) = rng.uniform01();
    const double a = d.x(r, 0), b = d.x(r, 2), c = d.x(r, 4);
    double v = a < 0.3 ? 1.0 : (a < 0.7 ? 4.0 : 6.0);
    v += b < 0.5 ? 0.0 : 3.0;
    v += c < 0.25 ? -2.0 : (c < 0.6 ? 0.5 : 2.5);
    d.y[r] = v + 0.1 * rng.normal();
  }
  return d;
}

struct SearchState {
  Synthetic data;
  SearchResult search;
  bool ready = false;
};

SearchState& search_state() {
  static SearchState s;
  if (!s.ready) {
    s.data = piecewise_data(5000, 1005);
    SearchOptions opt;
    opt.n_iter = 20;
    opt.folds = 10;
    opt.seed = 1005;
    s.search = randomized_search(s.data.x, s.data.y, SearchSpace{}, opt);
    s.ready = true;
  }
  return s;
}

Outcome forest_quality() {
  const auto t0 = Clock::now();
  auto& s = search_state();
  if (s.search.ranked.empty()) return {false, "every trial failed"};
  const auto& best = s.search.ranked.front();
  const Forest forest = fit_forest(s.data.x, s.data.y, best.params, Task::regression, 1005);
  const std::vector<std::string> names = {"x0", "x1", "x2", "x3", "x4", "x5"};
  const auto ranked = ranked_importances(forest, names);
  std::set<std::string> top = {ranked[0].first, ranked[1].first, ranked[2].first};
  const bool informative = top == std::set<std::string>{"x0", "x2", "x4"};
  return {best.mean_score >= 0.9 && informative,
          fmt::format("rank-1 10-fold mean R2 {:.4f} (std {:.4f}), top-3 importances {} {:.3f}, {} {:.3f}, {} {:.3f}; "
                      "params {}; {:.1f} s",
                      best.mean_score, best.std_score, ranked[0].first, ranked[0].second, ranked[1].first,
                      ranked[1].second, ranked[2].first, ranked[2].second, format_params(best.params),
                      seconds_since(t0))};
}

Outcome trees_curve_property() {
  const auto t0 = Clock::now();
  auto& s = search_state();
  if (s.search.ranked.empty()) return {false, "every trial failed"};
  TreesCurveOptions opt;
  opt.folds = 10;
  opt.seed = 1006;
  const std::vector<std::size_t> ns = {1, 50};
  const auto curve = trees_curve(s.data.x, s.data.y, s.search.ranked.front().params, ns, opt);
  return {curve[1].test_rmse <= curve[0].test_rmse,
          fmt::format("held-out RMSE {:.4f} at 1 tree, {:.4f} at 50 trees; {:.1f} s", curve[0].test_rmse,
                      curve[1].test_rmse, seconds_since(t0))};
}

// ------------------------------------------------------------------ 7
Outcome gate_pipeline() {
  // Listings with a cleaning fee above 100 USD are repriced up and down between
  // snapshots; the rest keep a price that is exactly log-linear in their features.
  Rng rng(1007);
  std::vector<ListingRecord> records;
  std::map<std::int64_t, bool> designed_easy;
  const char* rooms[] = {"Entire home/apt", "Private room"};
  for (int id = 0; id < 400; ++id) {
    auto base = testing::listing(id, 0.0, rooms[rng.uniform_index(2)]);
    base.bedrooms = static_cast<int>(rng.uniform_index(4));
    base.bathrooms = 1.0 + 0.5 * static_cast<double>(rng.uniform_index(3));
    base.accommodates = 1 + base.bedrooms * 2;
    base.cleaning_fee = std::round(200 * rng.uniform01());
    base.latitude = 37.7 + 0.1 * rng.uniform01();
    base.longitude = -122.5 + 0.1 * rng.uniform01();
    const double log_price = 4.2 + 0.35 * base.bedrooms + 0.1 * base.bathrooms +
                             (base.room_type == "Private room" ? -0.5 : 0.0) + 0.8 * (base.latitude - 37.7);
    const bool easy = *base.cleaning_fee <= 100.0;
    designed_easy[id] = easy;
    for (int s = 0; s < 4; ++s) {
      auto r = base;
      const double shock = easy ? 0.0 : (s % 2 ? -0.9 : 0.9);
      r.price = std::expm1(log_price + shock);
      records.push_back(r);
    }
  }
  EncodingOptions enc;
  enc.outlier_rules = {1.0, 10};
  const auto spec = fit_encoding(records, enc);
  const auto matrix = encode(records, spec);
  const auto baseline = baseline_stage(matrix, 10, 1007, FoldMode::group);
  const auto labels = label_easy_hard(matrix.listing_ids, baseline.oof_errors_usd, 30.0);
  std::size_t agree = 0;
  for (const auto& l : labels) agree += l.easy == designed_easy.at(l.listing_id);
  const auto gate = train_gate(matrix, labels, default_gate_params(), 1007);

  const auto& buckets = baseline.buckets;
  bool monotone = true;
  for (std::size_t i = 1; i < buckets.cumulative_percentages.size(); ++i)
    monotone = monotone && buckets.cumulative_percentages[i] >= buckets.cumulative_percentages[i - 1];
  monotone = monotone && buckets.cumulative_percentages.back() <= 100.0;
  const bool format = buckets.thresholds == std::vector<double>{5, 10, 20, 30};
  const auto table = buckets_table("baseline_error_buckets", buckets);
  return {agree == labels.size() && gate.holdout_accuracy >= 0.9 && monotone && format,
          fmt::format("labels match the fee rule for {}/{} listings; gate held-out accuracy {:.4f} on {} rows; "
                      "buckets <=5 {:.2f}%, <=10 {:.2f}%, <=20 {:.2f}%, <=30 {:.2f}% (columns: {})",
                      agree, labels.size(), gate.holdout_accuracy, gate.holdout_rows,
                      buckets.cumulative_percentages[0], buckets.cumulative_percentages[1],
                      buckets.cumulative_percentages[2], buckets.cumulative_percentages[3],
                      fmt::join(table.header, ","))};
}

// ------------------------------------------------------------------ 8
std::vector<ListingRecord> availability_records(Rng& rng, const std::vector<bool>& high, bool zip_informative) {
  std::vector<ListingRecord> out;
  const char* zips_high[] = {"94110", "94122"};
  const char* zips_low[] = {"94103", "94133"};
  const char* zips_all[] = {"94103", "94110", "94122", "94133"};
  const char* rooms[] = {"Entire home/apt", "Private room"};
  for (std::size_t i = 0; i < high.size(); ++i) {
    std::string zip, room;
    if (zip_informative) {
      zip = high[i] ? zips_high[rng.uniform_index(2)] : zips_low[rng.uniform_index(2)];
      room = rooms[rng.uniform_index(2)];
    } else {
      // Every (zip, room) cell gets the same share of high listings.
      zip = zips_all[(i / 2) % 4];
      room = rooms[i % 2];
    }
    auto r = testing::listing(static_cast<std::int64_t>(i), 100.0, room, zip);
    const double frac = high[i] ? 0.8 + 0.1 * rng.uniform01() : 0.05 + 0.1 * rng.uniform01();
    r.availability_30 = static_cast<int>(std::round(frac * 30));
    r.availability_60 = static_cast<int>(std::round(frac * 60));
    r.availability_90 = static_cast<int>(std::round(frac * 90));
    r.availability_365 = static_cast<int>(std::round(frac * 365));
    out.push_back(r);
  }
  return out;
}

Outcome availability_pipeline() {
  Rng rng(1008);
  std::vector<bool> high(300);
  for (auto&& h : high) h = rng.uniform01() < 0.55;
  const auto informative = availability_records(rng, high, true);

  bool exact = true, ordered = true;
  std::string centroids;
  for (int window : {30, 60, 90, 365}) {
    std::vector<double> v;
    for (const auto& r : informative) v.push_back(normalize_availability(r.availability(window), window));
    const auto km = kmeans_1d(v, 2, 1008);
    const auto labels = split_low_high(km);
    for (std::size_t i = 0; i < labels.size(); ++i) exact = exact && (labels[i] == Availability::high) == high[i];
    ordered = ordered && km.centroids[0] < km.centroids[1];
    centroids += fmt::format(" w{} [{:.3f}, {:.3f}]", window, km.centroids[0], km.centroids[1]);
  }
  RunReport r1;
  const auto run1 = hypothesis2_run(informative, AvailabilityConfig{}, r1);
  ordered = ordered && run1.model.centroid_low < run1.model.centroid_high;
  const double lift = run1.model.nb_accuracy - run1.model.majority.accuracy;

  // 8 cells of 40 listings, 24 high in each.
  std::vector<bool> flat(320);
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = (i / 8) % 5 < 3;
  const auto uninformative = availability_records(rng, flat, false);
  RunReport r2;
  const auto run2 = hypothesis2_run(uninformative, AvailabilityConfig{}, r2);
  const double gap = std::abs(run2.model.nb_accuracy - run2.model.majority.accuracy);

  return {exact && ordered && lift >= 0.2 && gap <= 0.01,
          fmt::format("membership exact: {}; centroids{}; informative NB {:.4f} vs majority {:.4f}; uninformative NB "
                      "{:.4f} vs majority {:.4f}",
                      exact ? "yes" : "no", centroids, run1.model.nb_accuracy, run1.model.majority.accuracy,
                      run2.model.nb_accuracy, run2.model.majority.accuracy)};
}

// ------------------------------------------------------------------ 9
Outcome metric_identities() {
  Rng rng(1009);
  double worst_r2_one = 0, worst_r2_zero = 0, worst_rmse = 0, worst_mape = 0, worst_post = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.uniform_index(200);
    std::vector<double> y(n);
    for (auto& v : y) v = 1.0 + std::exp(3 * rng.normal());
    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    const std::vector<double> flat(n, mean);
    worst_r2_one = std::max(worst_r2_one, std::abs(r2_score(y, y) - 1.0));
    worst_r2_zero = std::max(worst_r2_zero, std::abs(r2_score(y, flat)));
    worst_rmse = std::max(worst_rmse, rmse(y, y));
    worst_mape = std::max(worst_mape, mape(y, y));

    std::vector<CategoricalRow> rows;
    std::vector<int> labels;
    const std::size_t classes = 2 + rng.uniform_index(3);
    for (std::size_t i = 0; i < 30; ++i) {
      rows.push_back({std::to_string(rng.uniform_index(6)), std::to_string(rng.uniform_index(4))});
      labels.push_back(static_cast<int>(i < classes ? i : rng.uniform_index(classes)));
    }
    const auto nb = fit_multinomial_nb(rows, labels, 0.1 + 2 * rng.uniform01());
    const CategoricalRow query = {std::to_string(rng.uniform_index(8)), std::to_string(rng.uniform_index(5))};
    const auto post = nb_posteriors(nb, query);
    double sum = 0;
    for (double p : post) sum += p;
    worst_post = std::max(worst_post, std::abs(sum - 1.0));
  }
  // r2 against the mean is 0 up to the rounding of the mean itself.
  const bool ok = worst_r2_one == 0 && worst_r2_zero <= 1e-12 && worst_rmse == 0 && worst_mape == 0 &&
                  worst_post <= 1e-12;
  return {ok, fmt::format("1000 vectors: |r2(y,y)-1| {:.1e}, |r2(y,mean)| {:.1e}, rmse(y,y) {:.1e}, mape(y,y) {:.1e}, "
                          "posterior sum error {:.1e}",
                          worst_r2_one, worst_r2_zero, worst_rmse, worst_mape, worst_post)};
}

// ----------------------------------------------------------------- 10
Outcome train_determinism() {
  const auto dir = testing::temp_dir("acceptance_train");
  const auto out = dir / "out";
  const std::string args =
      "train --seed 7 --no-timestamp --listings " + quoted(kSample / "listings.csv") + " --out " + quoted(out);
  std::vector<std::string> models, reports;
  std::vector<double> times;
  for (int i = 0; i < 2; ++i) {
    const auto t0 = Clock::now();
    const int code = run_cli(args, dir / fmt::format("log{}", i));
    times.push_back(seconds_since(t0));
    if (code != 0) return {false, fmt::format("run {} exited {}: {}", i + 1, code, slurp(dir / fmt::format("log{}", i)))};
    models.push_back(slurp(out / "model.json"));
    reports.push_back(slurp(out / "report.json"));
    std::filesystem::remove(out / "model.json");
    std::filesystem::remove(out / "report.json");
  }
  const bool same = models[0] == models[1] && reports[0] == reports[1] && !models[0].empty();
  const bool null_stamp = nlohmann::json::parse(reports[0])["meta"]["generated_at"].is_null();
  const bool fast = times[0] < 30.0 && times[1] < 30.0;
  return {same && null_stamp && fast,
          fmt::format("model.json {} bytes {}, report.json {} bytes {}, runs {:.1f} s and {:.1f} s", models[0].size(),
                      models[0] == models[1] ? "identical" : "DIFFERENT", reports[0].size(),
                      reports[0] == reports[1] ? "identical" : "DIFFERENT", times[0], times[1])};
}

// ----------------------------------------------------------------- 11
Outcome tune_format() {
  const auto dir = testing::temp_dir("acceptance_tune");
  const int code = run_cli("tune --seed 7 --listings " + quoted(kSample / "listings.csv") + " --out " + quoted(dir / "out"),
                           dir / "log");
  const std::string text = slurp(dir / "log");
  if (code != 0) return {false, fmt::format("tune exited {}: {}", code, text)};

  const std::regex block(
      "Model with rank: (\\d+)\\nMean validation score: (-?\\d+\\.\\d{3}) \\(std: (\\d+\\.\\d{3})\\)\\n"
      "Parameters: \\{'n_estimators': (\\d+), 'min_samples_split': (\\d+), 'min_samples_leaf': (\\d+), "
      "'max_features': '(auto|sqrt)', 'max_depth': (None|\\d+), 'bootstrap': (True|False)\\}\\n");
  std::size_t blocks = 0;
  bool ranks_in_order = true;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), block); it != std::sregex_iterator(); ++it) {
    ++blocks;
    ranks_in_order = ranks_in_order && std::stoul((*it)[1]) == blocks;
  }

  const SearchSpace grid;
  const auto ranked = nlohmann::json::parse(slurp(dir / "out" / "search_ranked.json"));
  std::size_t trials = 0, outside = 0;
  for (const auto& t : ranked) {
    ++trials;
    outside += !grid.contains(t.at("params").get<HyperParams>());
  }
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  for (const auto& f : report["search"]["failed"]) {
    ++trials;
    outside += !grid.contains(f.at("params").get<HyperParams>());
  }
  const bool ok = blocks == 3 && ranks_in_order && trials == 100 && outside == 0;
  return {ok, fmt::format("{} top-3 blocks in the expected layout, {} sampled trials, {} outside the grid", blocks,
                          trials, outside)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"best_split equals exhaustive brute force", split_oracle},
      {"fit_ols equals the normal equations", ols_oracle},
      {"downsample equals sorted (distance, index) selection", downsample_oracle},
      {"balancing 7,000 listings to 100 rows each", balancing_scale},
      {"tuned forest quality on piecewise synthetic data", forest_quality},
      {"held-out RMSE at 50 trees <= at 1 tree", trees_curve_property},
      {"gate classifier and error buckets", gate_pipeline},
      {"availability clustering and naive Bayes", availability_pipeline},
      {"metric identities", metric_identities},
      {"train --seed 7 is byte-reproducible", train_determinism},
      {"tune top-3 layout and grid membership", tune_format},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed;
}
