#include "pricecast/pipelines.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "pricecast/csv.hpp"
#include "pricecast/error.hpp"
#include "pricecast/rng.hpp"

namespace pricecast {

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw_error(e.kind(), fmt::format("stage '{}': {}", name, e.what()));
  }
}

std::vector<double> to_usd(std::span<const double> log_prices) {
  std::vector<double> out(log_prices.size());
  std::transform(log_prices.begin(), log_prices.end(), out.begin(), [](double v) { return std::expm1(v); });
  return out;
}

nlohmann::json buckets_json(const ErrorBucketTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.thresholds.size(); ++i) {
    rows.push_back({{"error_at_most_usd", t.thresholds[i]}, {"cumulative_percent", t.cumulative_percentages[i]}});
  }
  return rows;
}

// Price-space metrics; MAPE skips rows with a zero price.
nlohmann::json price_metrics(std::span<const double> truth_usd, std::span<const double> pred_usd) {
  std::vector<double> errors(truth_usd.size());
  std::vector<double> pos_truth, pos_pred;
  for (std::size_t i = 0; i < truth_usd.size(); ++i) {
    errors[i] = std::abs(pred_usd[i] - truth_usd[i]);
    if (truth_usd[i] > 0.0) {
      pos_truth.push_back(truth_usd[i]);
      pos_pred.push_back(pred_usd[i]);
    }
  }
  nlohmann::json j = {{"rows", truth_usd.size()},
                      {"rmse_usd", rmse(truth_usd, pred_usd)},
                      {"mae_usd", mae(truth_usd, pred_usd)},
                      {"mape_percent", pos_truth.empty() ? nlohmann::json(nullptr) : nlohmann::json(mape(pos_truth, pos_pred))},
                      {"mape_rows", pos_truth.size()},
                      {"error_buckets", buckets_json(error_buckets(errors))}};
  return j;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

// ---------------------------------------------------------------- exploration

void run_eda(std::span<const ListingRecord> listings, std::span<const CalendarEntry> calendar,
             const EdaConfig& config, RunReport& report) {
  if (listings.empty()) throw NumericError("eda: no listings");
  std::vector<double> price, log_price, bedrooms, lat, lon;
  for (const auto& r : listings) {
    price.push_back(r.price);
    log_price.push_back(log1p_transform(r.price));
    bedrooms.push_back(r.bedrooms);
    lat.push_back(r.latitude);
    lon.push_back(r.longitude);
  }
  nlohmann::json eda;
  eda["listing_rows"] = listings.size();
  std::set<std::int64_t> ids;
  for (const auto& r : listings) ids.insert(r.listing_id);
  eda["unique_listings"] = ids.size();
  eda["price_usd"] = {{"min", *std::min_element(price.begin(), price.end())},
                      {"median", median(price)},
                      {"q95", empirical_quantile(price, 0.95)},
                      {"max", *std::max_element(price.begin(), price.end())}};
  const auto below4 = std::count_if(bedrooms.begin(), bedrooms.end(), [](double b) { return b < 4; });
  eda["share_bedrooms_below_4"] = static_cast<double>(below4) / static_cast<double>(bedrooms.size());

  report.figures.push_back(histogram_table("eda_price_histogram", histogram(price, 50)));
  report.figures.push_back(histogram_table("eda_log_price_histogram", histogram(log_price, 50)));
  {
    const double top = *std::max_element(bedrooms.begin(), bedrooms.end());
    std::vector<double> edges;
    for (double e = 0.0; e <= top + 1.0; e += 1.0) edges.push_back(e);
    report.figures.push_back(histogram_table("eda_bedrooms_histogram", histogram(bedrooms, edges)));
  }

  // Correlation screen over price and the numeric attributes (absent fees as 0).
  const std::vector<std::string> columns = {"price",        "accommodates",     "bathrooms",   "bedrooms",
                                            "cleaning_fee", "security_deposit", "extra_people"};
  std::vector<std::vector<double>> data(columns.size());
  for (const auto& r : listings) {
    for (std::size_t c = 0; c < columns.size(); ++c) data[c].push_back(numeric_field(r, columns[c]).value_or(0.0));
  }
  nlohmann::json corr = nlohmann::json::object();
  FigureTable corr_table{"eda_correlation", {"column_a", "column_b", "pearson"}, {}};
  nlohmann::json strong = nlohmann::json::array();
  for (std::size_t a = 0; a < columns.size(); ++a) {
    for (std::size_t b = a + 1; b < columns.size(); ++b) {
      nlohmann::json value = nullptr;
      try {
        const double r = pearson_correlation(data[a], data[b]);
        value = r;
        if (std::abs(r) > 0.5) strong.push_back({columns[a], columns[b]});
        corr_table.rows.push_back({columns[a], columns[b], format_double(r)});
      } catch (const Error&) {
        corr_table.rows.push_back({columns[a], columns[b], ""});
      }
      corr[columns[a] + "~" + columns[b]] = value;
    }
  }
  eda["pearson"] = corr;
  eda["strong_correlations_abs_gt_0_5"] = strong;
  report.figures.push_back(corr_table);

  const HeatmapGrid grid = heatmap_grid(lat, lon, price, config.heatmap_bins, config.heatmap_bins, config.heatmap_stat);
  report.figures.push_back(heatmap_table("eda_price_heatmap", grid));
  eda["heatmap"] = {{"bins", config.heatmap_bins},
                    {"statistic", config.heatmap_stat == CellStatistic::median ? "median" : "mean"}};

  if (!calendar.empty()) {
    try {
      const auto raw = weekend_median_comparison(calendar, false, config.seed, config.weekend);
      const auto bal = weekend_median_comparison(calendar, true, config.seed, config.weekend);
      eda["weekend_medians"] = {
          {"imbalanced", {{"weekday_median_usd", raw.weekday_median}, {"weekend_median_usd", raw.weekend_median},
                          {"weekday_nights", raw.weekday_count}, {"weekend_nights", raw.weekend_count}}},
          {"balanced", {{"weekday_median_usd", bal.weekday_median}, {"weekend_median_usd", bal.weekend_median},
                        {"weekday_nights", bal.weekday_count}, {"weekend_nights", bal.weekend_count}}}};
      report.figures.push_back(FigureTable{"eda_weekend_medians",
                                           {"dataset", "weekday_median_usd", "weekend_median_usd"},
                                           {{"imbalanced", format_double(raw.weekday_median), format_double(raw.weekend_median)},
                                            {"balanced", format_double(bal.weekday_median), format_double(bal.weekend_median)}}});
    } catch (const NumericError& e) {
      report.warnings.push_back(fmt::format("weekend comparison skipped: {}", e.what()));
    }
  }
  report.set_section("eda", std::move(eda));
}

// ----------------------------------------------------------- price hypothesis

BaselineResult baseline_stage(const FeatureMatrix& matrix, std::size_t k, std::uint64_t seed, FoldMode mode) {
  const std::size_t n = matrix.rows();
  const Folds folds = make_folds(n, k, seed, mode, matrix.listing_ids);
  std::vector<double> oof(n);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = training_indices(folds, f);
    const LinearModel m = fit_ols_reduced(matrix.values.select_rows(train), select<double>(matrix.target, train));
    for (std::size_t r : folds[f]) oof[r] = predict_linear(m, matrix.values.row(r));
  }
  BaselineResult result;
  result.model = fit_ols_reduced(matrix.values, matrix.target);
  const auto truth = to_usd(matrix.target);
  const auto pred = to_usd(oof);
  result.oof_errors_usd.resize(n);
  std::vector<double> pos_truth, pos_pred;
  for (std::size_t i = 0; i < n; ++i) {
    result.oof_errors_usd[i] = std::abs(pred[i] - truth[i]);
    if (!std::isfinite(result.oof_errors_usd[i])) throw NumericError(fmt::format("baseline: non-finite prediction for row {}", i));
    if (truth[i] > 0.0) {
      pos_truth.push_back(truth[i]);
      pos_pred.push_back(pred[i]);
    }
  }
  result.rmse_usd = rmse(truth, pred);
  result.mape_rows = pos_truth.size();
  result.mape_percent = pos_truth.empty() ? 0.0 : mape(pos_truth, pos_pred);
  result.buckets = error_buckets(result.oof_errors_usd);
  return result;
}

std::vector<GateLabel> label_easy_hard(std::span<const std::int64_t> listing_ids, std::span<const double> errors,
                                       double threshold_usd) {
  if (listing_ids.size() != errors.size()) throw DomainError("label_easy_hard: length mismatch");
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    auto& [sum, count] = acc[listing_ids[i]];
    sum += errors[i];
    ++count;
  }
  std::vector<GateLabel> labels;
  for (const auto& [id, sc] : acc) {
    const double mean = sc.first / static_cast<double>(sc.second);
    labels.push_back({id, mean, mean <= threshold_usd, threshold_usd});
  }
  return labels;
}

HyperParams default_gate_params() {
  HyperParams p;
  p.n_estimators = 100;
  p.max_features = MaxFeatures::automatic;
  return p;
}

GateResult train_gate(const FeatureMatrix& matrix, std::span<const GateLabel> labels, const HyperParams& params,
                      std::uint64_t seed, double holdout_fraction) {
  if (matrix.rows() == 0) throw NumericError("gate: empty matrix");
  std::map<std::int64_t, bool> easy;
  for (const auto& l : labels) easy[l.listing_id] = l.easy;
  std::vector<double> y(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    auto it = easy.find(matrix.listing_ids[i]);
    if (it == easy.end()) throw DomainError(fmt::format("gate: no label for listing {}", matrix.listing_ids[i]));
    y[i] = it->second ? kEasy : kHard;
  }

  GateResult result;
  std::vector<std::int64_t> ids;
  for (const auto& [id, _] : easy) ids.push_back(id);
  Rng rng = Rng::stream(seed, {0x6A7E});
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  const auto held = ids.size() < 2 ? std::size_t{0}
                                   : std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(
                                                                 holdout_fraction * static_cast<double>(ids.size()))),
                                                             1, ids.size() - 1);
  const std::set<std::int64_t> holdout(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    (holdout.contains(matrix.listing_ids[i]) ? test_rows : train_rows).push_back(i);
  }
  if (test_rows.empty()) test_rows = train_rows;
  {
    const Forest probe = fit_forest(matrix.values.select_rows(train_rows), select<double>(y, train_rows), params,
                                    Task::classification, splitmix64(seed ^ 0x6A7E));
    const auto pred = predict_forest(probe, matrix.values.select_rows(test_rows));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test_rows.size(); ++i) hits += pred[i] == y[test_rows[i]];
    result.holdout_accuracy = static_cast<double>(hits) / static_cast<double>(test_rows.size());
    result.holdout_rows = test_rows.size();
  }
  result.forest = fit_forest(matrix.values, y, params, Task::classification, seed);

  for (std::size_t c = 0; c < matrix.values.cols(); ++c) {
    const std::string& name = matrix.column_names.at(c);
    if (name.find('=') != std::string::npos) continue;
    const auto column = matrix.values.column(c);
    const Histogram all = histogram(column, 10);
    std::vector<double> easy_values, hard_values;
    for (std::size_t i = 0; i < column.size(); ++i) (y[i] == kEasy ? easy_values : hard_values).push_back(column[i]);
    const Histogram he = histogram(easy_values, all.edges), hh = histogram(hard_values, all.edges);
    FigureTable t{"gate_distribution_" + sanitize(name), {"bin_lower", "bin_upper", "easy_count", "hard_count"}, {}};
    for (std::size_t b = 0; b < all.counts.size(); ++b) {
      t.rows.push_back({format_double(all.edges[b]), format_double(all.edges[b + 1]), std::to_string(he.counts[b]),
                        std::to_string(hh.counts[b])});
    }
    result.distributions.push_back(std::move(t));
  }
  return result;
}

std::string fingerprint(const FeatureMatrix& matrix) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ull;
    }
  };
  const auto values = matrix.values.data();
  mix(values.data(), values.size_bytes());
  mix(matrix.target.data(), matrix.target.size() * sizeof(double));
  mix(matrix.listing_ids.data(), matrix.listing_ids.size() * sizeof(std::int64_t));
  return fmt::format("{:016x}", h);
}

void to_json(nlohmann::json& j, const PricePipelineModel& m) {
  j = {{"schema_version", kSchemaVersion},
       {"kind", "price_pipeline"},
       {"encoding", m.encoding},
       {"baseline", m.baseline},
       {"gate", m.gate},
       {"price_model", m.price_model},
       {"chosen_params", m.chosen_params},
       {"metadata",
        {{"seed", m.seed},
         {"gate_threshold_usd", m.gate_threshold},
         {"target_per_listing", m.target_per_listing},
         {"easy_only", m.easy_only},
         {"dataset_fingerprint", m.dataset_fingerprint}}}};
}

void from_json(const nlohmann::json& j, PricePipelineModel& m) {
  if (j.value("kind", "") != "price_pipeline") throw SchemaError("model file is not a price pipeline artifact");
  if (j.at("schema_version") != kSchemaVersion) {
    throw SchemaError(fmt::format("unsupported schema_version {}", j.at("schema_version").dump()));
  }
  m.encoding = j.at("encoding").get<EncodingSpec>();
  m.baseline = j.at("baseline").get<LinearModel>();
  m.gate = j.at("gate").get<Forest>();
  m.price_model = j.at("price_model").get<Forest>();
  m.chosen_params = j.at("chosen_params").get<HyperParams>();
  const auto& meta = j.at("metadata");
  m.seed = meta.at("seed");
  m.gate_threshold = meta.at("gate_threshold_usd");
  m.target_per_listing = meta.at("target_per_listing");
  m.easy_only = meta.at("easy_only");
  m.dataset_fingerprint = meta.at("dataset_fingerprint");
  const std::size_t width = m.encoding.width();
  if (m.gate.n_features != width || m.price_model.n_features != width || m.baseline.coefficients.size() != width) {
    throw SchemaError("model components disagree with the encoding width");
  }
}

PriceRun hypothesis1_run(std::span<const ListingRecord> records, const PriceConfig& config) {
  PriceRun run;
  RunReport& report = run.report;
  report.meta = {{"command", "train"}, {"seed", config.seed}, {"schema_version", kSchemaVersion}};
  report.meta["config"] = {{"gate_threshold_usd", config.gate_threshold},
                           {"target_per_listing", config.balance.target_per_listing},
                           {"downsample_order", config.balance.downsample_order == DownsampleOrder::farthest_from_median
                                                    ? "farthest"
                                                    : "nearest"},
                           {"n_iter", config.n_iter},
                           {"folds", config.folds},
                           {"fold_mode", config.fold_mode == FoldMode::row ? "row" : "group"},
                           {"easy_only", config.easy_only},
                           {"search_space", config.space},
                           {"outlier_rules",
                            {{"price_upper_quantile", config.encoding.outlier_rules.price_upper_quantile},
                             {"max_bedrooms", config.encoding.outlier_rules.max_bedrooms}}}};

  const auto filtered = stage("outliers", [&] { return filter_outliers(records, config.encoding.outlier_rules); });
  if (filtered.records.empty()) throw NumericError("stage 'outliers': no rows survive outlier filtering");

  const EncodingSpec spec = stage("encode", [&] { return fit_encoding(filtered.records, config.encoding); });
  const FeatureMatrix matrix = stage("encode", [&] { return encode(filtered.records, spec); });
  report.meta["dataset_fingerprint"] = fingerprint(matrix);
  report.meta["rows_in"] = records.size();
  report.meta["rows_after_outliers"] = filtered.records.size();
  report.meta["outlier_drops"] = filtered.drops.counts;
  report.meta["columns"] = matrix.column_names;

  const BaselineResult baseline =
      stage("baseline", [&] { return baseline_stage(matrix, config.folds, config.seed, config.fold_mode); });
  report.set_section("baseline", {{"oof_rmse_usd", baseline.rmse_usd},
                                  {"oof_mape_percent", baseline.mape_percent},
                                  {"mape_rows", baseline.mape_rows},
                                  {"error_buckets", buckets_json(baseline.buckets)},
                                  {"intercept", baseline.model.intercept},
                                  {"coefficients", baseline.model.coefficients}});
  report.figures.push_back(buckets_table("baseline_error_buckets", baseline.buckets));
  report.figures.push_back(histogram_table("baseline_error_histogram", histogram(baseline.oof_errors_usd, 50)));

  const auto labels = label_easy_hard(matrix.listing_ids, baseline.oof_errors_usd, config.gate_threshold);
  const GateResult gate =
      stage("gate", [&] { return train_gate(matrix, labels, config.gate_params, config.seed); });
  const auto easy_count = std::count_if(labels.begin(), labels.end(), [](const GateLabel& l) { return l.easy; });
  {
    nlohmann::json importances = nlohmann::json::array();
    for (const auto& [name, value] : ranked_importances(gate.forest, matrix.column_names)) {
      importances.push_back({name, value});
    }
    report.set_section("gate", {{"threshold_usd", config.gate_threshold},
                                {"listings", labels.size()},
                                {"easy_listings", easy_count},
                                {"hard_listings", labels.size() - static_cast<std::size_t>(easy_count)},
                                {"holdout_accuracy", gate.holdout_accuracy},
                                {"holdout_rows", gate.holdout_rows},
                                {"params", config.gate_params},
                                {"feature_importances", importances}});
    for (const auto& t : gate.distributions) report.figures.push_back(t);
  }

  std::set<std::int64_t> easy_ids;
  for (const auto& l : labels) {
    if (l.easy) easy_ids.insert(l.listing_id);
  }
  FeatureMatrix training = matrix;
  if (config.easy_only) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
      if (easy_ids.contains(matrix.listing_ids[i])) keep.push_back(i);
    }
    if (keep.empty()) throw NumericError("stage 'balance': easy_only is set but no listing is easy");
    training = matrix.select_rows(keep);
  }
  const BalanceResult balanced = stage("balance", [&] { return balance_dataset(training, config.balance); });
  report.set_section("balance", {{"listings", balanced.summary.listings},
                                 {"upsampled", balanced.summary.upsampled},
                                 {"downsampled", balanced.summary.downsampled},
                                 {"unchanged", balanced.summary.unchanged},
                                 {"rows_in", balanced.summary.rows_in},
                                 {"rows_out", balanced.summary.rows_out},
                                 {"target_per_listing", config.balance.target_per_listing},
                                 {"easy_only", config.easy_only}});

  if (config.fold_mode == FoldMode::row) {
    report.warnings.push_back(
        "row-level folds on balanced data: repeated rows of one listing fall into both training and validation "
        "folds, so cross-validated scores are optimistic; use fold mode 'group' for listing-disjoint folds");
  }
  SearchOptions search_opts{config.n_iter, config.folds, config.seed, config.fold_mode, balanced.matrix.listing_ids};
  run.search = stage("search", [&] {
    return randomized_search(balanced.matrix.values, balanced.matrix.target, config.space, search_opts);
  });
  if (run.search.ranked.empty()) throw NumericError("stage 'search': every trial failed");
  {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : run.search.ranked) trials.push_back(t);
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& f : run.search.failed) failed.push_back({{"trial_index", f.trial_index}, {"params", f.params}, {"reason", f.reason}});
    report.set_section("search", {{"n_iter", config.n_iter},
                                  {"folds", config.folds},
                                  {"scoring", "r2 on log1p(price)"},
                                  {"top3", format_top_trials(run.search, 3)},
                                  {"ranked", trials},
                                  {"failed", failed}});
  }

  const HyperParams chosen = run.search.ranked.front().params;
  PricePipelineModel& model = run.model;
  model.encoding = spec;
  model.baseline = baseline.model;
  model.gate = gate.forest;
  model.chosen_params = chosen;
  model.seed = config.seed;
  model.gate_threshold = config.gate_threshold;
  model.target_per_listing = config.balance.target_per_listing;
  model.easy_only = config.easy_only;
  model.dataset_fingerprint = fingerprint(matrix);
  model.price_model = stage("final", [&] {
    return fit_forest(balanced.matrix.values, balanced.matrix.target, chosen, Task::regression, config.seed);
  });

  run.report.set_section("final", stage("final", [&] {
    nlohmann::json final;
    final["params"] = chosen;
    {
      nlohmann::json importances = nlohmann::json::array();
      for (const auto& [name, value] : ranked_importances(model.price_model, matrix.column_names)) {
        importances.push_back({name, value});
      }
      final["feature_importances"] = importances;
    }
    final["training_fit"] = price_metrics(to_usd(balanced.matrix.target),
                                          to_usd(predict_forest(model.price_model, balanced.matrix.values)));

    // Listing-disjoint evaluation: train on balanced rows of other listings, score the
    // held-out listings' original rows.
    std::set<std::int64_t> listing_set(training.listing_ids.begin(), training.listing_ids.end());
    const std::size_t k = std::min(config.folds, listing_set.size());
    if (k >= 2) {
      const Folds folds = group_kfold_split(training.listing_ids, k, config.seed);
      std::vector<double> truth, pred;
      std::vector<bool> is_easy;
      std::vector<double> r2s;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        std::set<std::int64_t> held;
        for (std::size_t r : folds[f]) held.insert(training.listing_ids[r]);
        std::vector<std::size_t> train_rows;
        for (std::size_t r = 0; r < balanced.matrix.rows(); ++r) {
          if (!held.contains(balanced.matrix.listing_ids[r])) train_rows.push_back(r);
        }
        const Forest forest =
            fit_forest(balanced.matrix.values.select_rows(train_rows), select<double>(balanced.matrix.target, train_rows),
                       chosen, Task::regression, splitmix64(config.seed ^ splitmix64(0xE7A1 + f)));
        const auto p = predict_forest(forest, training.values.select_rows(folds[f]));
        const auto t = select<double>(training.target, folds[f]);
        try {
          r2s.push_back(r2_score(t, p));
        } catch (const NumericError&) {
        }
        for (std::size_t i = 0; i < folds[f].size(); ++i) {
          truth.push_back(t[i]);
          pred.push_back(p[i]);
          is_easy.push_back(easy_ids.contains(training.listing_ids[folds[f][i]]));
        }
      }
      nlohmann::json held_out = price_metrics(to_usd(truth), to_usd(pred));
      held_out["folds"] = k;
      held_out["mean_r2_log_space"] =
          r2s.empty() ? nlohmann::json(nullptr)
                      : nlohmann::json(std::accumulate(r2s.begin(), r2s.end(), 0.0) / static_cast<double>(r2s.size()));
      std::vector<double> et, ep;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (is_easy[i]) {
          et.push_back(truth[i]);
          ep.push_back(pred[i]);
        }
      }
      held_out["easy_subset"] = et.empty() ? nlohmann::json(nullptr) : price_metrics(to_usd(et), to_usd(ep));
      final["group_heldout"] = held_out;
      std::vector<double> errors(truth.size());
      const auto tu = to_usd(truth), pu = to_usd(pred);
      for (std::size_t i = 0; i < truth.size(); ++i) errors[i] = std::abs(pu[i] - tu[i]);
      report.figures.push_back(buckets_table("final_error_buckets", error_buckets(errors)));
      report.figures.push_back(histogram_table("final_error_histogram", histogram(errors, 50)));
    } else {
      report.warnings.push_back("fewer than two listings: listing-disjoint evaluation skipped");
    }

    // Row-level folds over the balanced rows, as in a plain k-fold on the balanced set.
    if (balanced.matrix.rows() >= config.folds) {
      const Folds folds = kfold_split(balanced.matrix.rows(), config.folds, config.seed);
      std::vector<double> truth, pred;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto train = training_indices(folds, f);
        const Forest forest = fit_forest(balanced.matrix.values.select_rows(train),
                                         select<double>(balanced.matrix.target, train), chosen, Task::regression,
                                         splitmix64(config.seed ^ splitmix64(0xB0B0 + f)));
        const auto p = predict_forest(forest, balanced.matrix.values.select_rows(folds[f]));
        for (std::size_t i = 0; i < folds[f].size(); ++i) {
          truth.push_back(balanced.matrix.target[folds[f][i]]);
          pred.push_back(p[i]);
        }
      }
      nlohmann::json rowlevel = price_metrics(to_usd(truth), to_usd(pred));
      rowlevel["note"] = "row-level folds over balanced rows; leakage-prone";
      final["row_level_balanced"] = rowlevel;
    }
    return final;
  }));
  return run;
}

PricePrediction predict_price(const PricePipelineModel& model, const ListingRecord& record) {
  const auto row = encode_row(record, model.encoding);
  PricePrediction out;
  out.price_usd = std::max(0.0, std::expm1(predict_forest(model.price_model, row)));
  const auto proba = predict_proba(model.gate, row);
  out.easy_probability = proba.size() > 1 ? proba[1] : 0.0;
  out.verdict = predict_forest(model.gate, row) == kEasy ? GateVerdict::easy : GateVerdict::hard;
  out.note = out.verdict == GateVerdict::easy
                 ? fmt::format("easy: similar listings were priced within {} USD by the baseline", model.gate_threshold)
                 : fmt::format("hard: similar listings missed the baseline by more than {} USD; treat with lower confidence",
                               model.gate_threshold);
  return out;
}

std::vector<PricePrediction> predict_price(const PricePipelineModel& model, std::span<const ListingRecord> records) {
  std::vector<PricePrediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(predict_price(model, r));
  return out;
}

// ---------------------------------------------------- availability hypothesis

void to_json(nlohmann::json& j, const AvailabilityModel& m) {
  j = {{"schema_version", kSchemaVersion},
       {"kind", "availability"},
       {"window", m.window},
       {"centroid_low", m.centroid_low},
       {"centroid_high", m.centroid_high},
       {"nb", m.nb},
       {"majority", {{"label", m.majority.label}, {"accuracy", m.majority.accuracy}}},
       {"nb_accuracy", m.nb_accuracy}};
}

void from_json(const nlohmann::json& j, AvailabilityModel& m) {
  if (j.value("kind", "") != "availability") throw SchemaError("model file is not an availability artifact");
  if (j.at("schema_version") != kSchemaVersion) {
    throw SchemaError(fmt::format("unsupported schema_version {}", j.at("schema_version").dump()));
  }
  m.window = j.at("window");
  m.centroid_low = j.at("centroid_low");
  m.centroid_high = j.at("centroid_high");
  m.nb = j.at("nb").get<NBModel>();
  m.majority.label = j.at("majority").at("label");
  m.majority.accuracy = j.at("majority").at("accuracy");
  m.nb_accuracy = j.at("nb_accuracy");
}

AvailabilityRun hypothesis2_run(std::span<const ListingRecord> records, const AvailabilityConfig& config,
                                RunReport& report) {
  if (records.empty()) throw NumericError("availability: no listings");
  if (config.k != 2) throw DomainError("availability: low/high labelling needs k = 2");
  AvailabilityRun run;
  run.model.window = config.window;
  nlohmann::json section;
  nlohmann::json windows = nlohmann::json::object();
  bool configured_seen = false;
  for (int window : {30, 60, 90, 365}) {
    std::vector<double> fractions;
    fractions.reserve(records.size());
    for (const auto& r : records) fractions.push_back(normalize_availability(r.availability(window), window));
    const KMeansResult km = kmeans_1d(fractions, config.k, splitmix64(config.seed ^ static_cast<std::uint64_t>(window)));
    std::size_t low = 0;
    for (std::size_t a : km.assignments) low += a == 0;
    windows[std::to_string(window)] = {{"centroid_low", km.centroids.front()},
                                       {"centroid_high", km.centroids.back()},
                                       {"midpoint_threshold", 0.5 * (km.centroids.front() + km.centroids.back())},
                                       {"low_count", low},
                                       {"high_count", fractions.size() - low},
                                       {"inertia", km.inertia},
                                       {"iterations", km.iterations},
                                       {"degenerate", km.degenerate}};
    report.figures.push_back(histogram_table(fmt::format("availability_{}_histogram", window),
                                             histogram(fractions, std::vector<double>{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0})));
    if (window == config.window) {
      configured_seen = true;
      if (km.degenerate || !(km.centroids.front() < km.centroids.back())) {
        throw NumericError(fmt::format("availability: window {} has a single availability value; "
                                       "cannot split into low and high",
                                       window));
      }
      run.model.centroid_low = km.centroids.front();
      run.model.centroid_high = km.centroids.back();
      run.labels = split_low_high(km);
    }
  }
  if (!configured_seen) throw DomainError(fmt::format("availability window must be 30, 60, 90 or 365, got {}", config.window));

  std::vector<CategoricalRow> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back({records[i].zipcode, records[i].room_type});
    labels.push_back(static_cast<int>(run.labels[i]));
  }
  run.model.nb = fit_multinomial_nb(rows, labels, config.alpha);
  run.model.majority = majority_baseline(labels);
  run.model.nb_accuracy = accuracy(labels, predict_nb(run.model.nb, rows));

  std::set<std::pair<std::string, std::string>> combos;
  for (const auto& r : records) combos.insert({r.zipcode, r.room_type});
  FigureTable likelihoods{"availability_likelihood", {"zipcode", "room_type", "p_high"}, {}};
  for (const auto& [zip, room] : combos) {
    likelihoods.rows.push_back({zip, room, format_double(availability_likelihood(run.model, zip, room))});
  }
  report.figures.push_back(likelihoods);

  section["windows"] = windows;
  section["label_window"] = config.window;
  section["features"] = {"zipcode", "room_type"};
  section["alpha"] = config.alpha;
  section["nb_accuracy"] = run.model.nb_accuracy;
  section["majority_label"] = run.model.majority.label == 1 ? "high" : "low";
  section["majority_accuracy"] = run.model.majority.accuracy;
  section["accuracy_lift"] = run.model.nb_accuracy - run.model.majority.accuracy;
  section["evaluated_on"] = "training rows";
  report.set_section("availability", std::move(section));
  return run;
}

double availability_likelihood(const AvailabilityModel& model, const std::string& zipcode,
                               const std::string& room_type) {
  const auto post = nb_posteriors(model.nb, {zipcode, room_type});
  for (std::size_t c = 0; c < model.nb.labels.size(); ++c) {
    if (model.nb.labels[c] == static_cast<int>(Availability::high)) return post[c];
  }
  return 0.0;
}

}  // namespace pricecast
