// pricecast command-line interface.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "pricecast/config.hpp"
#include "pricecast/csv.hpp"
#include "pricecast/error.hpp"
#include "pricecast/pipelines.hpp"

namespace fs = std::filesystem;
using namespace pricecast;

namespace {

// Held for the lifetime of a command that writes into the output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    path_ = dir / ".pricecast.lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw IoError(fmt::format("output directory '{}' is locked by another run (remove {} if stale)", dir.string(),
                                path_.string()));
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

struct Flags {
  std::string config;
  std::uint64_t seed = kDefaultSeed;
  std::string listings;
  std::string calendar;
  std::string out;
  std::size_t target_per_listing = 100;
  double gate_threshold = 30.0;
  std::size_t n_iter = 100;
  std::size_t folds = 10;
  std::string fold_mode = "row";
  int window = 365;
  std::string downsample_order = "farthest";
  bool easy_only = false;
  std::string model;
  std::string input;
  std::vector<std::size_t> trees;
  bool no_timestamp = false;
};

struct Options {
  CLI::Option* seed;
  CLI::Option* listings;
  CLI::Option* calendar;
  CLI::Option* out;
  CLI::Option* target;
  CLI::Option* gate;
  CLI::Option* n_iter;
  CLI::Option* folds;
  CLI::Option* fold_mode;
  CLI::Option* window;
  CLI::Option* order;
  CLI::Option* easy_only;
  CLI::Option* trees;
};

RunConfig resolve(const Flags& f, const Options& o) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (o.seed->count()) c.seed = f.seed;
  if (o.listings->count()) c.listings = f.listings;
  if (o.calendar->count()) c.calendar = f.calendar;
  if (o.out->count()) c.out = f.out;
  if (o.target->count()) c.balance.target_per_listing = f.target_per_listing;
  if (o.gate->count()) c.gate_threshold = f.gate_threshold;
  if (o.n_iter->count()) c.n_iter = f.n_iter;
  if (o.folds->count()) c.folds = f.folds;
  if (o.fold_mode->count()) c.fold_mode = parse_fold_mode(f.fold_mode);
  if (o.window->count()) c.window = f.window;
  if (o.order->count()) c.balance.downsample_order = parse_downsample_order(f.downsample_order);
  if (o.easy_only->count()) c.easy_only = f.easy_only;
  if (o.trees->count()) c.trees = f.trees;
  c.validate();
  return c;
}

std::vector<ListingRecord> load_records(const RunConfig& c) {
  auto loaded = load_listings(c.listings);
  if (loaded.drops.total() > 0) {
    for (const auto& [reason, n] : loaded.drops.counts) {
      std::cerr << fmt::format("ingest: dropped {} row(s): {}\n", n, reason);
    }
  }
  if (loaded.records.empty()) throw NumericError(fmt::format("ingest: no usable rows in '{}'", c.listings.string()));
  return std::move(loaded.records);
}

std::vector<CalendarEntry> load_calendar_if_any(const RunConfig& c) {
  if (c.calendar.empty()) return {};
  auto loaded = load_calendar(c.calendar);
  for (const auto& [reason, n] : loaded.drops.counts) {
    std::cerr << fmt::format("ingest: dropped {} calendar row(s): {}\n", n, reason);
  }
  return std::move(loaded.records);
}

RunReport start_report(const std::string& command, const RunConfig& c) {
  RunReport r;
  r.meta = {{"command", command}, {"seed", c.seed}, {"schema_version", kSchemaVersion}, {"config", c}};
  return r;
}

struct Prepared {
  std::vector<ListingRecord> records;
  EncodingSpec spec;
  FeatureMatrix matrix;
  DropReport outlier_drops;
};

Prepared prepare(const RunConfig& c) {
  Prepared p;
  auto raw = load_records(c);
  auto filtered = filter_outliers(raw, c.outliers);
  if (filtered.records.empty()) throw NumericError("outliers: no rows survive outlier filtering");
  p.records = std::move(filtered.records);
  p.outlier_drops = filtered.drops;
  p.spec = fit_encoding(p.records, c.encoding_options());
  p.matrix = encode(p.records, p.spec);
  return p;
}

void describe(RunReport& r, const Prepared& p) {
  r.meta["dataset_fingerprint"] = fingerprint(p.matrix);
  r.meta["rows_after_outliers"] = p.records.size();
  r.meta["outlier_drops"] = p.outlier_drops.counts;
  r.meta["columns"] = p.matrix.column_names;
}

nlohmann::json buckets_json(const ErrorBucketTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.thresholds.size(); ++i) {
    rows.push_back({{"error_at_most_usd", t.thresholds[i]}, {"cumulative_percent", t.cumulative_percentages[i]}});
  }
  return rows;
}

void write_matrix_csv(const fs::path& path, const FeatureMatrix& m) {
  std::vector<std::string> header = {"listing_id", "log1p_price"};
  header.insert(header.end(), m.column_names.begin(), m.column_names.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row = {std::to_string(m.listing_ids[i]), format_double(m.target[i])};
    for (double v : m.values.row(i)) row.push_back(format_double(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, CsvTable{header, rows});
}

int cmd_ingest(const RunConfig& c) {
  OutputLock lock(c.out);
  auto loaded = load_listings(c.listings);
  write_listings(c.out / "listings_clean.csv", loaded.records);
  nlohmann::json drops = {{"listings", {{"kept", loaded.records.size()}, {"dropped", loaded.drops.counts}}}};
  if (!c.calendar.empty()) {
    auto cal = load_calendar(c.calendar);
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : cal.records) {
      rows.push_back({std::to_string(e.listing_id), e.date.iso(), e.available ? "t" : "f",
                      e.price ? format_double(*e.price) : ""});
    }
    write_csv(c.out / "calendar_clean.csv", CsvTable{{"listing_id", "date", "available", "price"}, rows});
    drops["calendar"] = {{"kept", cal.records.size()}, {"dropped", cal.drops.counts}};
  }
  write_text(c.out / "drop_report.json", dump_json(drops));
  std::cout << fmt::format("kept {} listing row(s), dropped {}\n", loaded.records.size(), loaded.drops.total());
  return 0;
}

int cmd_eda(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const auto records = load_records(c);
  const auto calendar = load_calendar_if_any(c);
  RunReport report = start_report("eda", c);
  run_eda(records, calendar, c.eda_config(), report);
  emit_report(report, c.out, timestamp);
  return 0;
}

int cmd_baseline(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const Prepared p = prepare(c);
  RunReport report = start_report("baseline", c);
  describe(report, p);
  const auto b = baseline_stage(p.matrix, c.folds, c.seed, c.fold_mode);
  report.set_section("baseline", {{"oof_rmse_usd", b.rmse_usd},
                                  {"oof_mape_percent", b.mape_percent},
                                  {"mape_rows", b.mape_rows},
                                  {"error_buckets", buckets_json(b.buckets)},
                                  {"intercept", b.model.intercept},
                                  {"coefficients", b.model.coefficients}});
  report.figures.push_back(buckets_table("baseline_error_buckets", b.buckets));
  report.figures.push_back(histogram_table("baseline_error_histogram", histogram(b.oof_errors_usd, 50)));
  emit_report(report, c.out, timestamp);
  std::cout << fmt::format("baseline RMSE {:.2f} USD, MAPE {:.2f}%\n", b.rmse_usd, b.mape_percent);
  return 0;
}

int cmd_gate(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const Prepared p = prepare(c);
  RunReport report = start_report("gate", c);
  describe(report, p);
  const auto b = baseline_stage(p.matrix, c.folds, c.seed, c.fold_mode);
  const auto labels = label_easy_hard(p.matrix.listing_ids, b.oof_errors_usd, c.gate_threshold);
  const auto g = train_gate(p.matrix, labels, default_gate_params(), c.seed);
  std::size_t easy = 0;
  std::vector<std::vector<std::string>> rows;
  for (const auto& l : labels) {
    easy += l.easy;
    rows.push_back({std::to_string(l.listing_id), format_double(l.oof_abs_error), l.easy ? "easy" : "hard"});
  }
  report.set_section("gate", {{"threshold_usd", c.gate_threshold},
                              {"listings", labels.size()},
                              {"easy_listings", easy},
                              {"hard_listings", labels.size() - easy},
                              {"holdout_accuracy", g.holdout_accuracy},
                              {"holdout_rows", g.holdout_rows}});
  report.figures.push_back(FigureTable{"gate_labels", {"listing_id", "mean_oof_abs_error_usd", "label"}, rows});
  for (const auto& t : g.distributions) report.figures.push_back(t);
  emit_report(report, c.out, timestamp);
  std::cout << fmt::format("{} easy / {} hard listing(s); gate held-out accuracy {:.3f}\n", easy, labels.size() - easy,
                           g.holdout_accuracy);
  return 0;
}

int cmd_balance(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const Prepared p = prepare(c);
  RunReport report = start_report("balance", c);
  describe(report, p);
  const auto bal = balance_dataset(p.matrix, c.balance);
  report.set_section("balance", {{"listings", bal.summary.listings},
                                 {"upsampled", bal.summary.upsampled},
                                 {"downsampled", bal.summary.downsampled},
                                 {"unchanged", bal.summary.unchanged},
                                 {"rows_in", bal.summary.rows_in},
                                 {"rows_out", bal.summary.rows_out},
                                 {"target_per_listing", c.balance.target_per_listing}});
  write_matrix_csv(c.out / "balanced.csv", bal.matrix);
  emit_report(report, c.out, timestamp);
  std::cout << fmt::format("{} listing(s) balanced to {} rows\n", bal.summary.listings, bal.summary.rows_out);
  return 0;
}

int cmd_tune(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const Prepared p = prepare(c);
  RunReport report = start_report("tune", c);
  describe(report, p);
  const auto bal = balance_dataset(p.matrix, c.balance);
  if (c.fold_mode == FoldMode::row) {
    report.warnings.push_back(
        "row-level folds on balanced data: repeated rows of one listing fall into both training and validation "
        "folds, so cross-validated scores are optimistic; use fold mode 'group' for listing-disjoint folds");
  }
  SearchOptions opts{c.n_iter, c.folds, c.seed, c.fold_mode, bal.matrix.listing_ids};
  const auto result = randomized_search(bal.matrix.values, bal.matrix.target, c.space, opts);
  if (result.ranked.empty()) throw NumericError("search: every trial failed");
  nlohmann::json trials = nlohmann::json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : result.ranked) {
    trials.push_back(t);
    rows.push_back({std::to_string(t.rank), std::to_string(t.trial_index), format_double(t.mean_score),
                    format_double(t.std_score), format_params(t.params)});
  }
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& f : result.failed) failed.push_back({{"trial_index", f.trial_index}, {"params", f.params}, {"reason", f.reason}});
  const std::string top3 = format_top_trials(result, 3);
  report.set_section("search", {{"n_iter", c.n_iter},
                                {"folds", c.folds},
                                {"scoring", "r2 on log1p(price)"},
                                {"top3", top3},
                                {"ranked", trials},
                                {"failed", failed}});
  report.figures.push_back(FigureTable{"search_ranked", {"rank", "trial_index", "mean_r2", "std_r2", "params"}, rows});
  write_text(c.out / "search_ranked.json", dump_json(trials));
  emit_report(report, c.out, timestamp);
  std::cout << top3;
  return 0;
}

int cmd_train(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const auto records = load_records(c);
  PriceRun run = hypothesis1_run(records, c.price_config());
  run.report.meta["config"] = c;
  write_text(c.out / "model.json", dump_json(run.model));
  emit_report(run.report, c.out, timestamp);
  std::cout << format_top_trials(run.search, 3);
  return 0;
}

int cmd_predict(const RunConfig& c, const std::string& model_path, const std::string& input_path) {
  if (model_path.empty()) throw UsageError("predict needs --model");
  if (input_path.empty()) throw UsageError("predict needs --input");
  std::ifstream in(model_path);
  if (!in) throw IoError(fmt::format("cannot open model file '{}'", model_path));
  PricePipelineModel model;
  try {
    model = nlohmann::json::parse(in).get<PricePipelineModel>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("model file '{}': {}", model_path, e.what()));
  }
  auto loaded = load_listings(input_path);
  for (const auto& [reason, n] : loaded.drops.counts) {
    std::cerr << fmt::format("ingest: dropped {} row(s): {}\n", n, reason);
  }
  OutputLock lock(c.out);
  const auto predictions = predict_price(model, loaded.records);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& pr = predictions[i];
    rows.push_back({std::to_string(loaded.records[i].listing_id), format_double(pr.price_usd),
                    pr.verdict == GateVerdict::easy ? "easy" : "hard", format_double(pr.easy_probability), pr.note});
  }
  write_csv(c.out / "predictions.csv", CsvTable{{"listing_id", "price_usd", "verdict", "easy_probability", "note"}, rows});
  std::cout << fmt::format("wrote {} prediction(s) to {}\n", rows.size(), (c.out / "predictions.csv").string());
  return 0;
}

int cmd_availability(const RunConfig& c, bool timestamp) {
  OutputLock lock(c.out);
  const auto records = load_records(c);
  RunReport report = start_report("availability", c);
  const auto run = hypothesis2_run(records, c.availability_config(), report);
  write_text(c.out / "availability_model.json", dump_json(run.model));
  emit_report(report, c.out, timestamp);
  std::cout << fmt::format("naive Bayes accuracy {:.3f} vs majority {:.3f} (window {})\n", run.model.nb_accuracy,
                           run.model.majority.accuracy, c.window);
  return 0;
}

int cmd_trees_curve(const RunConfig& c, const std::string& model_path, bool timestamp) {
  OutputLock lock(c.out);
  HyperParams params;
  if (!model_path.empty()) {
    std::ifstream in(model_path);
    if (!in) throw IoError(fmt::format("cannot open model file '{}'", model_path));
    try {
      params = nlohmann::json::parse(in).get<PricePipelineModel>().chosen_params;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(fmt::format("model file '{}': {}", model_path, e.what()));
    }
  }
  const Prepared p = prepare(c);
  RunReport report = start_report("trees-curve", c);
  describe(report, p);
  const auto bal = balance_dataset(p.matrix, c.balance);
  TreesCurveOptions opts;
  opts.folds = c.folds;
  opts.seed = c.seed;
  opts.fold_mode = c.fold_mode;
  opts.groups = bal.matrix.listing_ids;
  opts.to_output = [](double v) { return std::expm1(v); };
  const auto curve = trees_curve(bal.matrix.values, bal.matrix.target, params, c.trees, opts);
  FigureTable t{"trees_curve", {"n_trees", "train_rmse_usd", "test_rmse_usd"}, {}};
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : curve) {
    t.rows.push_back({std::to_string(pt.n_trees), format_double(pt.train_rmse), format_double(pt.test_rmse)});
    points.push_back({{"n_trees", pt.n_trees}, {"train_rmse_usd", pt.train_rmse}, {"test_rmse_usd", pt.test_rmse}});
  }
  report.figures.push_back(t);
  report.set_section("final", {{"trees_curve", points}, {"params", params}});
  emit_report(report, c.out, timestamp);
  for (const auto& pt : curve) {
    std::cout << fmt::format("{:>5} trees: train RMSE {:.2f} USD, test RMSE {:.2f} USD\n", pt.n_trees, pt.train_rmse,
                             pt.test_rmse);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pricecast: Airbnb nightly price and availability modelling"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  Flags f;
  Options o{};
  const RunConfig d;
  app.add_option("--config", f.config, "JSON config file; flags override its values");
  o.seed = app.add_option("--seed", f.seed, "Random seed")->default_val(d.seed);
  o.listings = app.add_option("--listings", f.listings, "Listings CSV")->default_val(d.listings.string());
  o.calendar = app.add_option("--calendar", f.calendar, "Calendar CSV (optional)");
  o.out = app.add_option("--out", f.out, "Output directory")->default_val(d.out.string());
  o.target = app.add_option("--target-per-listing", f.target_per_listing, "Rows per listing after balancing")
                 ->default_val(d.balance.target_per_listing);
  o.gate = app.add_option("--gate-threshold", f.gate_threshold, "Easy/hard threshold on mean baseline error, USD")
               ->default_val(d.gate_threshold);
  o.n_iter = app.add_option("--n-iter", f.n_iter, "Randomized search iterations")->default_val(d.n_iter);
  o.folds = app.add_option("--folds", f.folds, "Cross-validation folds")->default_val(d.folds);
  o.fold_mode = app.add_option("--fold-mode", f.fold_mode, "Fold assignment")
                    ->check(CLI::IsMember({"row", "group"}))
                    ->default_val(fold_mode_name(d.fold_mode));
  o.window = app.add_option("--window", f.window, "Availability window used for labels")
                 ->check(CLI::IsMember({30, 60, 90, 365}))
                 ->default_val(d.window);
  o.order = app.add_option("--downsample-order", f.downsample_order, "Which rows downsampling keeps")
                ->check(CLI::IsMember({"farthest", "nearest"}))
                ->default_val(downsample_order_name(d.balance.downsample_order));
  o.easy_only = app.add_flag("--easy-only", f.easy_only, "Train the price forest on easy listings only")
                    ->default_val(d.easy_only);
  o.trees = app.add_option("--trees", f.trees, "Tree counts for trees-curve")->delimiter(',')->default_str("1,5,10,20,50,100,150,200");
  app.add_flag("--no-timestamp", f.no_timestamp, "Write null for report meta.generated_at");

  auto* ingest = app.add_subcommand("ingest", "Validate and clean input CSVs; write cleaned CSVs and a drop report");
  auto* eda = app.add_subcommand("eda", "Histograms, weekday/weekend medians, correlations and the price heatmap");
  auto* baseline = app.add_subcommand("baseline", "Out-of-fold linear baseline with error buckets");
  auto* gate = app.add_subcommand("gate", "Easy/hard labels and the gate classifier");
  auto* balance = app.add_subcommand("balance", "Balance rows per listing and write the balanced matrix");
  auto* tune = app.add_subcommand("tune", "Randomized hyperparameter search; prints the top-3 block");
  auto* train = app.add_subcommand("train", "Full price pipeline; writes model.json and the report");
  auto* predict = app.add_subcommand("predict", "Price and gate verdict per input row");
  predict->add_option("--model", f.model, "Model artifact from train")->required();
  predict->add_option("--input", f.input, "Listings CSV to price")->required();
  auto* availability = app.add_subcommand("availability", "Availability clustering and naive Bayes likelihoods");
  auto* curve = app.add_subcommand("trees-curve", "Train and held-out RMSE against the number of trees");
  curve->add_option("--model", f.model, "Take forest parameters from this model artifact");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::usage);
  }

  try {
    const RunConfig c = resolve(f, o);
    const bool ts = !f.no_timestamp;
    if (*ingest) return cmd_ingest(c);
    if (*eda) return cmd_eda(c, ts);
    if (*baseline) return cmd_baseline(c, ts);
    if (*gate) return cmd_gate(c, ts);
    if (*balance) return cmd_balance(c, ts);
    if (*tune) return cmd_tune(c, ts);
    if (*train) return cmd_train(c, ts);
    if (*predict) return cmd_predict(c, f.model, f.input);
    if (*availability) return cmd_availability(c, ts);
    if (*curve) return cmd_trees_curve(c, f.model, ts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code(ErrorKind::usage);
}
