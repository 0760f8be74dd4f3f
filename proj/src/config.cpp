#include "pricecast/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "pricecast/error.hpp"

namespace pricecast {

FoldMode parse_fold_mode(const std::string& text) {
  if (text == "row") return FoldMode::row;
  if (text == "group") return FoldMode::group;
  throw UsageError(fmt::format("fold mode must be 'row' or 'group', got '{}'", text));
}

std::string fold_mode_name(FoldMode mode) { return mode == FoldMode::row ? "row" : "group"; }

DownsampleOrder parse_downsample_order(const std::string& text) {
  if (text == "farthest") return DownsampleOrder::farthest_from_median;
  if (text == "nearest") return DownsampleOrder::nearest_to_median;
  throw UsageError(fmt::format("downsample order must be 'farthest' or 'nearest', got '{}'", text));
}

std::string downsample_order_name(DownsampleOrder order) {
  return order == DownsampleOrder::farthest_from_median ? "farthest" : "nearest";
}

void RunConfig::validate() const {
  if (balance.target_per_listing == 0) throw UsageError("target_per_listing must be at least 1");
  if (folds < 2) throw UsageError("folds must be at least 2");
  if (n_iter == 0) throw UsageError("n_iter must be at least 1");
  if (window != 30 && window != 60 && window != 90 && window != 365) {
    throw UsageError(fmt::format("window must be 30, 60, 90 or 365, got {}", window));
  }
  if (!(gate_threshold >= 0.0)) throw UsageError("gate_threshold must be non-negative");
  if (!(outliers.price_upper_quantile > 0.5 && outliers.price_upper_quantile <= 1.0)) {
    throw UsageError("outliers.price_upper_quantile must lie in (0.5, 1]");
  }
  if (trees.empty()) throw UsageError("trees list must not be empty");
  for (std::size_t t : trees) {
    if (t == 0) throw UsageError("trees list entries must be at least 1");
  }
  if (heatmap_bins == 0) throw UsageError("heatmap_bins must be at least 1");
  try {
    space.validate();
  } catch (const Error& e) {
    throw UsageError(fmt::format("search_space: {}", e.what()));
  }
}

EncodingOptions RunConfig::encoding_options() const {
  EncodingOptions o;
  o.outlier_rules = outliers;
  o.categorical_columns = categorical_columns;
  return o;
}

PriceConfig RunConfig::price_config() const {
  PriceConfig p;
  p.seed = seed;
  p.encoding = encoding_options();
  p.balance = balance;
  p.gate_threshold = gate_threshold;
  p.space = space;
  p.n_iter = n_iter;
  p.folds = folds;
  p.fold_mode = fold_mode;
  p.easy_only = easy_only;
  return p;
}

AvailabilityConfig RunConfig::availability_config() const {
  AvailabilityConfig a;
  a.window = window;
  a.seed = seed;
  return a;
}

EdaConfig RunConfig::eda_config() const {
  EdaConfig e;
  e.seed = seed;
  e.heatmap_bins = heatmap_bins;
  return e;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"listings", c.listings.string()},
       {"calendar", c.calendar.string()},
       {"out", c.out.string()},
       {"seed", c.seed},
       {"outliers", {{"price_upper_quantile", c.outliers.price_upper_quantile}, {"max_bedrooms", c.outliers.max_bedrooms}}},
       {"target_per_listing", c.balance.target_per_listing},
       {"downsample_order", downsample_order_name(c.balance.downsample_order)},
       {"gate_threshold", c.gate_threshold},
       {"search_space", c.space},
       {"n_iter", c.n_iter},
       {"folds", c.folds},
       {"fold_mode", fold_mode_name(c.fold_mode)},
       {"window", c.window},
       {"easy_only", c.easy_only},
       {"categorical_columns", c.categorical_columns},
       {"trees", c.trees},
       {"heatmap_bins", c.heatmap_bins}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  static const std::set<std::string> known = {
      "listings", "calendar",  "out",    "seed",      "outliers",            "target_per_listing",
      "downsample_order", "gate_threshold", "search_space", "n_iter", "folds", "fold_mode",
      "window",   "easy_only", "categorical_columns", "trees", "heatmap_bins"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw SchemaError(fmt::format("config: unknown key '{}'", key));
  }
  try {
    if (j.contains("listings")) c.listings = j.at("listings").get<std::string>();
    if (j.contains("calendar")) c.calendar = j.at("calendar").get<std::string>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("outliers")) {
      const auto& o = j.at("outliers");
      c.outliers.price_upper_quantile = o.value("price_upper_quantile", c.outliers.price_upper_quantile);
      c.outliers.max_bedrooms = o.value("max_bedrooms", c.outliers.max_bedrooms);
    }
    if (j.contains("target_per_listing")) c.balance.target_per_listing = j.at("target_per_listing").get<std::size_t>();
    if (j.contains("downsample_order")) {
      c.balance.downsample_order = parse_downsample_order(j.at("downsample_order").get<std::string>());
    }
    if (j.contains("gate_threshold")) c.gate_threshold = j.at("gate_threshold").get<double>();
    if (j.contains("search_space")) {
      SearchSpace s;
      from_json(j.at("search_space"), s);
      c.space = s;
    }
    if (j.contains("n_iter")) c.n_iter = j.at("n_iter").get<std::size_t>();
    if (j.contains("folds")) c.folds = j.at("folds").get<std::size_t>();
    if (j.contains("fold_mode")) c.fold_mode = parse_fold_mode(j.at("fold_mode").get<std::string>());
    if (j.contains("window")) c.window = j.at("window").get<int>();
    if (j.contains("easy_only")) c.easy_only = j.at("easy_only").get<bool>();
    if (j.contains("categorical_columns")) c.categorical_columns = j.at("categorical_columns").get<std::vector<std::string>>();
    if (j.contains("trees")) c.trees = j.at("trees").get<std::vector<std::size_t>>();
    if (j.contains("heatmap_bins")) c.heatmap_bins = j.at("heatmap_bins").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("config: {}", e.what()));
  } catch (const UsageError& e) {
    throw SchemaError(fmt::format("config: {}", e.what()));
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  RunConfig c;
  from_json(j, c);
  return c;
}

}  // namespace pricecast
