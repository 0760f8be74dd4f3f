#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pricecast/pipelines.hpp"

namespace pricecast {

/// Everything a CLI command can be configured with. Defaults follow the paper
/// where it states a value.
struct RunConfig {
  std::filesystem::path listings = "data/sample/listings.csv";
  std::filesystem::path calendar;  // optional
  std::filesystem::path out = "out";
  std::uint64_t seed = kDefaultSeed;
  OutlierRules outliers;
  BalanceConfig balance;
  double gate_threshold = 30.0;
  SearchSpace space;
  std::size_t n_iter = 100;
  std::size_t folds = 10;
  FoldMode fold_mode = FoldMode::row;
  int window = 365;
  bool easy_only = false;
  std::vector<std::string> categorical_columns = {"room_type", "zipcode"};
  std::vector<std::size_t> trees = {1, 5, 10, 20, 50, 100, 150, 200};
  std::size_t heatmap_bins = 50;

  void validate() const;
  PriceConfig price_config() const;
  AvailabilityConfig availability_config() const;
  EdaConfig eda_config() const;
  EncodingOptions encoding_options() const;
};

/// Unknown keys raise SchemaError; absent keys keep their defaults.
void from_json(const nlohmann::json& j, RunConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);

RunConfig load_config(const std::filesystem::path& path);

FoldMode parse_fold_mode(const std::string& text);
std::string fold_mode_name(FoldMode mode);
DownsampleOrder parse_downsample_order(const std::string& text);
std::string downsample_order_name(DownsampleOrder order);

}  // namespace pricecast
