#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pricecast/error.hpp"
#include "pricecast/report.hpp"
#include "support.hpp"

using namespace pricecast;
using doctest::Approx;

TEST_CASE("rmse") {
  std::vector<double> y = {1, 2, 3};
  CHECK(rmse(y, y) == 0.0);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == Approx(std::sqrt(12.5)));
  CHECK(rmse(std::vector<double>{5}, std::vector<double>{2}) == 3.0);
}

TEST_CASE("mape") {
  std::vector<double> y = {100, 50};
  CHECK(mape(y, y) == 0.0);
  CHECK(mape(std::vector<double>{100}, std::vector<double>{128}) == Approx(28.0));
  CHECK(mape(std::vector<double>{100, 100}, std::vector<double>{90, 110}) == Approx(10.0));
  try {
    mape(std::vector<double>{5, 0, 7, 0}, std::vector<double>{1, 1, 1, 1});
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    std::string msg = e.what();
    CHECK(msg.find('1') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("rmse >= mae >= 0") {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> a(1 + rng.uniform_index(20)), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    CHECK(rmse(a, b) >= mae(a, b) - 1e-15);
    CHECK(mae(a, b) >= 0.0);
  }
}

TEST_CASE("error_buckets") {
  auto t = error_buckets(std::vector<double>{1, 6, 15, 25, 100});
  CHECK(t.thresholds == kDefaultBucketThresholds);
  CHECK(t.cumulative_percentages == std::vector<double>{20, 40, 60, 80});
  auto zeros = error_buckets(std::vector<double>(7, 0.0));
  CHECK(zeros.cumulative_percentages == std::vector<double>{100, 100, 100, 100});
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> e(50);
    for (auto& v : e) v = std::abs(40 * rng.normal());
    std::vector<double> th = {1, 5, 10, 20, 30, INFINITY};
    auto b = error_buckets(e, th);
    for (std::size_t j = 1; j < th.size(); ++j)
      CHECK(b.cumulative_percentages[j] >= b.cumulative_percentages[j - 1]);
    CHECK(b.cumulative_percentages.back() == 100.0);
  }
}

TEST_CASE("histogram") {
  std::vector<double> edges = {0, 2};
  CHECK(histogram(std::vector<double>{1, 1, 1}, edges).counts == std::vector<std::size_t>{3});
  auto empty = histogram(std::vector<double>{}, std::size_t{4});
  CHECK(empty.counts == std::vector<std::size_t>(4, 0));
  std::vector<double> e3 = {0, 1, 2};
  CHECK(histogram(std::vector<double>{0, 1, 2, 2}, e3).counts == std::vector<std::size_t>{1, 3});

  Rng rng(3);
  std::vector<double> u(10000);
  for (auto& v : u) v = rng.uniform01();
  auto h = histogram(u, std::size_t{10});
  std::size_t total = 0;
  const double sigma = std::sqrt(10000 * 0.1 * 0.9);
  for (auto c : h.counts) {
    CHECK(std::abs(static_cast<double>(c) - 1000.0) <= 3 * sigma);
    total += c;
  }
  CHECK(total == 10000);
}

TEST_CASE("heatmap_grid") {
  SUBCASE("single point") {
    auto g = heatmap_grid(std::vector<double>{37.7}, std::vector<double>{-122.4}, std::vector<double>{99}, 3, 3);
    std::size_t populated = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (g.cell_count[i][j]) {
          ++populated;
          CHECK(g.cell_stat[i][j] == 99.0);
        }
    CHECK(populated == 1);
  }
  SUBCASE("two prices in one cell take the median") {
    std::vector<double> lat = {37.0, 37.01, 38.0}, lon = {-122.0, -122.01, -121.0}, price = {100, 200, 50};
    auto g = heatmap_grid(lat, lon, price, 2, 2);
    CHECK(g.cell_count[0][0] == 2);
    CHECK(g.cell_stat[0][0] == 150.0);
    CHECK(g.cell_count[1][1] == 1);
    CHECK_FALSE(g.cell_stat[0][1]);
  }
  SUBCASE("points on the upper edge land in the last bin and counts are conserved") {
    Rng rng(4);
    std::vector<double> lat, lon, price;
    for (int i = 0; i < 500; ++i) {
      lat.push_back(37 + rng.uniform01());
      lon.push_back(-123 + rng.uniform01());
      price.push_back(100);
    }
    lat.push_back(38.5);
    lon.push_back(-121.5);
    price.push_back(1);
    auto g = heatmap_grid(lat, lon, price, 5, 5);
    CHECK(g.cell_count[4][4] >= 1);
    std::size_t total = 0;
    for (const auto& row : g.cell_count)
      for (auto c : row) total += c;
    CHECK(total == 501);
    CHECK(std::is_sorted(g.lat_edges.begin(), g.lat_edges.end()));
  }
}

TEST_CASE("run report sections and emission") {
  RunReport r;
  r.set_section("baseline", {{"rmse_usd", 0.1}});
  CHECK_THROWS(r.set_section("baseline", {{"rmse_usd", 0.2}}));
  r.warnings.push_back("note");
  Histogram h{{0, 1, 2}, {3, 4}};
  r.figures.push_back(histogram_table("hist", h));
  auto j = r.to_json();
  for (const auto& key : RunReport::kSections) CHECK(j.contains(key));
  CHECK(j["eda"].is_null());

  auto dir = testing::temp_dir("report");
  emit_report(r, dir / "a", false);
  emit_report(r, dir / "b", false);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "hist.csv") == slurp(dir / "b" / "hist.csv"));
  auto parsed = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(parsed["baseline"]["rmse_usd"] == 0.1);
  CHECK(parsed["warnings"][0] == "note");
}

TEST_CASE("json floats round-trip exactly") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform_int(-30, 30));
    auto back = nlohmann::json::parse(dump_json(nlohmann::json{{"v", v}}));
    CHECK(back["v"].get<double>() == v);
  }
}
