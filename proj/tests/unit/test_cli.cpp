#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pricecast/csv.hpp"
#include "support.hpp"

namespace {

const std::string kCli = PRICECAST_CLI;
const std::filesystem::path kSample = PRICECAST_SAMPLE_DIR;

int run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = "'" + kCli + "' " + args + " >'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sample(const char* name) { return "'" + (kSample / name).string() + "'"; }

}  // namespace

TEST_CASE("usage errors exit 2") {
  auto dir = testing::temp_dir("cli_usage");
  CHECK(run("train --bogus-flag", dir / "log") == 2);
  CHECK(run("frobnicate", dir / "log") == 2);
  CHECK(run("availability --window 45", dir / "log") == 2);
  CHECK(run("", dir / "log") == 2);
}

TEST_CASE("help lists flags with defaults") {
  auto dir = testing::temp_dir("cli_help");
  CHECK(run("--help", dir / "log") == 0);
  const auto text = slurp(dir / "log");
  for (const char* flag : {"--config", "--seed", "--listings", "--calendar", "--out", "--target-per-listing",
                           "--gate-threshold", "--n-iter", "--folds", "--fold-mode", "--window", "--downsample-order"}) {
    CHECK_MESSAGE(text.find(flag) != std::string::npos, flag);
  }
  CHECK(text.find("100") != std::string::npos);
  CHECK(text.find("365") != std::string::npos);
}

TEST_CASE("missing files exit 3") {
  auto dir = testing::temp_dir("cli_io");
  CHECK(run("ingest --listings /nonexistent/listings.csv --out '" + dir.string() + "/o'", dir / "log") == 3);
  CHECK(run("train --config /nonexistent/config.json", dir / "log") == 3);
}

TEST_CASE("schema mismatches exit 4") {
  auto dir = testing::temp_dir("cli_schema");
  testing::write_file(dir / "l.csv", "id,price\n1,$5.00\n");
  CHECK(run("ingest --listings '" + (dir / "l.csv").string() + "' --out '" + dir.string() + "/o'", dir / "log") == 4);
  CHECK(slurp(dir / "log").find("bedrooms") != std::string::npos);
  testing::write_file(dir / "c.json", R"({"unknown_key": 1})");
  CHECK(run("eda --config '" + (dir / "c.json").string() + "'", dir / "log") == 4);
  testing::write_file(dir / "model.json", R"({"kind": "something else"})");
  CHECK(run("predict --model '" + (dir / "model.json").string() + "' --input " + sample("listings.csv") + " --out '" +
                dir.string() + "/o'",
            dir / "log") == 4);
}

TEST_CASE("degenerate data exits 5") {
  auto dir = testing::temp_dir("cli_numeric");
  std::string csv =
      "id,price,bedrooms,bathrooms,accommodates,cleaning_fee,security_deposit,extra_people,room_type,zipcode,"
      "latitude,longitude,availability_30,availability_60,availability_90,availability_365\n";
  for (int i = 0; i < 6; ++i)
    csv += std::to_string(i + 1) + ",$100.00,1,1,2,,,,Private room,94103,37.7,-122.4,10,20,30,100\n";
  testing::write_file(dir / "flat.csv", csv);
  CHECK(run("availability --listings '" + (dir / "flat.csv").string() + "' --out '" + dir.string() + "/o'",
            dir / "log") == 5);
  CHECK(slurp(dir / "log").find("availability") != std::string::npos);
}

TEST_CASE("ingest writes cleaned files and a drop report") {
  auto dir = testing::temp_dir("cli_ingest");
  REQUIRE(run("ingest --listings " + sample("listings.csv") + " --calendar " + sample("calendar.csv") + " --out '" +
                  dir.string() + "'",
              dir / "log") == 0);
  CHECK(std::filesystem::exists(dir / "listings_clean.csv"));
  CHECK(std::filesystem::exists(dir / "calendar_clean.csv"));
  auto report = nlohmann::json::parse(slurp(dir / "drop_report.json"));
  CHECK(report.is_object());
}

TEST_CASE("tune with one iteration ranks a single trial") {
  auto dir = testing::temp_dir("cli_tune");
  REQUIRE(run("tune --listings " + sample("listings.csv") + " --n-iter 1 --folds 3 --seed 5 --out '" + dir.string() + "'", dir / "log") == 0);
  const auto text = slurp(dir / "log");
  CHECK(text.find("Model with rank: 1") != std::string::npos);
  CHECK(text.find("Model with rank: 2") == std::string::npos);
  auto ranked = nlohmann::json::parse(slurp(dir / "search_ranked.json"));
  CHECK(ranked.size() == 1);
}

TEST_CASE("predict preserves the row count") {
  auto dir = testing::temp_dir("cli_predict");
  REQUIRE(run("train --listings " + sample("listings.csv") + " --n-iter 2 --folds 3 --seed 2 --out '" + dir.string() + "/m'", dir / "log") == 0);
  REQUIRE(run("predict --model '" + (dir / "m" / "model.json").string() + "' --input " + sample("listings.csv") +
                  " --out '" + dir.string() + "/p'",
              dir / "log") == 0);
  auto preds = pricecast::read_csv(dir / "p" / "predictions.csv");
  auto input = pricecast::read_csv(kSample / "listings.csv");
  CHECK(preds.rows.size() == input.rows.size());
  CHECK(preds.header == std::vector<std::string>{"listing_id", "price_usd", "verdict", "easy_probability", "note"});
}

TEST_CASE("availability and eda commands") {
  auto dir = testing::temp_dir("cli_misc");
  CHECK(run("availability --listings " + sample("listings.csv") + " --out '" + dir.string() + "/a'", dir / "log") == 0);
  CHECK(std::filesystem::exists(dir / "a" / "availability_model.json"));
  CHECK(run("eda --listings " + sample("listings.csv") + " --calendar " + sample("calendar.csv") + " --out '" + dir.string() + "/e'", dir / "log") == 0);
  auto report = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
  CHECK_FALSE(report["eda"].is_null());
}
