#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pricecast/ingest.hpp"
#include "pricecast/matrix.hpp"
#include "pricecast/rng.hpp"

namespace testing {

inline pricecast::Matrix random_matrix(pricecast::Rng& rng, std::size_t rows, std::size_t cols) {
  pricecast::Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

inline pricecast::ListingRecord listing(std::int64_t id, double price, const std::string& room = "Entire home/apt",
                                        const std::string& zip = "94103") {
  pricecast::ListingRecord r;
  r.listing_id = id;
  r.price = price;
  r.bedrooms = 1;
  r.bathrooms = 1.0;
  r.accommodates = 2;
  r.cleaning_fee = 50.0;
  r.extra_people = 10.0;
  r.room_type = room;
  r.zipcode = zip;
  r.latitude = 37.77;
  r.longitude = -122.41;
  r.availability_30 = 10;
  r.availability_60 = 20;
  r.availability_90 = 30;
  r.availability_365 = 100;
  r.snapshot_date = pricecast::Date{2017, 6, 1};
  r.city = "San Francisco";
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pricecast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testing
