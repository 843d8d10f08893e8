#pragma once

#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>

#include "climdown/geogrid/grid.hpp"
#include "climdown/rng.hpp"

namespace climdown::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "climdown") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::vector<geogrid::Date> daily(geogrid::Calendar cal, geogrid::Date start, std::size_t n) {
  std::vector<geogrid::Date> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(start);
    start = geogrid::next_day(cal, start);
  }
  return out;
}

/// Random float-representable cube; roughly `fill_prob` of the cells are fill.
inline geogrid::DataCube random_cube(Rng& rng, std::size_t nt, std::size_t ny, std::size_t nx,
                                     double fill_prob = 0.0,
                                     geogrid::Calendar cal = geogrid::Calendar::kStandard) {
  using namespace geogrid;
  auto lat = GridAxis::uniform("lat", AxisKind::kLatitude, rng.uniform(-60.0, 0.0),
                               rng.uniform(0.1, 2.0), ny);
  auto lon = GridAxis::uniform("lon", AxisKind::kLongitude, rng.uniform(-30.0, 30.0),
                               rng.uniform(0.1, 2.0), nx);
  std::vector<double> data(nt * ny * nx);
  for (double& v : data)
    v = rng.uniform() < fill_prob ? kDefaultFill
                                  : static_cast<double>(static_cast<float>(rng.normal(10.0, 8.0)));
  return DataCube(lat, lon, daily(cal, Date{1990, 1, 1}, nt), cal, "tasmax", "degC",
                  std::move(data));
}

}  // namespace climdown::testing
