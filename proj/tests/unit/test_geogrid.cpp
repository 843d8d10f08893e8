#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "doctest.h"

#include "climdown/error.hpp"
#include "climdown/geogrid/gcf.hpp"
#include "climdown/geogrid/ops.hpp"
#include "climdown/geogrid/synth.hpp"
#include "support.hpp"

using namespace climdown;
using namespace climdown::geogrid;
using climdown::testing::daily;
using climdown::testing::random_cube;
using climdown::testing::TempDir;

namespace {

void write_raw(const std::filesystem::path& dir, const std::string& header,
               const std::vector<float>& payload) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "header.json") << header;
  std::ofstream out(dir / "data.bin", std::ios::binary);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

std::string header(int nt, const std::string& times, const std::string& calendar = "standard") {
  return R"({"variable":"tasmax","units":"degC","calendar":")" + calendar +
         R"(","fill_value":1e20,"dims":[)" + std::to_string(nt) +
         R"(,2,2],"lat":[10,11],"lon":[20,21],"time":[)" + times + "]}";
}

DataCube unit_square(std::vector<double> values) {
  return DataCube(GridAxis::latitude({0.0, 1.0}), GridAxis::longitude({0.0, 1.0}),
                  {Date{2000, 1, 1}}, Calendar::kStandard, "tasmax", "degC", std::move(values));
}

}  // namespace

TEST_CASE("calendar rules") {
  CHECK(is_valid(Calendar::kStandard, {1988, 2, 29}));
  CHECK_FALSE(is_valid(Calendar::kStandard, {1900, 2, 29}));
  CHECK(is_valid(Calendar::kStandard, {2000, 2, 29}));
  CHECK_FALSE(is_valid(Calendar::kNoLeap, {1988, 2, 29}));
  CHECK(is_valid(Calendar::k360Day, {1987, 2, 30}));
  CHECK_FALSE(is_valid(Calendar::k360Day, {1987, 1, 31}));
  CHECK(parse_iso("1985-01-31") == Date{1985, 1, 31});
  CHECK(format_iso({985, 3, 7}) == "0985-03-07");
  CHECK_THROWS_AS(parse_iso("1985/01/31"), ValidationError);
}

TEST_CASE("axes must be strictly increasing and in range") {
  CHECK_THROWS_AS(GridAxis::latitude({0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(GridAxis::latitude({1.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(GridAxis::latitude({-91.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(GridAxis::longitude({0.0, 360.0}), ValidationError);
  CHECK_NOTHROW(GridAxis::longitude({-180.0, 359.9}));
}

TEST_CASE("read_cube: 2x2x2 fixture is bit-identical to the payload") {
  TempDir tmp;
  const std::vector<float> payload{1.5f, -2.25f, 3.1f, 4.7f, 1e20f, 0.1f, -0.0f, 7.0f};
  write_raw(tmp.path(), header(2, R"("1990-01-01","1990-01-02")"), payload);
  const DataCube cube = read_cube(tmp.path());
  REQUIRE(cube.data().size() == 8);
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(std::bit_cast<std::uint64_t>(cube.data()[i]) ==
          std::bit_cast<std::uint64_t>(static_cast<double>(payload[i])));
  CHECK(cube.is_fill(cube.at(1, 0, 0)));
}

TEST_CASE("read_cube: header declaring 3 steps over a 2-step payload is a shape mismatch") {
  TempDir tmp;
  write_raw(tmp.path(), header(3, R"("1990-01-01","1990-01-02","1990-01-03")"),
            std::vector<float>(8, 1.0f));
  CHECK_THROWS_WITH_AS(read_cube(tmp.path()), doctest::Contains("shape mismatch"),
                       ValidationError);
}

TEST_CASE("read_cube: Feb 29 under noleap is a calendar violation") {
  TempDir tmp;
  write_raw(tmp.path(), header(2, R"("1988-02-28","1988-02-29")", "noleap"),
            std::vector<float>(8, 1.0f));
  CHECK_THROWS_WITH_AS(read_cube(tmp.path()), doctest::Contains("noleap"), ValidationError);
}

TEST_CASE("read_cube: malformed header and missing directory") {
  TempDir tmp;
  write_raw(tmp / "bad", "{not json", std::vector<float>(8, 1.0f));
  CHECK_THROWS_AS(read_cube(tmp / "bad"), ValidationError);
  write_raw(tmp / "nonmono",
            R"({"variable":"t","units":"degC","calendar":"standard","fill_value":1e20,"dims":[1,2,2],"lat":[11,10],"lon":[20,21],"time":["1990-01-01"]})",
            std::vector<float>(4, 1.0f));
  CHECK_THROWS_AS(read_cube(tmp / "nonmono"), ValidationError);
  CHECK_THROWS_AS(read_cube(tmp / "absent"), IoError);
}

TEST_CASE("write_cube round-trips exactly, fill preserved") {
  TempDir tmp;
  Rng rng(1);
  const DataCube cube = random_cube(rng, 5, 3, 4, 0.2);
  write_cube(cube, tmp / "c");
  const DataCube back = read_cube(tmp / "c");
  CHECK(back == cube);
  std::size_t fills = 0;
  for (double v : back.data()) fills += back.is_fill(v) ? 1 : 0;
  CHECK(fills > 0);
}

TEST_CASE("empty cubes are rejected") {
  CHECK_THROWS_AS(DataCube(GridAxis::latitude({0, 1}), GridAxis::longitude({0, 1}), {},
                           Calendar::kStandard, "tasmax", "degC", {}),
                  ValidationError);
}

TEST_CASE("write_cube to an unwritable destination is an I/O error") {
  TempDir tmp;
  std::ofstream(tmp / "file") << "x";
  Rng rng(2);
  CHECK_THROWS_AS(write_cube(random_cube(rng, 1, 2, 2), tmp / "file" / "sub"), IoError);
}

TEST_CASE("regrid: identity grid is exact") {
  Rng rng(4);
  const DataCube cube = random_cube(rng, 3, 5, 6);
  const DataCube out = regrid_bilinear(cube, cube.lat(), cube.lon());
  CHECK(out == cube);
}

TEST_CASE("regrid: centre of the unit square") {
  const DataCube src = unit_square({0, 1, 2, 3});
  const DataCube out = regrid_bilinear(src, GridAxis::latitude({0.5}), GridAxis::longitude({0.5}));
  // Independent oracle: tent-function weights (1-|dy|)(1-|dx|) over the four corners.
  double oracle = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      oracle += (1.0 - std::abs(0.5 - i)) * (1.0 - std::abs(0.5 - j)) * src.at(0, i, j);
  CHECK(oracle == 1.5);
  CHECK(out.at(0, 0, 0) == 1.5);
}

TEST_CASE("regrid: points west of the domain clamp to the western edge") {
  const DataCube src = DataCube(GridAxis::latitude({40.0, 41.0, 42.0}),
                                GridAxis::longitude({0.0, 1.0}), {Date{2000, 1, 1}},
                                Calendar::kStandard, "tasmax", "degC", {1, 5, 2, 6, 4, 9});
  const DataCube out =
      regrid_bilinear(src, GridAxis::latitude({40.5, 42.0}), GridAxis::longitude({-10.0}));
  // Clamp oracle: west edge column is {1, 2, 4}; lat 40.5 is midway between 1 and 2.
  CHECK(out.at(0, 0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(out.at(0, 1, 0) == 4.0);
}

TEST_CASE("regrid: a contributing fill neighbour makes the output fill") {
  const DataCube src = unit_square({0, 1, 2, kDefaultFill});
  const DataCube out =
      regrid_bilinear(src, GridAxis::latitude({0.0, 0.5}), GridAxis::longitude({0.0, 0.5}));
  CHECK(out.at(0, 0, 0) == 0.0);      // node hit, fill neighbour has zero weight
  CHECK(out.is_fill(out.at(0, 1, 1)));  // centre uses the fill corner
}

TEST_CASE("regrid: too few source nodes") {
  const DataCube src(GridAxis::latitude({0.0}), GridAxis::longitude({0.0, 1.0}), {Date{2000, 1, 1}},
                     Calendar::kStandard, "tasmax", "degC", {1, 2});
  CHECK_THROWS_AS(regrid_bilinear(src, GridAxis::latitude({0.0}), GridAxis::longitude({0.5})),
                  ValidationError);
}

TEST_CASE("regrid properties: convexity and linearity on random grids") {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const DataCube x = random_cube(rng, 2, 4 + rng.below(4), 4 + rng.below(4));
    const DataCube y = x.with_data([&] {
      std::vector<double> v(x.data().size());
      for (double& e : v) e = rng.normal(0.0, 5.0);
      return v;
    }());
    std::vector<double> dlat, dlon;
    for (int i = 0; i < 9; ++i) dlat.push_back(x.lat().front() - 1.0 + i * (x.lat().back() - x.lat().front() + 2.0) / 8.0);
    for (int i = 0; i < 7; ++i) dlon.push_back(x.lon().front() - 1.0 + i * (x.lon().back() - x.lon().front() + 2.0) / 6.0);
    const GridAxis la = GridAxis::latitude(dlat), lo = GridAxis::longitude(dlon);

    const DataCube rx = regrid_bilinear(x, la, lo);
    // Bounds: each output within [min, max] of its four source neighbours.
    for (std::size_t t = 0; t < x.nt(); ++t)
      for (std::size_t i = 0; i < la.size(); ++i)
        for (std::size_t j = 0; j < lo.size(); ++j) {
          auto bracket = [](const GridAxis& a, double v) {
            std::size_t k = 0;
            while (k + 2 < a.size() && a[k + 1] <= v) ++k;
            return k;
          };
          const std::size_t bi = bracket(x.lat(), la[i]), bj = bracket(x.lon(), lo[j]);
          const double n[4] = {x.at(t, bi, bj), x.at(t, bi, bj + 1), x.at(t, bi + 1, bj),
                               x.at(t, bi + 1, bj + 1)};
          const double v = rx.at(t, i, j);
          CHECK(v >= *std::min_element(n, n + 4) - 1e-12);
          CHECK(v <= *std::max_element(n, n + 4) + 1e-12);
        }

    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    std::vector<double> comb(x.data().size());
    for (std::size_t k = 0; k < comb.size(); ++k) comb[k] = a * x.data()[k] + b * y.data()[k];
    const DataCube lhs = regrid_bilinear(x.with_data(comb), la, lo);
    const DataCube ry = regrid_bilinear(y, la, lo);
    for (std::size_t k = 0; k < lhs.data().size(); ++k) {
      const double rhs = a * rx.data()[k] + b * ry.data()[k];
      const double scale = std::abs(a * rx.data()[k]) + std::abs(b * ry.data()[k]) + 1e-300;
      CHECK(std::abs(lhs.data()[k] - rhs) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("apply_mask") {
  const GridAxis lat = GridAxis::latitude({0, 1, 2, 3}), lon = GridAxis::longitude({0, 1});
  const DataCube cube(lat, lon, daily(Calendar::kStandard, {2000, 1, 1}, 3), Calendar::kStandard,
                      "tasmax", "degC", std::vector<double>(24, 3.0));
  const ZoneMask all_land(lat, lon, {1, 2, 3, 4, 5, 1, 2, 3});
  CHECK(apply_mask(cube, all_land, ZoneSet::land()) == cube);

  const DataCube none = apply_mask(cube, all_land, ZoneSet{});
  CHECK(std::all_of(none.data().begin(), none.data().end(), [&](double v) { return none.is_fill(v); }));

  const ZoneMask half_polar(lat, lon, {5, 5, 5, 5, 3, 0, 2, 1});
  const DataCube polar = apply_mask(cube, half_polar, ZoneSet{5});
  // Census oracle: surviving cells per step equal the mask's count of code 5.
  const std::size_t survivors = static_cast<std::size_t>(
      std::count_if(polar.data().begin(), polar.data().end(), [&](double v) { return !polar.is_fill(v); }));
  CHECK(survivors == half_polar.count(5) * cube.nt());
  CHECK(apply_mask(polar, half_polar, ZoneSet{5}) == polar);

  const ZoneMask wrong(GridAxis::latitude({0, 1}), lon, {1, 1, 1, 1});
  CHECK_THROWS_AS(apply_mask(cube, wrong, ZoneSet::land()), ValidationError);
}

TEST_CASE("derive_dtr") {
  const GridAxis lat = GridAxis::latitude({0, 1}), lon = GridAxis::longitude({0, 1});
  const auto time = daily(Calendar::kStandard, {2000, 1, 1}, 2);
  auto cube = [&](std::vector<double> v, std::string var) {
    return DataCube(lat, lon, time, Calendar::kStandard, std::move(var), "degC", std::move(v));
  };
  const DataCube same = cube({1, 2, 3, 4, 5, 6, 7, 8}, "tasmax");
  const DataCube zero = derive_dtr(same, same.with_variable("tasmin"));
  CHECK(zero.variable() == "dtr");
  CHECK(std::all_of(zero.data().begin(), zero.data().end(), [](double v) { return v == 0.0; }));

  const DataCube hi = cube({10, 9, 9, 9, 9, 9, kDefaultFill, 9}, "tasmax");
  const DataCube lo = cube({2.5, 1, 1, 1, 1, 1, 1, 1}, "tasmin");
  const DataCube dtr = derive_dtr(hi, lo);
  CHECK(dtr.at(0, 0, 0) == 7.5);
  CHECK(dtr.is_fill(dtr.at(1, 1, 0)));
  for (double v : dtr.data()) CHECK((dtr.is_fill(v) || v >= 0.0));

  const DataCube bad_lo = cube({12, 1, 1, 1, 1, 1, 1, 1}, "tasmin");
  const DataCube bad_hi = cube({10, 9, 9, 9, 9, 9, 9, 9}, "tasmax");
  CHECK_THROWS_WITH_AS(derive_dtr(bad_hi, bad_lo), doctest::Contains("t=0"), ValidationError);
  const DataCube flagged = derive_dtr(bad_hi, bad_lo, DtrPolicy::kFlagAsFill);
  CHECK(flagged.is_fill(flagged.at(0, 0, 0)));

  const DataCube kelvin(lat, lon, time, Calendar::kStandard, "tasmin", "K",
                        std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(derive_dtr(bad_hi, kelvin), ValidationError);
}

namespace {
// Independent month-length oracle for the proleptic Gregorian calendar.
int chrono_days(int y, int m) {
  using namespace std::chrono;
  return static_cast<int>(static_cast<unsigned>(
      year_month_day_last{year{y}, month_day_last{month{static_cast<unsigned>(m)}}}.day()));
}
}  // namespace

TEST_CASE("select_season counts") {
  const GridAxis lat = GridAxis::latitude({0, 1}), lon = GridAxis::longitude({0, 1});
  auto year_cube = [&](Calendar cal, int year, std::size_t n) {
    return DataCube(lat, lon, daily(cal, {year, 1, 1}, n), cal, "tasmax", "degC",
                    std::vector<double>(n * 4, 1.0));
  };
  const DataCube standard = year_cube(Calendar::kStandard, 1987, 365);
  CHECK(select_season(standard, Season::kAnnual) == standard);
  const int djf_oracle = chrono_days(1987, 12) + chrono_days(1987, 1) + chrono_days(1987, 2);
  CHECK(djf_oracle == 90);
  CHECK(select_season(standard, Season::kDJF).nt() == static_cast<std::size_t>(djf_oracle));

  const DataCube c360 = year_cube(Calendar::k360Day, 1987, 360);
  for (Season s : {Season::kDJF, Season::kMAM, Season::kJJA, Season::kSON})
    CHECK(select_season(c360, s).nt() == 90);

  const DataCube jan = year_cube(Calendar::kStandard, 1987, 31);
  CHECK_THROWS_AS(select_season(jan, Season::kJJA), ValidationError);
}

TEST_CASE("seasons partition the annual time steps on every calendar") {
  const GridAxis lat = GridAxis::latitude({0, 1}), lon = GridAxis::longitude({0, 1});
  for (Calendar cal : {Calendar::kStandard, Calendar::kNoLeap, Calendar::k360Day}) {
    const std::size_t n = 3 * 365 + 40;
    const DataCube cube(lat, lon, daily(cal, {1987, 11, 3}, n), cal, "tasmax", "degC",
                        std::vector<double>(n * 4, 1.0));
    std::vector<Date> pooled;
    for (Season s : {Season::kDJF, Season::kMAM, Season::kJJA, Season::kSON}) {
      const auto part = select_season(cube, s).time();
      pooled.insert(pooled.end(), part.begin(), part.end());
    }
    std::sort(pooled.begin(), pooled.end());
    CHECK(std::adjacent_find(pooled.begin(), pooled.end()) == pooled.end());
    CHECK(pooled == select_season(cube, Season::kAnnual).time());
  }
}

TEST_CASE("synth_pair") {
  SynthSpec spec;
  spec.seed = 17;
  spec.nt = 6;
  spec.nlat = 16;
  spec.nlon = 12;
  const SynthPair clean = synth_pair(spec);
  CHECK(clean.coarse.nlat() == 4);
  CHECK(clean.coarse.nlon() == 3);
  CHECK(block_mean(clean.fine, 4) == clean.coarse);

  const SynthPair again = synth_pair(spec);
  CHECK(again.fine == clean.fine);
  CHECK(again.coarse == clean.coarse);

  spec.bias = 2.0;
  spec.noise_sd = 0.5;
  spec.nt = 40;
  const SynthPair biased = synth_pair(spec);
  const DataCube pooled = block_mean(biased.fine, 4);
  double diff = 0.0;
  for (std::size_t k = 0; k < pooled.data().size(); ++k) diff += biased.coarse.data()[k] - pooled.data()[k];
  const double n = static_cast<double>(pooled.data().size());
  diff /= n;
  CHECK(std::abs(diff - 2.0) <= 3.0 / std::sqrt(n) * spec.noise_sd);

  spec.nlat = 14;
  CHECK_THROWS_AS(synth_pair(spec), ValidationError);
}

TEST_CASE("synth_zone_mask covers every class") {
  const auto lat = GridAxis::uniform("lat", AxisKind::kLatitude, 40.0, 0.1, 20);
  const auto lon = GridAxis::uniform("lon", AxisKind::kLongitude, 0.0, 0.1, 20);
  const ZoneMask mask = synth_zone_mask(lat, lon, 3);
  for (int c = 0; c <= 5; ++c) CHECK(mask.count(c) > 0);
}

TEST_CASE("CSV ingestion") {
  TempDir tmp;
  {
    std::ofstream out(tmp / "ok.csv");
    out << "date,lat,lon,value\n";
    for (const char* d : {"1990-01-01", "1990-01-02"})
      for (double la : {10.0, 11.0})
        for (double lo : {20.0, 21.0}) out << d << ',' << la << ',' << lo << ',' << la + lo << '\n';
  }
  const DataCube cube = read_csv_cube(tmp / "ok.csv");
  CHECK(cube.nt() == 2);
  CHECK(cube.nlat() == 2);
  CHECK(cube.nlon() == 2);
  CHECK(cube.at(1, 1, 0) == 31.0);

  {
    std::ofstream out(tmp / "dup.csv");
    out << "date,lat,lon,value\n1990-01-01,10,20,1\n1990-01-01,10,20,2\n";
  }
  CHECK_THROWS_WITH_AS(read_csv_cube(tmp / "dup.csv"), doctest::Contains("duplicate"),
                       ValidationError);
  {
    std::ofstream out(tmp / "ragged.csv");
    out << "date,lat,lon,value\n1990-01-01,10,20,1\n1990-01-01,11,20,1\n1990-01-02,10,20,1\n";
  }
  CHECK_THROWS_WITH_AS(read_csv_cube(tmp / "ragged.csv"),
                       doctest::Contains("missing (1990-01-02, 11, 20)"), ValidationError);
}
