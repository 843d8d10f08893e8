#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "climdown/geogrid/calendar.hpp"

namespace climdown::geogrid {

/// Default missing-value sentinel. Float-representable so it survives the float32 payload.
inline constexpr double kDefaultFill = static_cast<double>(1.0e20f);

enum class AxisKind { kLatitude, kLongitude, kOther };

/// Strictly increasing coordinate vector in degrees.
class GridAxis {
 public:
  GridAxis() = default;
  GridAxis(std::string name, std::vector<double> values, AxisKind kind = AxisKind::kOther);

  static GridAxis latitude(std::vector<double> values) {
    return GridAxis("lat", std::move(values), AxisKind::kLatitude);
  }
  static GridAxis longitude(std::vector<double> values) {
    return GridAxis("lon", std::move(values), AxisKind::kLongitude);
  }
  /// `n` points starting at `first` with spacing `step`.
  static GridAxis uniform(std::string name, AxisKind kind, double first, double step, std::size_t n);

  const std::string& name() const { return name_; }
  AxisKind kind() const { return kind_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

  bool operator==(const GridAxis& o) const { return values_ == o.values_; }

 private:
  std::string name_;
  AxisKind kind_ = AxisKind::kOther;
  std::vector<double> values_;
};

/// One 2-D lat x lon raster.
struct GridField {
  GridAxis lat;
  GridAxis lon;
  std::vector<double> data;  // row-major lat x lon
  double fill = kDefaultFill;
  std::string units;

  double at(std::size_t i, std::size_t j) const { return data[i * lon.size() + j]; }
  bool is_fill(double v) const { return v == fill; }
};

/// 3-D time x lat x lon gridded variable. Immutable after construction.
class DataCube {
 public:
  DataCube(GridAxis lat, GridAxis lon, std::vector<Date> time, Calendar calendar,
           std::string variable, std::string units, std::vector<double> data,
           double fill = kDefaultFill);

  const GridAxis& lat() const { return lat_; }
  const GridAxis& lon() const { return lon_; }
  const std::vector<Date>& time() const { return time_; }
  Calendar calendar() const { return calendar_; }
  const std::string& variable() const { return variable_; }
  const std::string& units() const { return units_; }
  double fill() const { return fill_; }
  std::span<const double> data() const { return data_; }

  std::size_t nt() const { return time_.size(); }
  std::size_t nlat() const { return lat_.size(); }
  std::size_t nlon() const { return lon_.size(); }
  std::size_t cells() const { return lat_.size() * lon_.size(); }

  double at(std::size_t t, std::size_t i, std::size_t j) const {
    return data_[(t * nlat() + i) * nlon() + j];
  }
  bool is_fill(double v) const { return v == fill_; }
  GridField slice(std::size_t t) const;

  /// Same metadata, different payload (validated).
  DataCube with_data(std::vector<double> data) const;
  DataCube with_variable(std::string variable) const;

  bool operator==(const DataCube& o) const;

 private:
  GridAxis lat_;
  GridAxis lon_;
  std::vector<Date> time_;
  Calendar calendar_;
  std::string variable_;
  std::string units_;
  std::vector<double> data_;
  double fill_;
};

/// Koeppen-Geiger major classes; 0 is ocean/undefined.
enum ZoneCode : int {
  kOcean = 0,
  kTropical = 1,
  kArid = 2,
  kTemperate = 3,
  kContinental = 4,
  kPolar = 5,
};
inline constexpr int kMaxZoneCode = 5;

/// A zone selector: one class, or the union of all land classes.
struct Zone {
  int code = 0;  // 1..5, or 0 for the land union ("Overall")

  static Zone overall() { return Zone{0}; }
  bool is_overall() const { return code == 0; }
  bool contains(int cell_code) const {
    return is_overall() ? (cell_code >= 1 && cell_code <= kMaxZoneCode) : cell_code == code;
  }
  auto operator<=>(const Zone&) const = default;
};

std::string zone_name(Zone z);
Zone parse_zone(std::string_view name);
/// Tropical, Arid, Temperate, Continental, Polar, Overall.
std::vector<Zone> all_zones();

class ZoneMask {
 public:
  ZoneMask(GridAxis lat, GridAxis lon, std::vector<int> codes);

  const GridAxis& lat() const { return lat_; }
  const GridAxis& lon() const { return lon_; }
  std::span<const int> codes() const { return codes_; }
  int at(std::size_t i, std::size_t j) const { return codes_[i * lon_.size() + j]; }
  std::size_t count(int code) const;

 private:
  GridAxis lat_;
  GridAxis lon_;
  std::vector<int> codes_;
};

/// Meteorological season, or ANNUAL.
enum class Season { kDJF, kMAM, kJJA, kSON, kAnnual };

std::string_view season_name(Season s);
Season parse_season(std::string_view name);
bool season_contains(Season s, int month);
std::array<int, 12> season_months_mask(Season s);
/// DJF, MAM, JJA, SON, ANNUAL.
std::vector<Season> all_seasons();

/// True if `units` spells degrees Celsius.
bool is_celsius(std::string_view units);

}  // namespace climdown::geogrid
