#include "climdown/geogrid/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "climdown/error.hpp"

namespace climdown::geogrid {

GridAxis::GridAxis(std::string name, std::vector<double> values, AxisKind kind)
    : name_(std::move(name)), kind_(kind), values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("axis '" + name_ + "' is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v)) throw ValidationError("axis '" + name_ + "' has a non-finite value");
    if (kind_ == AxisKind::kLatitude && (v < -90.0 || v > 90.0))
      throw ValidationError("latitude " + std::to_string(v) + " outside [-90, 90]");
    if (kind_ == AxisKind::kLongitude && (v < -180.0 || v >= 360.0))
      throw ValidationError("longitude " + std::to_string(v) + " outside [-180, 360)");
    if (i > 0 && !(v > values_[i - 1]))
      throw ValidationError("axis '" + name_ + "' is not strictly increasing at index " +
                            std::to_string(i));
  }
}

GridAxis GridAxis::uniform(std::string name, AxisKind kind, double first, double step,
                           std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = first + step * static_cast<double>(i);
  return GridAxis(std::move(name), std::move(v), kind);
}

DataCube::DataCube(GridAxis lat, GridAxis lon, std::vector<Date> time, Calendar calendar,
                   std::string variable, std::string units, std::vector<double> data, double fill)
    : lat_(std::move(lat)),
      lon_(std::move(lon)),
      time_(std::move(time)),
      calendar_(calendar),
      variable_(std::move(variable)),
      units_(std::move(units)),
      data_(std::move(data)),
      fill_(static_cast<double>(static_cast<float>(fill))) {
  if (time_.empty()) throw ValidationError("cube '" + variable_ + "' has no time steps");
  if (units_.empty()) throw ValidationError("cube '" + variable_ + "' declares no units");
  for (std::size_t t = 0; t < time_.size(); ++t) {
    if (!is_valid(calendar_, time_[t]))
      throw ValidationError("date " + format_iso(time_[t]) + " is not valid under the " +
                            std::string(to_string(calendar_)) + " calendar");
    if (t > 0 && !(time_[t] > time_[t - 1]))
      throw ValidationError("time axis not strictly increasing at " + format_iso(time_[t]));
  }
  const std::size_t expect = time_.size() * lat_.size() * lon_.size();
  if (data_.size() != expect)
    throw ValidationError("cube '" + variable_ + "' payload has " + std::to_string(data_.size()) +
                          " values, axes imply " + std::to_string(expect));
  for (double& v : data_) {
    if (v == fill) v = fill_;
    if (v != fill_ && !std::isfinite(v))
      throw ValidationError("cube '" + variable_ + "' holds a non-finite value");
  }
}

GridField DataCube::slice(std::size_t t) const {
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(t * cells());
  return GridField{lat_, lon_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(cells())),
                   fill_, units_};
}

DataCube DataCube::with_data(std::vector<double> data) const {
  return DataCube(lat_, lon_, time_, calendar_, variable_, units_, std::move(data), fill_);
}

DataCube DataCube::with_variable(std::string variable) const {
  return DataCube(lat_, lon_, time_, calendar_, std::move(variable), units_, data_, fill_);
}

bool DataCube::operator==(const DataCube& o) const {
  return lat_ == o.lat_ && lon_ == o.lon_ && time_ == o.time_ && calendar_ == o.calendar_ &&
         variable_ == o.variable_ && units_ == o.units_ && fill_ == o.fill_ &&
         std::equal(data_.begin(), data_.end(), o.data_.begin(), o.data_.end(),
                    [](double a, double b) { return std::bit_cast<std::uint64_t>(a) ==
                                                    std::bit_cast<std::uint64_t>(b); });
}

std::string zone_name(Zone z) {
  switch (z.code) {
    case 0: return "Overall";
    case kTropical: return "Tropical";
    case kArid: return "Arid";
    case kTemperate: return "Temperate";
    case kContinental: return "Continental";
    case kPolar: return "Polar";
  }
  return "Zone" + std::to_string(z.code);
}

Zone parse_zone(std::string_view name) {
  for (Zone z : all_zones())
    if (zone_name(z) == name) return z;
  throw ValidationError("unknown zone '" + std::string(name) + "'");
}

std::vector<Zone> all_zones() {
  return {Zone{kTropical}, Zone{kArid}, Zone{kTemperate}, Zone{kContinental}, Zone{kPolar},
          Zone::overall()};
}

ZoneMask::ZoneMask(GridAxis lat, GridAxis lon, std::vector<int> codes)
    : lat_(std::move(lat)), lon_(std::move(lon)), codes_(std::move(codes)) {
  if (codes_.size() != lat_.size() * lon_.size())
    throw ValidationError("zone mask has " + std::to_string(codes_.size()) +
                          " cells, axes imply " + std::to_string(lat_.size() * lon_.size()));
  for (int c : codes_)
    if (c < 0 || c > kMaxZoneCode)
      throw ValidationError("zone code " + std::to_string(c) + " outside 0..5");
}

std::size_t ZoneMask::count(int code) const {
  return static_cast<std::size_t>(std::count(codes_.begin(), codes_.end(), code));
}

std::string_view season_name(Season s) {
  switch (s) {
    case Season::kDJF: return "DJF";
    case Season::kMAM: return "MAM";
    case Season::kJJA: return "JJA";
    case Season::kSON: return "SON";
    case Season::kAnnual: return "ANNUAL";
  }
  return "ANNUAL";
}

Season parse_season(std::string_view name) {
  for (Season s : all_seasons())
    if (season_name(s) == name) return s;
  throw ValidationError("unknown season '" + std::string(name) + "'");
}

bool season_contains(Season s, int month) {
  switch (s) {
    case Season::kDJF: return month == 12 || month == 1 || month == 2;
    case Season::kMAM: return month >= 3 && month <= 5;
    case Season::kJJA: return month >= 6 && month <= 8;
    case Season::kSON: return month >= 9 && month <= 11;
    case Season::kAnnual: return month >= 1 && month <= 12;
  }
  return false;
}

std::array<int, 12> season_months_mask(Season s) {
  std::array<int, 12> m{};
  for (int i = 0; i < 12; ++i) m[i] = season_contains(s, i + 1) ? 1 : 0;
  return m;
}

std::vector<Season> all_seasons() {
  return {Season::kDJF, Season::kMAM, Season::kJJA, Season::kSON, Season::kAnnual};
}

bool is_celsius(std::string_view u) {
  return u == "degC" || u == "\xC2\xB0" "C" || u == "C" || u == "deg_C" || u == "celsius" ||
         u == "Celsius" || u == "degrees_C" || u == "degrees_Celsius";
}

}  // namespace climdown::geogrid
