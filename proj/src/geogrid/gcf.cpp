#include "climdown/geogrid/gcf.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "climdown/error.hpp"

namespace climdown::geogrid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

struct Header {
  std::string variable;
  std::string units;
  Calendar calendar = Calendar::kStandard;
  double fill = kDefaultFill;
  std::size_t nt = 0, nlat = 0, nlon = 0;
  std::vector<double> lat, lon;
  std::vector<Date> time;
};

Header read_header(const fs::path& dir) {
  const fs::path file = dir / "header.json";
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed header " + file.string() + ": " + e.what());
  }
  Header h;
  try {
    h.variable = j.at("variable").get<std::string>();
    h.units = j.at("units").get<std::string>();
    h.calendar = parse_calendar(j.at("calendar").get<std::string>());
    h.fill = j.at("fill_value").get<double>();
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw ValidationError("dims must have three entries");
    h.nt = dims[0];
    h.nlat = dims[1];
    h.nlon = dims[2];
    h.lat = j.at("lat").get<std::vector<double>>();
    h.lon = j.at("lon").get<std::vector<double>>();
    for (const auto& t : j.at("time")) h.time.push_back(parse_iso(t.get<std::string>()));
  } catch (const json::exception& e) {
    throw ValidationError("malformed header " + file.string() + ": " + e.what());
  }
  if (h.lat.size() != h.nlat || h.lon.size() != h.nlon || h.time.size() != h.nt)
    throw ValidationError("header " + file.string() + ": coordinate lengths disagree with dims");
  if (h.nt == 0) throw ValidationError("header " + file.string() + ": empty time axis");
  return h;
}

std::vector<double> read_payload(const fs::path& dir, std::size_t count) {
  const fs::path file = dir / "data.bin";
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != count * 4)
    throw ValidationError("shape mismatch: " + file.string() + " holds " +
                          std::to_string(bytes / 4) + " values, header declares " +
                          std::to_string(count));
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read on " + file.string());
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = static_cast<double>(std::bit_cast<float>(to_le(raw[i])));
  return out;
}

void write_files(const fs::path& dir, const json& header, std::span<const double> values) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "header.json");
    if (!out) throw IoError("cannot write " + (dir / "header.json").string());
    out << header.dump(1) << '\n';
    if (!out) throw IoError("write failed on " + (dir / "header.json").string());
  }
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    raw[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  std::ofstream out(dir / "data.bin", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "data.bin").string());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("write failed on " + (dir / "data.bin").string());
}

json header_json(const std::string& variable, const std::string& units, Calendar cal, double fill,
                 std::size_t nt, const GridAxis& lat, const GridAxis& lon,
                 const std::vector<Date>& time) {
  json j;
  j["variable"] = variable;
  j["units"] = units;
  j["calendar"] = std::string(to_string(cal));
  j["fill_value"] = fill;
  j["dims"] = {nt, lat.size(), lon.size()};
  j["lat"] = std::vector<double>(lat.values().begin(), lat.values().end());
  j["lon"] = std::vector<double>(lon.values().begin(), lon.values().end());
  std::vector<std::string> iso;
  for (const auto& d : time) iso.push_back(format_iso(d));
  j["time"] = iso;
  return j;
}

}  // namespace

DataCube read_cube(const fs::path& dir) {
  Header h = read_header(dir);
  auto values = read_payload(dir, h.nt * h.nlat * h.nlon);
  return DataCube(GridAxis::latitude(std::move(h.lat)), GridAxis::longitude(std::move(h.lon)),
                  std::move(h.time), h.calendar, h.variable, h.units, std::move(values), h.fill);
}

void write_cube(const DataCube& cube, const fs::path& dir) {
  if (cube.nt() == 0) throw ValidationError("refusing to write an empty cube");
  write_files(dir,
              header_json(cube.variable(), cube.units(), cube.calendar(), cube.fill(), cube.nt(),
                          cube.lat(), cube.lon(), cube.time()),
              cube.data());
}

ZoneMask read_mask(const fs::path& dir) {
  Header h = read_header(dir);
  if (h.nt != 1) throw ValidationError("zone mask " + dir.string() + " must have nt = 1");
  const auto values = read_payload(dir, h.nlat * h.nlon);
  const double fill = static_cast<double>(static_cast<float>(h.fill));
  std::vector<int> codes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v == fill) {
      codes[i] = kOcean;
      continue;
    }
    if (v != std::floor(v))
      throw ValidationError("zone mask " + dir.string() + " holds non-integer value " +
                            std::to_string(v));
    codes[i] = static_cast<int>(v);
  }
  return ZoneMask(GridAxis::latitude(std::move(h.lat)), GridAxis::longitude(std::move(h.lon)),
                  std::move(codes));
}

void write_mask(const ZoneMask& mask, const fs::path& dir) {
  std::vector<double> values(mask.codes().begin(), mask.codes().end());
  write_files(dir,
              header_json("zone", "1", Calendar::kStandard, kDefaultFill, 1, mask.lat(),
                          mask.lon(), {Date{2000, 1, 1}}),
              values);
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

DataCube read_csv_cube(const fs::path& file, const CsvOptions& opts) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(file.string() + ": empty CSV");
  {
    auto cols = split_csv(line);
    for (auto& c : cols)
      for (auto& ch : c) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (cols != std::vector<std::string>{"date", "lat", "lon", "value"})
      throw ValidationError(file.string() + ": line 1: header must be date,lat,lon,value");
  }
  std::map<std::tuple<Date, double, double>, std::pair<double, std::size_t>> rows;
  std::map<Date, int> dates;
  std::map<double, int> lats, lons;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 4)
      throw ValidationError("line " + std::to_string(lineno) + ": expected 4 columns, got " +
                            std::to_string(cols.size()));
    Date d;
    try {
      d = parse_iso(cols[0]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!is_valid(opts.calendar, d))
      throw ValidationError("line " + std::to_string(lineno) + ": date " + cols[0] +
                            " is not valid under the " + std::string(to_string(opts.calendar)) +
                            " calendar");
    const double la = parse_number(cols[1], lineno);
    const double lo = parse_number(cols[2], lineno);
    const double v = cols[3].empty() ? opts.fill : parse_number(cols[3], lineno);
    auto [it, fresh] = rows.emplace(std::make_tuple(d, la, lo), std::make_pair(v, lineno));
    if (!fresh)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate row for (" + cols[0] +
                            ", " + cols[1] + ", " + cols[2] + "), first seen on line " +
                            std::to_string(it->second.second));
    dates.emplace(d, 0);
    lats.emplace(la, 0);
    lons.emplace(lo, 0);
  }
  if (rows.empty()) throw ValidationError(file.string() + ": no data rows");

  std::vector<Date> time;
  std::vector<double> lat, lon;
  for (auto& [d, idx] : dates) { idx = static_cast<int>(time.size()); time.push_back(d); }
  for (auto& [v, idx] : lats) { idx = static_cast<int>(lat.size()); lat.push_back(v); }
  for (auto& [v, idx] : lons) { idx = static_cast<int>(lon.size()); lon.push_back(v); }

  const std::size_t expect = time.size() * lat.size() * lon.size();
  if (rows.size() != expect) {
    std::ostringstream gaps;
    std::size_t shown = 0;
    for (const auto& d : time)
      for (double la : lat)
        for (double lo : lon)
          if (!rows.count({d, la, lo}) && shown++ < 10)
            gaps << "\n  missing (" << format_iso(d) << ", " << la << ", " << lo << ")";
    throw ValidationError(file.string() + ": ragged grid, " + std::to_string(expect - rows.size()) +
                          " of " + std::to_string(expect) + " (date, lat, lon) cells absent" +
                          gaps.str());
  }
  std::vector<double> data(expect);
  for (const auto& [key, val] : rows) {
    const auto& [d, la, lo] = key;
    const std::size_t t = static_cast<std::size_t>(dates.at(d));
    const std::size_t i = static_cast<std::size_t>(lats.at(la));
    const std::size_t j = static_cast<std::size_t>(lons.at(lo));
    data[(t * lat.size() + i) * lon.size() + j] = val.first;
  }
  return DataCube(GridAxis::latitude(std::move(lat)), GridAxis::longitude(std::move(lon)),
                  std::move(time), opts.calendar, opts.variable, opts.units, std::move(data),
                  opts.fill);
}

}  // namespace climdown::geogrid
