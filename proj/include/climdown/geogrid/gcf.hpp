#pragma once

#include <filesystem>

#include "climdown/geogrid/grid.hpp"

namespace climdown::geogrid {

// Gridded Climate Format: a directory holding
//   header.json  {variable, units, calendar, fill_value, dims:[nt,nlat,nlon], lat[], lon[], time[]}
//   data.bin     nt*nlat*nlon little-endian float32, time-major row-major
//
// Values are held as double in memory and narrowed to float32 on write, so a
// cube that was read from disk round-trips bit-exactly.

DataCube read_cube(const std::filesystem::path& dir);
void write_cube(const DataCube& cube, const std::filesystem::path& dir);

/// Zone masks share the layout with nt = 1 and integer-valued payloads.
ZoneMask read_mask(const std::filesystem::path& dir);
void write_mask(const ZoneMask& mask, const std::filesystem::path& dir);

struct CsvOptions {
  Calendar calendar = Calendar::kStandard;
  std::string variable = "tas";
  std::string units = "degC";
  double fill = kDefaultFill;
};

/// Tiny-fixture path: CSV with header `date,lat,lon,value`, one row per (date, lat, lon).
/// Rejects duplicate rows and ragged grids (every date must carry every cell).
DataCube read_csv_cube(const std::filesystem::path& file, const CsvOptions& opts = {});

}  // namespace climdown::geogrid
