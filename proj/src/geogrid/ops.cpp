#include "climdown/geogrid/ops.hpp"

#include <sstream>

#include "climdown/error.hpp"
#include "climdown/kernels/regrid.hpp"

namespace climdown::geogrid {

DataCube regrid_bilinear(const DataCube& src, const GridAxis& dst_lat, const GridAxis& dst_lon) {
  if (src.nlat() < 2 || src.nlon() < 2)
    throw ValidationError("regrid needs at least 2 source nodes per axis, got " +
                          std::to_string(src.nlat()) + "x" + std::to_string(src.nlon()));
  const auto wy = kernels::bilinear_weights(src.lat().values(), dst_lat.values());
  const auto wx = kernels::bilinear_weights(src.lon().values(), dst_lon.values());
  kernels::RegridGeom g{src.nt(), src.nlat(), src.nlon(), dst_lat.size(), dst_lon.size(),
                        src.fill()};
  std::vector<double> out(src.nt() * dst_lat.size() * dst_lon.size());
  kernels::regrid_parallel(g, wy, wx, src.data(), out);
  return DataCube(dst_lat, dst_lon, src.time(), src.calendar(), src.variable(), src.units(),
                  std::move(out), src.fill());
}

namespace {
std::vector<std::size_t> nearest_index(std::span<const double> src, std::span<const double> dst) {
  std::vector<std::size_t> idx(dst.size());
  for (std::size_t p = 0; p < dst.size(); ++p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < src.size(); ++i)
      if (std::abs(src[i] - dst[p]) < std::abs(src[best] - dst[p])) best = i;
    idx[p] = best;
  }
  return idx;
}
}  // namespace

ZoneMask regrid_nearest(const ZoneMask& mask, const GridAxis& dst_lat, const GridAxis& dst_lon) {
  const auto iy = nearest_index(mask.lat().values(), dst_lat.values());
  const auto ix = nearest_index(mask.lon().values(), dst_lon.values());
  std::vector<int> codes(dst_lat.size() * dst_lon.size());
  for (std::size_t i = 0; i < dst_lat.size(); ++i)
    for (std::size_t j = 0; j < dst_lon.size(); ++j)
      codes[i * dst_lon.size() + j] = mask.at(iy[i], ix[j]);
  return ZoneMask(dst_lat, dst_lon, std::move(codes));
}

ZoneSet::ZoneSet(std::initializer_list<int> codes) {
  for (int c : codes) insert(c);
}

void ZoneSet::insert(int code) {
  if (code < 0 || code > kMaxZoneCode)
    throw ValidationError("zone code " + std::to_string(code) + " outside 0..5");
  bits_.set(static_cast<std::size_t>(code));
}

DataCube apply_mask(const DataCube& cube, const ZoneMask& mask, const ZoneSet& keep) {
  if (!(mask.lat() == cube.lat()) || !(mask.lon() == cube.lon()))
    throw ValidationError("mask axes differ from cube axes; regrid the mask first");
  const std::size_t cells = cube.cells();
  std::vector<char> drop(cells);
  for (std::size_t c = 0; c < cells; ++c) drop[c] = keep.contains(mask.codes()[c]) ? 0 : 1;
  std::vector<double> out(cube.data().begin(), cube.data().end());
  const auto nt = static_cast<long>(cube.nt());
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nt; ++t) {
    double* slice = out.data() + static_cast<std::size_t>(t) * cells;
    for (std::size_t c = 0; c < cells; ++c)
      if (drop[c]) slice[c] = cube.fill();
  }
  return cube.with_data(std::move(out));
}

namespace {
void require_same_grid(const DataCube& a, const DataCube& b, const char* what) {
  if (!(a.lat() == b.lat()) || !(a.lon() == b.lon()))
    throw ValidationError(std::string(what) + ": axis mismatch");
  if (a.time() != b.time() || a.calendar() != b.calendar())
    throw ValidationError(std::string(what) + ": time axis mismatch");
}
}  // namespace

DataCube derive_dtr(const DataCube& tasmax, const DataCube& tasmin, DtrPolicy policy) {
  require_same_grid(tasmax, tasmin, "derive_dtr");
  if (!is_celsius(tasmax.units()) || !is_celsius(tasmin.units()))
    throw ValidationError("derive_dtr: both operands must be in degrees Celsius (got '" +
                          tasmax.units() + "', '" + tasmin.units() + "')");
  const double fill = tasmax.fill();
  std::vector<double> out(tasmax.data().size());
  std::ostringstream bad;
  std::size_t n_bad = 0;
  for (std::size_t t = 0; t < tasmax.nt(); ++t)
    for (std::size_t i = 0; i < tasmax.nlat(); ++i)
      for (std::size_t j = 0; j < tasmax.nlon(); ++j) {
        const std::size_t k = (t * tasmax.nlat() + i) * tasmax.nlon() + j;
        const double hi = tasmax.data()[k];
        const double lo = tasmin.data()[k];
        if (tasmax.is_fill(hi) || tasmin.is_fill(lo)) {
          out[k] = fill;
          continue;
        }
        if (lo > hi) {
          if (n_bad++ < 10)
            bad << "\n  (t=" << t << " " << format_iso(tasmax.time()[t]) << ", lat="
                << tasmax.lat()[i] << ", lon=" << tasmax.lon()[j] << "): tasmin " << lo
                << " > tasmax " << hi;
          out[k] = fill;
          continue;
        }
        out[k] = hi - lo;
      }
  if (n_bad > 0 && policy == DtrPolicy::kAbort)
    throw ValidationError("derive_dtr: tasmin exceeds tasmax at " + std::to_string(n_bad) +
                          " cell(s)" + bad.str());
  return DataCube(tasmax.lat(), tasmax.lon(), tasmax.time(), tasmax.calendar(), "dtr",
                  tasmax.units(), std::move(out), fill);
}

DataCube select_season(const DataCube& cube, Season season) {
  std::vector<Date> time;
  std::vector<double> data;
  const std::size_t cells = cube.cells();
  for (std::size_t t = 0; t < cube.nt(); ++t) {
    if (!season_contains(season, cube.time()[t].month)) continue;
    time.push_back(cube.time()[t]);
    const auto first = cube.data().begin() + static_cast<std::ptrdiff_t>(t * cells);
    data.insert(data.end(), first, first + static_cast<std::ptrdiff_t>(cells));
  }
  if (time.empty())
    throw ValidationError("season " + std::string(season_name(season)) +
                          " selects no time steps from cube '" + cube.variable() + "'");
  return DataCube(cube.lat(), cube.lon(), std::move(time), cube.calendar(), cube.variable(),
                  cube.units(), std::move(data), cube.fill());
}

}  // namespace climdown::geogrid
