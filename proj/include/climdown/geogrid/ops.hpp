#pragma once

#include <bitset>
#include <initializer_list>

#include "climdown/geogrid/grid.hpp"

namespace climdown::geogrid {

/// Bilinear interpolation onto (dst_lat, dst_lon). Targets outside the source hull are
/// clamped to the nearest source edge. Any contributing (nonzero-weight) neighbour that
/// is fill makes the output fill.
DataCube regrid_bilinear(const DataCube& src, const GridAxis& dst_lat, const GridAxis& dst_lon);
/// Nearest-neighbour regrid for masks (codes cannot be blended).
ZoneMask regrid_nearest(const ZoneMask& mask, const GridAxis& dst_lat, const GridAxis& dst_lon);

/// Zone codes to keep, 0..5.
class ZoneSet {
 public:
  ZoneSet() = default;
  ZoneSet(std::initializer_list<int> codes);
  static ZoneSet land() { return {1, 2, 3, 4, 5}; }
  void insert(int code);
  bool contains(int code) const { return code >= 0 && code <= kMaxZoneCode && bits_.test(code); }

 private:
  std::bitset<kMaxZoneCode + 1> bits_;
};

/// Cells whose code is not in `keep` become fill at every time step.
DataCube apply_mask(const DataCube& cube, const ZoneMask& mask, const ZoneSet& keep);

enum class DtrPolicy {
  kAbort,       // tasmin > tasmax anywhere raises ValidationError
  kFlagAsFill,  // offending cells become fill
};

/// DTR = tasmax - tasmin, strict fill propagation.
DataCube derive_dtr(const DataCube& tasmax, const DataCube& tasmin,
                    DtrPolicy policy = DtrPolicy::kAbort);

/// Keeps time steps whose month belongs to the season. DJF pools all Dec/Jan/Feb days.
DataCube select_season(const DataCube& cube, Season season);

}  // namespace climdown::geogrid
