#include "climdown/downscale/data.hpp"

#include <algorithm>
#include <cmath>

#include "climdown/error.hpp"
#include "climdown/kernels/regrid.hpp"

namespace climdown::downscale {

using geogrid::DataCube;
using tensor::Tensor;

void to_json(nlohmann::json& j, const InputShape& s) {
  j = {{"t", s.t}, {"c", s.c}, {"hc", s.hc}, {"wc", s.wc}, {"factor", s.factor}};
}

void from_json(const nlohmann::json& j, InputShape& s) {
  s.t = j.at("t").get<std::size_t>();
  s.c = j.at("c").get<std::size_t>();
  s.hc = j.at("hc").get<std::size_t>();
  s.wc = j.at("wc").get<std::size_t>();
  s.factor = j.at("factor").get<std::size_t>();
}

void to_json(nlohmann::json& j, const DomainBounds& b) {
  j = {{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min}, {"lon_max", b.lon_max}};
}

void from_json(const nlohmann::json& j, DomainBounds& b) {
  b.lat_min = j.at("lat_min").get<double>();
  b.lat_max = j.at("lat_max").get<double>();
  b.lon_min = j.at("lon_min").get<double>();
  b.lon_max = j.at("lon_max").get<double>();
}

void to_json(nlohmann::json& j, const Normalizer& n) { j = {{"mean", n.mean}, {"sd", n.sd}}; }

void from_json(const nlohmann::json& j, Normalizer& n) {
  n.mean = j.at("mean").get<double>();
  n.sd = j.at("sd").get<double>();
}

DomainBounds Dataset::bounds() const {
  return {coarse_lat.front(), coarse_lat.back(), coarse_lon.front(), coarse_lon.back()};
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.shape = shape;
  out.coarse_lat = coarse_lat;
  out.coarse_lon = coarse_lon;
  out.fine_lat = fine_lat;
  out.fine_lon = fine_lon;
  out.calendar = calendar;
  out.variable = variable;
  out.units = units;
  for (auto i : idx) out.samples.push_back(samples.at(i));
  return out;
}

Dataset build_dataset(const std::vector<DataCube>& coarse, const DataCube& fine, std::size_t t,
                      std::size_t stride, std::size_t max_samples) {
  if (coarse.empty()) throw ValidationError("downscale data: no coarse input cube");
  if (t == 0 || stride == 0) throw ValidationError("downscale data: window and stride must be positive");
  const DataCube& c0 = coarse.front();
  for (const auto& c : coarse) {
    if (!(c.lat() == c0.lat()) || !(c.lon() == c0.lon()) || c.time() != c0.time())
      throw ValidationError("downscale data: coarse cubes must share grid and time axis");
  }
  if (fine.time() != c0.time() || fine.calendar() != c0.calendar())
    throw ValidationError("downscale data: coarse and fine cubes must share the time axis");
  if (fine.nlat() % c0.nlat() != 0 || fine.nlon() % c0.nlon() != 0 ||
      fine.nlat() / c0.nlat() != fine.nlon() / c0.nlon() || fine.nlat() / c0.nlat() < 2) {
    throw ValidationError("downscale data: fine grid " + std::to_string(fine.nlat()) + "x" +
                          std::to_string(fine.nlon()) + " is not an integer refinement (>= 2) of " +
                          std::to_string(c0.nlat()) + "x" + std::to_string(c0.nlon()));
  }
  if (c0.nt() < t) throw ValidationError("downscale data: fewer days than the window length");

  Dataset d;
  d.shape = {t, coarse.size(), c0.nlat(), c0.nlon(), fine.nlat() / c0.nlat()};
  d.coarse_lat = c0.lat();
  d.coarse_lon = c0.lon();
  d.fine_lat = fine.lat();
  d.fine_lon = fine.lon();
  d.calendar = fine.calendar();
  d.variable = fine.variable();
  d.units = fine.units();

  const std::size_t cells_c = c0.cells(), cells_f = fine.cells();
  for (std::size_t end = t - 1; end < c0.nt(); end += stride) {
    if (max_samples && d.samples.size() == max_samples) break;
    DownscaleSample s;
    s.input.reserve(d.shape.input_size());
    bool ok = true;
    for (std::size_t k = end + 1 - t; k <= end && ok; ++k) {
      for (const auto& c : coarse) {
        const auto frame = c.data().subspan(k * cells_c, cells_c);
        ok = std::none_of(frame.begin(), frame.end(), [&](double v) { return c.is_fill(v); });
        s.input.insert(s.input.end(), frame.begin(), frame.end());
      }
    }
    const auto tgt = fine.data().subspan(end * cells_f, cells_f);
    ok = ok && std::none_of(tgt.begin(), tgt.end(), [&](double v) { return fine.is_fill(v); });
    if (!ok) continue;  // windows touching missing values are skipped
    s.target.assign(tgt.begin(), tgt.end());
    s.date = fine.time()[end];
    d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) throw ValidationError("downscale data: no complete window in the input");
  return d;
}

Split benchmark_split(std::size_t n) {
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 5 == 4) s.test.push_back(i);
    else if (i % 5 == 2) s.val.push_back(i);
    else s.train.push_back(i);
  }
  return s;
}

Normalizer Normalizer::fit(const Dataset& d) {
  if (d.samples.empty()) throw ValidationError("normalizer: empty dataset");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : d.samples) {
    for (double v : s.target) sum += v;
    count += s.target.size();
  }
  Normalizer nz;
  nz.mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& s : d.samples)
    for (double v : s.target) ss += (v - nz.mean) * (v - nz.mean);
  const double sd = std::sqrt(ss / static_cast<double>(count));
  nz.sd = sd > 1e-12 ? sd : 1.0;
  return nz;
}

Tensor batch_inputs(const Dataset& d, std::span<const std::size_t> idx, const Normalizer& nz) {
  const auto& sh = d.shape;
  std::vector<double> v;
  v.reserve(idx.size() * sh.input_size());
  for (auto i : idx)
    for (double x : d.samples.at(i).input) v.push_back(nz.apply(x));
  return Tensor::from({idx.size(), sh.t, sh.c, sh.hc, sh.wc}, std::move(v));
}

Tensor batch_targets(const Dataset& d, std::span<const std::size_t> idx, const Normalizer& nz) {
  const auto& sh = d.shape;
  std::vector<double> v;
  v.reserve(idx.size() * sh.target_size());
  for (auto i : idx)
    for (double x : d.samples.at(i).target) v.push_back(nz.apply(x));
  return Tensor::from({idx.size(), sh.hf(), sh.wf()}, std::move(v));
}

Tensor patch_coords(const Dataset& d, std::size_t patch, const DomainBounds& b) {
  const auto& sh = d.shape;
  if (patch == 0 || sh.hc % patch || sh.wc % patch) {
    throw ValidationError("patch size " + std::to_string(patch) + " does not divide the coarse grid " +
                          std::to_string(sh.hc) + "x" + std::to_string(sh.wc));
  }
  auto scale = [](double v, double lo, double hi) { return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0; };
  const std::size_t ph = sh.hc / patch, pw = sh.wc / patch;
  std::vector<double> out;
  out.reserve(ph * pw * 2);
  for (std::size_t a = 0; a < ph; ++a)
    for (std::size_t b2 = 0; b2 < pw; ++b2) {
      double lat = 0.0, lon = 0.0;
      for (std::size_t k = 0; k < patch; ++k) {
        lat += d.coarse_lat[a * patch + k];
        lon += d.coarse_lon[b2 * patch + k];
      }
      out.push_back(scale(lat / static_cast<double>(patch), b.lat_min, b.lat_max));
      out.push_back(scale(lon / static_cast<double>(patch), b.lon_min, b.lon_max));
    }
  return Tensor::from({ph * pw, 2}, std::move(out));
}

std::vector<double> bilinear_baseline(const Dataset& d, std::size_t i) {
  const auto& sh = d.shape;
  const auto& s = d.samples.at(i);
  const std::size_t frame = sh.c * sh.hc * sh.wc;
  std::span<const double> last(s.input.data() + (sh.t - 1) * frame, sh.hc * sh.wc);
  const auto wy = kernels::bilinear_weights(d.coarse_lat.values(), d.fine_lat.values());
  const auto wx = kernels::bilinear_weights(d.coarse_lon.values(), d.fine_lon.values());
  kernels::RegridGeom g{1, sh.hc, sh.wc, sh.hf(), sh.wf(), geogrid::kDefaultFill};
  std::vector<double> out(sh.target_size());
  kernels::regrid_reference(g, wy, wx, last, out);
  return out;
}

}  // namespace climdown::downscale
