#include "climdown/geogrid/synth.hpp"

#include <cmath>
#include <numbers>

#include "climdown/error.hpp"
#include "climdown/rng.hpp"

namespace climdown::geogrid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
  double kx = 0, ky = 0;  // radians per fine cell
  double phase = 0;
  double amp = 0;
};

Wave random_wave(Rng& rng, double min_len, double max_len, double min_amp, double max_amp) {
  const double len = rng.uniform(min_len, max_len);
  const double dir = rng.uniform(0.0, kTwoPi);
  Wave w;
  w.kx = kTwoPi / len * std::cos(dir);
  w.ky = kTwoPi / len * std::sin(dir);
  w.phase = rng.uniform(0.0, kTwoPi);
  w.amp = rng.uniform(min_amp, max_amp);
  return w;
}

struct Oscillator {
  double period = 1, phase = 0, amp = 0;
  double at(double t) const { return amp * std::sin(kTwoPi * t / period + phase); }
};

constexpr int kStaticWaves = 6;
constexpr int kLargeWaves = 3;
constexpr double kBaseline = 12.0;

}  // namespace

SynthPair synth_pair(const SynthSpec& spec) {
  const int f = spec.coarse_factor;
  if (f < 2) throw ValidationError("synth_pair: coarse_factor must be >= 2");
  if (spec.nlat % static_cast<std::size_t>(f) != 0 || spec.nlon % static_cast<std::size_t>(f) != 0)
    throw ValidationError("synth_pair: coarse_factor " + std::to_string(f) +
                          " does not divide the fine grid " + std::to_string(spec.nlat) + "x" +
                          std::to_string(spec.nlon));
  if (spec.nt == 0) throw ValidationError("synth_pair: nt must be positive");

  Rng root(spec.seed);
  Rng static_rng = root.split(1);
  Rng large_rng = root.split(2);
  Rng noise_rng = root.split(3);

  // Sub-grid pattern: wavelengths between one and three coarse cells.
  std::vector<Wave> statics;
  for (int k = 0; k < kStaticWaves; ++k)
    statics.push_back(random_wave(static_rng, f, 3.0 * f, 0.3, 0.8));

  // Domain-scale waves whose sine/cosine amplitudes oscillate slowly in time.
  const double domain = static_cast<double>(std::max(spec.nlat, spec.nlon));
  std::vector<Wave> large;
  std::vector<Oscillator> amp_sin, amp_cos;
  for (int k = 0; k < kLargeWaves; ++k) {
    large.push_back(random_wave(large_rng, 0.6 * domain, 1.5 * domain, 1.0, 1.0));
    amp_sin.push_back({large_rng.uniform(60.0, 180.0), large_rng.uniform(0.0, kTwoPi),
                       large_rng.uniform(1.5, 3.0)});
    amp_cos.push_back({large_rng.uniform(60.0, 180.0), large_rng.uniform(0.0, kTwoPi),
                       large_rng.uniform(1.5, 3.0)});
  }
  const Oscillator seasonal{365.0, large_rng.uniform(0.0, kTwoPi), 6.0};

  const std::size_t nlat = spec.nlat, nlon = spec.nlon, nt = spec.nt;
  std::vector<double> static_field(nlat * nlon, 0.0);
  std::vector<double> large_sin(kLargeWaves * nlat * nlon), large_cos(kLargeWaves * nlat * nlon);
  for (std::size_t i = 0; i < nlat; ++i)
    for (std::size_t j = 0; j < nlon; ++j) {
      const double y = static_cast<double>(i), x = static_cast<double>(j);
      double s = 0.0;
      for (const auto& w : statics) s += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
      static_field[i * nlon + j] = s;
      for (int k = 0; k < kLargeWaves; ++k) {
        const double arg = large[k].kx * x + large[k].ky * y + large[k].phase;
        large_sin[(k * nlat + i) * nlon + j] = std::sin(arg);
        large_cos[(k * nlat + i) * nlon + j] = std::cos(arg);
      }
    }

  std::vector<Date> time;
  Date d = spec.start;
  if (!is_valid(Calendar::kStandard, d)) throw ValidationError("synth_pair: invalid start date");
  for (std::size_t t = 0; t < nt; ++t) {
    time.push_back(d);
    d = next_day(Calendar::kStandard, d);
  }

  std::vector<double> fine(nt * nlat * nlon);
  for (std::size_t t = 0; t < nt; ++t) {
    const double tt = static_cast<double>(t);
    double a[kLargeWaves], b[kLargeWaves];
    for (int k = 0; k < kLargeWaves; ++k) {
      a[k] = amp_sin[k].at(tt);
      b[k] = amp_cos[k].at(tt);
    }
    const double level = kBaseline + seasonal.at(tt);
    for (std::size_t c = 0; c < nlat * nlon; ++c) {
      double v = level + static_field[c];
      for (int k = 0; k < kLargeWaves; ++k)
        v += a[k] * large_sin[k * nlat * nlon + c] + b[k] * large_cos[k * nlat * nlon + c];
      fine[t * nlat * nlon + c] = v;
    }
  }

  const auto fine_lat = GridAxis::uniform("lat", AxisKind::kLatitude, spec.lat0 + 0.5 * spec.step,
                                          spec.step, nlat);
  const auto fine_lon = GridAxis::uniform("lon", AxisKind::kLongitude, spec.lon0 + 0.5 * spec.step,
                                          spec.step, nlon);
  DataCube fine_cube(fine_lat, fine_lon, time, Calendar::kStandard, spec.variable, "degC",
                     std::move(fine));
  DataCube pooled = block_mean(fine_cube, f);
  std::vector<double> coarse(pooled.data().begin(), pooled.data().end());
  for (double& v : coarse) {
    v += spec.bias;
    if (spec.noise_sd > 0.0) v += noise_rng.normal(0.0, spec.noise_sd);
  }
  return SynthPair{pooled.with_data(std::move(coarse)), std::move(fine_cube)};
}

DataCube block_mean(const DataCube& fine, int factor) {
  const auto f = static_cast<std::size_t>(factor);
  if (factor < 1 || fine.nlat() % f != 0 || fine.nlon() % f != 0)
    throw ValidationError("block_mean: factor " + std::to_string(factor) +
                          " does not divide the grid");
  const std::size_t cy = fine.nlat() / f, cx = fine.nlon() / f;
  auto centres = [f](const GridAxis& axis, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t q = 0; q < f; ++q) s += axis[b * f + q];
      v[b] = s / static_cast<double>(f);
    }
    return v;
  };
  GridAxis lat("lat", centres(fine.lat(), cy), AxisKind::kLatitude);
  GridAxis lon("lon", centres(fine.lon(), cx), AxisKind::kLongitude);
  std::vector<double> out(fine.nt() * cy * cx);
  const double norm = 1.0 / static_cast<double>(f * f);
  for (std::size_t t = 0; t < fine.nt(); ++t)
    for (std::size_t bi = 0; bi < cy; ++bi)
      for (std::size_t bj = 0; bj < cx; ++bj) {
        double s = 0.0;
        for (std::size_t qi = 0; qi < f; ++qi)
          for (std::size_t qj = 0; qj < f; ++qj) s += fine.at(t, bi * f + qi, bj * f + qj);
        out[(t * cy + bi) * cx + bj] = s * norm;
      }
  return DataCube(std::move(lat), std::move(lon), fine.time(), fine.calendar(), fine.variable(),
                  fine.units(), std::move(out), fine.fill());
}

ZoneMask synth_zone_mask(const GridAxis& lat, const GridAxis& lon, std::uint64_t seed,
                         double ocean_fraction) {
  Rng rng = Rng(seed).split(7);
  const std::size_t ny = lat.size(), nx = lon.size();
  const double wiggle_phase = rng.uniform(0.0, kTwoPi);
  const double wiggle_amp = 0.05 * static_cast<double>(nx);
  std::vector<int> codes(ny * nx);
  for (std::size_t i = 0; i < ny; ++i) {
    // Coastline on the western edge.
    const double coast = ocean_fraction * static_cast<double>(nx) +
                         wiggle_amp * std::sin(kTwoPi * static_cast<double>(i) /
                                                   static_cast<double>(ny) + wiggle_phase);
    const int band = static_cast<int>(i * 5 / ny) + 1;
    for (std::size_t j = 0; j < nx; ++j)
      codes[i * nx + j] = static_cast<double>(j) < coast ? kOcean : band;
  }
  return ZoneMask(lat, lon, std::move(codes));
}

}  // namespace climdown::geogrid
