#include "spatialdiar/rir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {
namespace {

constexpr double kMinSourceMicDistance = 0.1;

// 24 ln(10): converts Sabine/Eyring absorption area to T60 with c in m/s.
const double kDecayConstant = 24.0 * std::numbers::ln10;

struct AxisImage {
  double coord;  // image coordinate along this axis
  int reflections;
};

// Images along one axis for wall length `len`, source coordinate `s`:
// coordinate 2 n len + (1 - 2q) s hits the walls |n - q| + |n| times.
std::vector<AxisImage> axis_images(double len, double s, double mic,
                                   double max_dist) {
  std::vector<AxisImage> out;
  const int n_max = static_cast<int>(std::ceil(max_dist / (2.0 * len))) + 1;
  for (int n = -n_max; n <= n_max; ++n) {
    for (int q = 0; q <= 1; ++q) {
      const double coord = 2.0 * n * len + (1 - 2 * q) * s;
      if (std::abs(coord - mic) > max_dist) continue;
      out.push_back({coord, std::abs(n - q) + std::abs(n)});
    }
  }
  return out;
}

void add_fractional_impulse(std::vector<double>& taps, double delay,
                            double amplitude, std::size_t half_width) {
  const long center = std::lround(delay);
  const long w = static_cast<long>(half_width);
  const double win_len = static_cast<double>(half_width + 1);
  for (long n = center - w; n <= center + w; ++n) {
    if (n < 0 || n >= static_cast<long>(taps.size())) continue;
    const double t = static_cast<double>(n) - delay;
    const double sinc =
        t == 0.0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double hann = 0.5 * (1.0 + std::cos(std::numbers::pi * t / win_len));
    taps[static_cast<std::size_t>(n)] += amplitude * sinc * hann;
  }
}

// sum_i |u_i| / L_i over an octant grid uniform in (cos theta, phi); the
// other octants are mirror images.
std::vector<double> direction_rates(const Vec3& dims) {
  constexpr int kGrid = 48;
  std::vector<double> rates;
  rates.reserve(kGrid * kGrid);
  for (int a = 0; a < kGrid; ++a) {
    const double z = (a + 0.5) / kGrid;
    const double rho = std::sqrt(1.0 - z * z);
    for (int b = 0; b < kGrid; ++b) {
      const double phi = 0.5 * std::numbers::pi * (b + 0.5) / kGrid;
      rates.push_back(rho * std::cos(phi) / dims[0] + rho * std::sin(phi) / dims[1] +
                      z / dims[2]);
    }
  }
  return rates;
}

// Modelled energy decay curve in dB, relative to t = 0. `attenuation` is
// -ln(1 - alpha) * c (per meter of travel times speed of sound).
double model_edc_db(const std::vector<double>& rates, double attenuation, double t) {
  double e = 0.0, e0 = 0.0;
  for (double r : rates) {
    const double k = attenuation * r;
    e += std::exp(-k * t) / k;
    e0 += 1.0 / k;
  }
  return 10.0 * std::log10(e / e0);
}

// Least-squares decay slope (dB/s) over samples of a decay curve between -5 dB
// and `floor_db`.
struct DecayFit {
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t count = 0;
  void add(double t, double db) {
    st += t;
    sy += db;
    stt += t * t;
    sty += t * db;
    ++count;
  }
  double t60() const {
    const double n = static_cast<double>(count);
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    return -60.0 / slope;
  }
};

double attenuation_for(const RoomSpec& room, double alpha) {
  return -std::log1p(-std::min(alpha, 1.0 - 1e-15)) * room.speed_of_sound;
}

}  // namespace

namespace {

// The model curve depends on attenuation * t only, so these are computed once
// at unit attenuation and rescaled.
double unit_t60(const std::vector<double>& rates, double fit_floor_db) {
  const double slowest = *std::min_element(rates.begin(), rates.end());
  const double dt = 1.0 / (slowest * 400.0);
  DecayFit fit;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double db = model_edc_db(rates, 1.0, t);
    if (db < fit_floor_db) break;
    if (db <= -5.0) fit.add(t, db);
  }
  return fit.t60();
}

double unit_decay_time(const std::vector<double>& rates, double level_db) {
  double lo = 0.0, hi = 0.1;
  while (model_edc_db(rates, 1.0, hi) > level_db) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (model_edc_db(rates, 1.0, mid) > level_db ? lo : hi) = mid;
  }
  return hi;
}

// Second-order 100 Hz high-pass applied to every image-source response, as in
// the original image method; without it the all-positive image pulses build a
// slowly decaying low-frequency offset in the tail.
void highpass_100hz(std::vector<double>& x, double fs) {
  const double w = 2.0 * std::numbers::pi * 100.0 / fs;
  const double r1 = std::exp(-w);
  const double b1 = 2.0 * r1 * std::cos(w);
  const double b2 = -r1 * r1;
  const double a1 = -(1.0 + r1);
  double y0 = 0.0, y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    y2 = y1;
    y1 = y0;
    y0 = b1 * y1 + b2 * y2 + v;
    v = y0 + a1 * y1 + r1 * y2;
  }
}

}  // namespace

double predicted_t60(const RoomSpec& room, double alpha, double fit_floor_db) {
  return unit_t60(direction_rates(room.dims), fit_floor_db) / attenuation_for(room, alpha);
}

double predicted_decay_time(const RoomSpec& room, double alpha, double level_db) {
  return unit_decay_time(direction_rates(room.dims), level_db) / attenuation_for(room, alpha);
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool RoomSpec::contains(const Vec3& p, double margin) const {
  for (int i = 0; i < 3; ++i)
    if (!(p[i] > margin && p[i] < dims[i] - margin)) return false;
  return true;
}

Vec3 ArrayGeometry::center() const {
  Vec3 c{0.0, 0.0, 0.0};
  for (const auto& p : mic_positions)
    for (int i = 0; i < 3; ++i) c[i] += p[i];
  const double n = static_cast<double>(std::max<std::size_t>(1, mic_positions.size()));
  for (double& v : c) v /= n;
  return c;
}

ArrayGeometry ArrayGeometry::ula(const Vec3& center, std::size_t num_mics,
                                 double spacing) {
  ArrayGeometry g;
  const double offset = 0.5 * spacing * static_cast<double>(num_mics - 1);
  for (std::size_t i = 0; i < num_mics; ++i)
    g.mic_positions.push_back(
        {center[0] - offset + spacing * static_cast<double>(i), center[1], center[2]});
  return g;
}

double wall_absorption(const RoomSpec& room, AbsorptionModel model) {
  if (room.t60 <= 0.0) return 1.0;
  if (model == AbsorptionModel::kDirectional) {
    const double k = unit_t60(direction_rates(room.dims), -25.0);
    return -std::expm1(-k / (room.speed_of_sound * room.t60));
  }
  const double x =
      kDecayConstant * room.volume() / (room.speed_of_sound * room.surface() * room.t60);
  const double alpha = model == AbsorptionModel::kSabine ? x : 1.0 - std::exp(-x);
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("T60 of " + std::to_string(room.t60) +
                          " s is unattainable for this room (absorption " +
                          std::to_string(alpha) + ")");
  return alpha;
}

std::vector<Rir> simulate_rir(const RoomSpec& room, const Vec3& source,
                              const ArrayGeometry& array,
                              const RirOptions& options) {
  for (int i = 0; i < 3; ++i)
    if (!(room.dims[i] > 0.0)) throw ValidationError("room dimensions must be positive");
  if (room.t60 < 0.0) throw ValidationError("t60 must be non-negative");
  if (!room.contains(source)) throw ValidationError("source outside room");
  for (std::size_t m = 0; m < array.num_mics(); ++m) {
    const auto& mic = array.mic_positions[m];
    if (!room.contains(mic))
      throw ValidationError("microphone " + std::to_string(m) + " outside room");
    if (distance(mic, source) < kMinSourceMicDistance)
      throw ValidationError("source closer than 0.1 m to microphone " +
                            std::to_string(m));
  }

  const double fs = options.sample_rate;
  const double c = room.speed_of_sound;
  const bool anechoic = room.t60 <= 0.0;
  const double alpha = anechoic ? 1.0 : wall_absorption(room, options.absorption);
  const double beta = std::sqrt(1.0 - alpha);
  double tail_s = 0.0;
  if (!anechoic)
    tail_s = options.absorption == AbsorptionModel::kDirectional
                 ? predicted_decay_time(room, alpha, options.residual_db)
                 : room.t60 * options.residual_db / -60.0;

  std::vector<Rir> out;
  out.reserve(array.num_mics());
  for (const auto& mic : array.mic_positions) {
    const double direct = distance(mic, source);
    const double max_dist = direct + tail_s * c;
    const std::size_t len = static_cast<std::size_t>(
        std::ceil(max_dist / c * fs)) + options.sinc_half_width + 1;

    Rir rir;
    rir.sample_rate = fs;
    rir.taps.assign(len, 0.0);
    rir.direct_delay_samples = direct / c * fs;

    if (anechoic) {
      add_fractional_impulse(rir.taps, rir.direct_delay_samples,
                             1.0 / (4.0 * std::numbers::pi * direct),
                             options.sinc_half_width);
      rir.num_images = 1;
      out.push_back(std::move(rir));
      continue;
    }

    const auto xs = axis_images(room.dims[0], source[0], mic[0], max_dist);
    const auto ys = axis_images(room.dims[1], source[1], mic[1], max_dist);
    const auto zs = axis_images(room.dims[2], source[2], mic[2], max_dist);
    const double max_d2 = max_dist * max_dist;
    for (const auto& ix : xs) {
      const double dx = ix.coord - mic[0];
      const double dx2 = dx * dx;
      for (const auto& iy : ys) {
        const double dy = iy.coord - mic[1];
        const double dxy2 = dx2 + dy * dy;
        if (dxy2 > max_d2) continue;
        for (const auto& iz : zs) {
          const double dz = iz.coord - mic[2];
          const double d2 = dxy2 + dz * dz;
          if (d2 > max_d2) continue;
          const double d = std::sqrt(d2);
          const int order = ix.reflections + iy.reflections + iz.reflections;
          const double amp =
              std::pow(beta, order) / (4.0 * std::numbers::pi * d);
          add_fractional_impulse(rir.taps, d / c * fs, amp, options.sinc_half_width);
          rir.max_reflection_order = std::max(rir.max_reflection_order, order);
          ++rir.num_images;
        }
      }
    }
    if (options.highpass) highpass_100hz(rir.taps, fs);
    out.push_back(std::move(rir));
  }
  return out;
}

double schroeder_t60(const std::vector<double>& taps, double sample_rate,
                     double fit_floor_db) {
  std::vector<double> edc(taps.size());
  double acc = 0.0;
  for (std::size_t i = taps.size(); i-- > 0;) {
    acc += taps[i] * taps[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw ValidationError("schroeder_t60: silent response");
  DecayFit fit;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / acc);
    if (db > -5.0) continue;
    if (db < fit_floor_db) break;
    fit.add(static_cast<double>(i) / sample_rate, db);
  }
  if (fit.count < 2) throw ValidationError("schroeder_t60: decay range not reached");
  return fit.t60();
}

}  // namespace spatialdiar
