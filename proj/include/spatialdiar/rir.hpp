#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace spatialdiar {

using Vec3 = std::array<double, 3>;

double distance(const Vec3& a, const Vec3& b);

struct RoomSpec {
  Vec3 dims{5.0, 4.0, 3.0};  // length, width, height in meters
  double t60 = 0.3;          // seconds; 0 means anechoic
  double speed_of_sound = 343.0;

  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const {
    return 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  }
  bool contains(const Vec3& p, double margin = 0.0) const;
};

struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  std::size_t reference_index = 0;

  std::size_t num_mics() const { return mic_positions.size(); }
  Vec3 center() const;

  // Uniform linear array along the x axis, centered at `center`.
  static ArrayGeometry ula(const Vec3& center, std::size_t num_mics,
                           double spacing);
};

// How the uniform wall absorption coefficient is derived from T60.
// kDirectional inverts the shoebox image-source decay itself: an image in
// direction u meets c t sum_i |u_i| / L_i walls by time t, so the late decay
// is set by the directions grazing the largest dimensions and runs slower
// than the diffuse-field Sabine and Eyring formulas predict.
enum class AbsorptionModel { kDirectional, kEyring, kSabine };

struct RirOptions {
  AbsorptionModel absorption = AbsorptionModel::kDirectional;
  // Reflections are kept until the modelled energy decay reaches this level.
  double residual_db = -60.0;
  // Half-width (taps) of the Hann-windowed sinc fractional-delay kernel.
  std::size_t sinc_half_width = 16;
  // 100 Hz high-pass on reverberant responses (removes the low-frequency
  // build-up of the all-positive image pulses).
  bool highpass = true;
  double sample_rate = 16000.0;
};

struct Rir {
  std::vector<double> taps;
  double sample_rate = 16000.0;
  double direct_delay_samples = 0.0;
  int max_reflection_order = 0;
  std::size_t num_images = 0;
};

// Uniform absorption coefficient reaching `room.t60`. Throws ValidationError
// when the target is unattainable (coefficient outside (0, 1]).
double wall_absorption(const RoomSpec& room, AbsorptionModel model);

// Schroeder T60 (same -5 dB .. fit_floor_db fit) of the directional decay
// model for wall absorption `alpha`.
double predicted_t60(const RoomSpec& room, double alpha, double fit_floor_db = -25.0);

// Time at which the modelled energy decay curve falls to `level_db`.
double predicted_decay_time(const RoomSpec& room, double alpha, double level_db);

// Image-source simulation of a shoebox room, one response per microphone.
// Throws ValidationError for positions outside the room or a source closer
// than 0.1 m to any microphone.
std::vector<Rir> simulate_rir(const RoomSpec& room, const Vec3& source,
                              const ArrayGeometry& array,
                              const RirOptions& options = {});

// Reverberation time from Schroeder backward integration, fitted between
// -5 dB and `fit_floor_db` and extrapolated to 60 dB of decay.
double schroeder_t60(const std::vector<double>& taps, double sample_rate,
                     double fit_floor_db = -25.0);

}  // namespace spatialdiar
