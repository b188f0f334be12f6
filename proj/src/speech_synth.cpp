#include "spatialdiar/speech_synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/wave.hpp"

namespace spatialdiar {
namespace {

constexpr std::size_t kNumFormants = 3;

// Two-pole digital resonator with unity gain at DC.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;

  double step(double x, double freq, double bandwidth, double fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth / fs);
    const double b = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    const double c = -r * r;
    const double a = 1.0 - b - c;
    const double y = a * x + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct Syllable {
  std::size_t start;
  std::size_t length;
  bool voiced;
  double f0_start, f0_end;
  std::array<double, kNumFormants> formants;
  double gain;
};

}  // namespace

std::vector<double> synthesize_speech(double duration_s, std::uint64_t seed,
                                      const SpeechSynthOptions& options) {
  if (!(duration_s > 0.0)) throw ValidationError("speech duration must be positive");
  const double fs = options.sample_rate;
  const auto total = static_cast<std::size_t>(std::llround(duration_s * fs));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double speaker_f0 = uniform(options.min_f0_hz, options.max_f0_hz);
  const double formant_scale = uniform(0.9, 1.15);

  std::vector<Syllable> syllables;
  std::size_t pos = 0;
  while (pos < total) {
    Syllable s;
    s.start = pos;
    s.length = static_cast<std::size_t>(
        uniform(options.min_syllable_s, options.max_syllable_s) * fs);
    s.voiced = unit(rng) >= options.unvoiced_probability;
    s.f0_start = speaker_f0 * uniform(0.85, 1.2);
    s.f0_end = speaker_f0 * uniform(0.8, 1.15);
    s.formants = {uniform(300.0, 850.0) * formant_scale,
                  uniform(900.0, 2300.0) * formant_scale,
                  uniform(2400.0, 3300.0) * formant_scale};
    // Syllable RMS in dB; fricatives sit well below vowels.
    s.gain = s.voiced ? uniform(-6.0, 0.0) : uniform(-15.0, -8.0);
    syllables.push_back(s);
    pos += s.length + static_cast<std::size_t>(uniform(0.0, options.max_pause_s) * fs);
  }

  std::vector<double> out(total, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::array<Resonator, kNumFormants> resonators;
  const std::array<double, kNumFormants> bandwidths{90.0, 120.0, 180.0};
  double phase = 0.0;
  double glottal_lp = 0.0;
  double prev_filtered = 0.0;
  const double ramp = 0.02 * fs;

  std::vector<double> buf;
  for (const auto& s : syllables) {
    const std::size_t n = std::min(s.length, total - s.start);
    buf.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(s.length);
      double excitation = 0.0;
      if (s.voiced) {
        const double f0 = s.f0_start + (s.f0_end - s.f0_start) * t;
        phase += f0 / fs;
        if (phase >= 1.0) {
          phase -= 1.0;
          excitation += 1.0;
        }
        // Glottal pulse shaping: one-pole low-pass on the impulse train.
        glottal_lp = 0.92 * glottal_lp + excitation;
        excitation = glottal_lp + options.aspiration_level * gauss(rng);
      } else {
        excitation = 0.6 * gauss(rng);
      }

      double y = excitation;
      if (s.voiced) {
        for (std::size_t k = 0; k < kNumFormants; ++k)
          y = resonators[k].step(y, s.formants[k], bandwidths[k], fs);
      } else {
        // Fricative: single broad resonance high in the spectrum.
        y = resonators[2].step(y, 1.6 * s.formants[2], 1500.0, fs);
      }
      // Lip radiation.
      const double radiated = y - prev_filtered;
      prev_filtered = y;

      const double di = static_cast<double>(i);
      const double len = static_cast<double>(s.length);
      double env = 1.0;
      if (di < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * di / ramp);
      if (len - di < ramp)
        env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - di) / ramp));
      buf[i] = env * radiated;
    }
    // The resonator chain's gain depends strongly on formant placement, so
    // each syllable is scaled to its drawn level.
    const double level = rms(buf);
    const double scale = level > 0.0 ? std::pow(10.0, s.gain / 20.0) / level : 0.0;
    for (std::size_t i = 0; i < n; ++i) out[s.start + i] = scale * buf[i];
  }

  const double level = rms(out);
  if (level > 0.0)
    for (double& v : out) v /= level;
  return out;
}

}  // namespace spatialdiar
