#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/rir.hpp"
#include "spatialdiar/stft.hpp"
#include "spatialdiar/wave.hpp"

namespace spatialdiar {

inline constexpr std::size_t kMaxSpeakers = 4;

struct Segment {
  double start = 0.0;  // seconds
  double end = 0.0;
  bool operator==(const Segment&) const = default;
};

struct SourceSpec {
  Vec3 position{};
  // Mono WAV with the dry utterance; a speech-like signal is synthesized when
  // absent.
  std::optional<std::string> dry_path;
  // Explicit speaking schedule. Leave every source's schedule empty to let the
  // renderer place turns that meet target_overlap_ratio.
  std::vector<Segment> schedule;
  double level_offset_db = 0.0;
};

struct SceneConfig {
  RoomSpec room;
  ArrayGeometry array;
  std::vector<SourceSpec> sources;
  double clip_len = 12.0;
  double target_overlap_ratio = 0.0;
  std::optional<double> snr_db = 20.0;  // nullopt: no sensor noise
  double gain_mismatch_sigma = 0.0;
  std::uint64_t seed = 0;
  double sample_rate = 16000.0;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct GroundTruth {
  WaveBuffer images;  // J x samples, reverberant image at the reference mic
  BinaryActivity activity;
  std::vector<std::vector<Segment>> schedules;
  std::size_t num_speakers() const { return activity.num_speakers(); }
};

struct SceneProvenance {
  std::uint64_t seed = 0;
  std::vector<double> gain_factors;  // per channel, 1 where not applied
  double achieved_overlap_ratio = 0.0;
  double achieved_snr_db = 0.0;  // +inf without noise
  double wall_absorption = 1.0;
  std::vector<double> rir_t60_estimates;  // reference-mic response per source
};

struct RenderOptions {
  StftParams framing;
  RirOptions rir;
  // Keep every source's multichannel image and the noise for inspection.
  bool keep_components = false;
};

struct RenderedScene {
  WaveBuffer mixture;
  GroundTruth truth;
  SceneProvenance provenance;
  // Filled only with RenderOptions::keep_components.
  std::vector<WaveBuffer> source_images;
  WaveBuffer noise;
  WaveBuffer mixture_before_mismatch;
};

// Loads dry WAVs named in the config and synthesizes the rest.
std::vector<std::vector<double>> prepare_dry_signals(const SceneConfig& cfg);

RenderedScene render_scene(const SceneConfig& cfg,
                           const std::vector<std::vector<double>>& dry,
                           const RenderOptions& options = {});
RenderedScene render_scene(const SceneConfig& cfg,
                           const RenderOptions& options = {});

struct GainMismatch {
  WaveBuffer wave;
  std::vector<double> factors;
};

// Scales channel m by max(1 + eta_m, 0.05), eta_m ~ N(0, sigma^2), drawn from
// a per-channel substream of `seed`. With `skip_channel`, that channel keeps
// factor 1.
GainMismatch apply_gain_mismatch(const WaveBuffer& wave, double sigma,
                                 std::uint64_t seed,
                                 std::optional<std::size_t> skip_channel = {});

// Frame j,l is active iff the analysis-windowed frame energy of image j
// exceeds its peak frame energy by no more than `threshold_db`.
BinaryActivity ground_truth_activity(const WaveBuffer& images,
                                     const StftParams& params,
                                     double threshold_db = -40.0);

enum class ArrayPreset { kG1, kG2, kG3 };

ArrayGeometry preset_geometry(ArrayPreset preset, const Vec3& center);

// Knobs of the randomized scene generator.
struct ScenePreset {
  std::size_t num_speakers = 2;
  std::optional<double> t60;            // random from {0.2 .. 0.6} when empty
  std::optional<double> overlap_ratio;  // uniform in [0, 0.4] when empty
  std::optional<double> snr_db = 20.0;
  ArrayPreset geometry = ArrayPreset::kG1;
  double gain_mismatch_sigma = 0.0;
  double clip_len = 12.0;
  double min_source_distance = 1.0;
  double max_source_distance = 2.0;
  double max_abs_azimuth_deg = 75.0;
  double min_separation_deg = 15.0;
};

SceneConfig random_scene(const ScenePreset& preset, std::uint64_t seed);

}  // namespace spatialdiar
