#include "spatialdiar/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/fft.hpp"
#include "spatialdiar/log.hpp"
#include "spatialdiar/random.hpp"
#include "spatialdiar/speech_synth.hpp"
#include "spatialdiar/wav_io.hpp"

namespace spatialdiar {
namespace {

constexpr double kScheduleLeadIn = 0.3;   // seconds before the first turn
constexpr double kScheduleLeadOut = 0.5;  // seconds after the last turn
constexpr double kSegmentFade = 0.01;
constexpr double kMinGainFactor = 0.05;

std::string source_field(std::size_t j, const std::string& name) {
  return "sources[" + std::to_string(j) + "]." + name;
}

// Lays the dry signal along the schedule: consecutive segments consume
// consecutive stretches of the dry utterance, with short fades at the edges.
std::vector<double> schedule_signal(const std::vector<double>& dry,
                                    const std::vector<Segment>& schedule,
                                    std::size_t total, double fs,
                                    std::size_t source) {
  std::vector<double> out(total, 0.0);
  std::size_t cursor = 0;
  const double fade = kSegmentFade * fs;
  for (const auto& seg : schedule) {
    const auto start = static_cast<std::size_t>(std::llround(seg.start * fs));
    const auto end = std::min(total, static_cast<std::size_t>(std::llround(seg.end * fs)));
    if (end <= start) continue;
    const std::size_t len = end - start;
    if (cursor + len > dry.size())
      throw ValidationError(source_field(source, "schedule") +
                            ": dry signal too short for schedule");
    for (std::size_t i = 0; i < len; ++i) {
      const double di = static_cast<double>(i);
      const double rem = static_cast<double>(len - i);
      double g = 1.0;
      if (di < fade) g = di / fade;
      if (rem < fade) g = std::min(g, rem / fade);
      out[start + i] = g * dry[cursor + i];
    }
    cursor += len;
  }
  return out;
}

// Turn-taking layout: turns of equal length, consecutive turns overlapping by
// `overlap_s` (negative: gap). Two speakers alternate A-B-A.
std::vector<std::vector<Segment>> turn_schedule(const std::vector<std::size_t>& order,
                                                std::size_t num_speakers,
                                                double clip_len, double overlap_s) {
  const double span = clip_len - kScheduleLeadIn - kScheduleLeadOut;
  const double n = static_cast<double>(order.size());
  const double turn = (span + (n - 1.0) * overlap_s) / n;
  std::vector<std::vector<Segment>> out(num_speakers);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double start = kScheduleLeadIn + static_cast<double>(k) * (turn - overlap_s);
    out[order[k]].push_back({start, start + turn});
  }
  return out;
}

double max_turn_overlap(std::size_t turns, double clip_len) {
  // Keeps the overlap below half a turn so at most two turns coincide.
  const double span = clip_len - kScheduleLeadIn - kScheduleLeadOut;
  const double n = static_cast<double>(turns);
  return 0.49 * span / (n - 0.49 * (n - 1.0));
}

}  // namespace

double overlap_ratio(const BinaryActivity& activity) {
  std::size_t any = 0, multi = 0;
  for (std::size_t l = 0; l < activity.num_frames(); ++l) {
    const std::size_t c = activity.active_count(l);
    if (c >= 1) ++any;
    if (c >= 2) ++multi;
  }
  return any == 0 ? 0.0 : static_cast<double>(multi) / static_cast<double>(any);
}

void SceneConfig::validate() const {
  if (sources.empty() || sources.size() > kMaxSpeakers)
    throw ValidationError("sources: number of sources must be in 1.." +
                          std::to_string(kMaxSpeakers) + ", got " +
                          std::to_string(sources.size()));
  for (int i = 0; i < 3; ++i)
    if (!(room.dims[i] > 0.0)) throw ValidationError("room.dims: must be positive");
  if (room.t60 < 0.0) throw ValidationError("room.t60: must be non-negative");
  if (!(room.speed_of_sound > 0.0))
    throw ValidationError("room.speed_of_sound: must be positive");
  if (array.num_mics() < 2)
    throw ValidationError("array.mic_positions: at least two microphones required");
  if (array.reference_index >= array.num_mics())
    throw ValidationError("array.reference_index: out of range");
  for (std::size_t m = 0; m < array.num_mics(); ++m)
    if (!room.contains(array.mic_positions[m]))
      throw ValidationError("array.mic_positions[" + std::to_string(m) +
                            "]: outside room");
  if (!(clip_len > 0.0)) throw ValidationError("clip_len: must be positive");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate: must be positive");
  if (target_overlap_ratio < 0.0 || target_overlap_ratio > 0.4)
    throw ValidationError("target_overlap_ratio: must be in [0, 0.4]");
  if (gain_mismatch_sigma < 0.0)
    throw ValidationError("gain_mismatch_sigma: must be non-negative");
  if (snr_db && !std::isfinite(*snr_db)) throw ValidationError("snr_db: must be finite");

  std::size_t with_schedule = 0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto& s = sources[j];
    if (!room.contains(s.position))
      throw ValidationError(source_field(j, "position") + ": outside room");
    if (s.level_offset_db < -5.0 || s.level_offset_db > 5.0)
      throw ValidationError(source_field(j, "level_offset_db") + ": must be in [-5, 5]");
    for (const auto& seg : s.schedule) {
      if (!(seg.start >= 0.0 && seg.end > seg.start))
        throw ValidationError(source_field(j, "schedule") + ": invalid segment");
      if (seg.end > clip_len + 1e-9)
        throw ValidationError(source_field(j, "schedule") + ": segment exceeds clip");
    }
    if (!s.schedule.empty()) ++with_schedule;
  }
  if (with_schedule != 0 && with_schedule != sources.size())
    throw ValidationError("sources: either every source or none must carry a schedule");
}

std::vector<std::vector<double>> prepare_dry_signals(const SceneConfig& cfg) {
  std::vector<std::vector<double>> dry;
  for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
    const auto& s = cfg.sources[j];
    if (s.dry_path) {
      WaveBuffer w = read_wav(*s.dry_path);
      if (std::abs(w.sample_rate() - cfg.sample_rate) > 1e-9)
        throw ValidationError(source_field(j, "dry_path") + ": sample rate mismatch");
      auto ch = w.channel(0);
      dry.emplace_back(ch.begin(), ch.end());
    } else {
      auto rng = substream(cfg.seed, Stream::kSpeech, j);
      SpeechSynthOptions opts;
      opts.sample_rate = cfg.sample_rate;
      dry.push_back(synthesize_speech(cfg.clip_len, rng(), opts));
    }
  }
  return dry;
}

BinaryActivity ground_truth_activity(const WaveBuffer& images,
                                     const StftParams& params,
                                     double threshold_db) {
  params.validate();
  const std::size_t frames = params.num_frames(images.length());
  const auto window = analysis_window(params);
  const double ratio = std::pow(10.0, threshold_db / 10.0);
  BinaryActivity act(images.num_channels(), frames);
  std::vector<double> frame_energy(frames);
  const long n = static_cast<long>(images.length());
  for (std::size_t j = 0; j < images.num_channels(); ++j) {
    auto x = images.channel(j);
    double peak = 0.0;
    for (std::size_t l = 0; l < frames; ++l) {
      const long start = params.frame_start(l);
      double e = 0.0;
      for (std::size_t k = 0; k < params.frame_len; ++k) {
        const long idx = start + static_cast<long>(k);
        if (idx < 0 || idx >= n) continue;
        const double v = x[static_cast<std::size_t>(idx)] * window[k];
        e += v * v;
      }
      frame_energy[l] = e;
      peak = std::max(peak, e);
    }
    if (peak <= 0.0) {
      log_warning("ground truth image " + std::to_string(j) +
                  " is silent; its activity row is all-inactive");
      continue;
    }
    for (std::size_t l = 0; l < frames; ++l)
      act.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) =
          frame_energy[l] > peak * ratio ? 1 : 0;
  }
  return act;
}

GainMismatch apply_gain_mismatch(const WaveBuffer& wave, double sigma,
                                 std::uint64_t seed,
                                 std::optional<std::size_t> skip_channel) {
  if (sigma < 0.0) throw ValidationError("gain mismatch sigma must be non-negative");
  GainMismatch out{wave, std::vector<double>(wave.num_channels(), 1.0)};
  if (sigma == 0.0) return out;
  for (std::size_t m = 0; m < wave.num_channels(); ++m) {
    if (skip_channel && *skip_channel == m) continue;
    auto rng = substream(seed, Stream::kGain, m);
    std::normal_distribution<double> eta(0.0, sigma);
    const double factor = std::max(1.0 + eta(rng), kMinGainFactor);
    out.factors[m] = factor;
    for (double& v : out.wave.channel(m)) v *= factor;
  }
  return out;
}

RenderedScene render_scene(const SceneConfig& cfg, const RenderOptions& options) {
  return render_scene(cfg, prepare_dry_signals(cfg), options);
}

RenderedScene render_scene(const SceneConfig& cfg,
                           const std::vector<std::vector<double>>& dry_in,
                           const RenderOptions& options) {
  cfg.validate();
  const std::size_t num_src = cfg.sources.size();
  if (dry_in.size() != num_src)
    throw ValidationError("render_scene: expected " + std::to_string(num_src) +
                          " dry signals, got " + std::to_string(dry_in.size()));
  const double fs = cfg.sample_rate;
  StftParams framing = options.framing;
  framing.sample_rate = fs;
  RirOptions rir_opts = options.rir;
  rir_opts.sample_rate = fs;
  const auto total = static_cast<std::size_t>(std::llround(cfg.clip_len * fs));
  const std::size_t num_mics = cfg.array.num_mics();
  const std::size_t ref = cfg.array.reference_index;

  std::vector<std::vector<double>> dry(num_src);
  for (std::size_t j = 0; j < num_src; ++j) {
    const double level = rms(dry_in[j]);
    if (level <= 0.0)
      throw ValidationError(source_field(j, "dry") + ": dry signal is silent");
    const double gain = std::pow(10.0, cfg.sources[j].level_offset_db / 20.0) / level;
    dry[j].resize(dry_in[j].size());
    std::transform(dry_in[j].begin(), dry_in[j].end(), dry[j].begin(),
                   [gain](double v) { return v * gain; });
  }

  std::vector<std::vector<Rir>> rirs(num_src);
  std::size_t max_rir = 1;
  for (std::size_t j = 0; j < num_src; ++j) {
    rirs[j] = simulate_rir(cfg.room, cfg.sources[j].position, cfg.array, rir_opts);
    for (const auto& r : rirs[j]) max_rir = std::max(max_rir, r.taps.size());
  }

  // Resolve the schedule.
  std::vector<std::vector<Segment>> schedules(num_src);
  if (!cfg.sources.front().schedule.empty()) {
    for (std::size_t j = 0; j < num_src; ++j) schedules[j] = cfg.sources[j].schedule;
  } else if (num_src == 1) {
    schedules[0] = {{kScheduleLeadIn, cfg.clip_len - kScheduleLeadOut}};
  } else {
    std::vector<std::size_t> order(num_src);
    for (std::size_t j = 0; j < num_src; ++j) order[j] = j;
    auto rng = substream(cfg.seed, Stream::kSchedule);
    std::shuffle(order.begin(), order.end(), rng);
    if (num_src == 2) order.push_back(order.front());

    // Achieved overlap is measured on the reverberant reference images, so
    // search the turn overlap until the measured ratio meets the target.
    auto measure = [&](double overlap_s) {
      auto sched = turn_schedule(order, num_src, cfg.clip_len, overlap_s);
      WaveBuffer images(num_src, total, fs);
      for (std::size_t j = 0; j < num_src; ++j) {
        auto sig = schedule_signal(dry[j], sched[j], total, fs, j);
        auto img = fft_convolve(sig, rirs[j][ref].taps);
        std::copy_n(img.begin(), total, images.channel(j).begin());
      }
      return overlap_ratio(ground_truth_activity(images, framing));
    };
    double lo = -1.0;
    double hi = max_turn_overlap(order.size(), cfg.clip_len);
    const double target = cfg.target_overlap_ratio;
    double best = lo, best_err = std::numeric_limits<double>::infinity();
    auto consider = [&](double x, double ratio) {
      const double err = std::abs(ratio - target);
      if (err < best_err) {
        best_err = err;
        best = x;
      }
    };
    const double r_lo = measure(lo);
    consider(lo, r_lo);
    if (r_lo < target) {
      const double r_hi = measure(hi);
      consider(hi, r_hi);
      if (r_hi > target) {
        for (int it = 0; it < 14 && best_err > 0.01; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double r = measure(mid);
          consider(mid, r);
          (r < target ? lo : hi) = mid;
        }
      }
    }
    schedules = turn_schedule(order, num_src, cfg.clip_len, best);
  }

  // Reverberant images at every microphone.
  RenderedScene out;
  WaveBuffer clean(num_mics, total, fs);
  out.truth.images = WaveBuffer(num_src, total, fs);
  if (options.keep_components) out.source_images.reserve(num_src);
  for (std::size_t j = 0; j < num_src; ++j) {
    auto sig = schedule_signal(dry[j], schedules[j], total, fs, j);
    FftConvolver conv(sig, max_rir);
    WaveBuffer img(num_mics, total, fs);
    for (std::size_t m = 0; m < num_mics; ++m) {
      auto y = conv.convolve_truncated(rirs[j][m].taps);
      auto dst = img.channel(m);
      std::copy(y.begin(), y.end(), dst.begin());
      auto acc = clean.channel(m);
      for (std::size_t n = 0; n < total; ++n) acc[n] += dst[n];
    }
    auto ref_img = img.channel(ref);
    std::copy(ref_img.begin(), ref_img.end(), out.truth.images.channel(j).begin());
    if (options.keep_components) out.source_images.push_back(std::move(img));
  }

  WaveBuffer noise(num_mics, total, fs);
  double achieved_snr = std::numeric_limits<double>::infinity();
  if (cfg.snr_db) {
    for (std::size_t m = 0; m < num_mics; ++m) {
      auto rng = substream(cfg.seed, Stream::kNoise, m);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (double& v : noise.channel(m)) v = gauss(rng);
    }
    const double signal_energy = energy(clean.channel(ref));
    const double noise_energy = energy(noise.channel(ref));
    const double scale =
        std::sqrt(signal_energy / (noise_energy * std::pow(10.0, *cfg.snr_db / 10.0)));
    for (std::size_t m = 0; m < num_mics; ++m)
      for (double& v : noise.channel(m)) v *= scale;
    achieved_snr = 10.0 * std::log10(signal_energy / energy(noise.channel(ref)));
  }

  WaveBuffer mixture(num_mics, total, fs);
  for (std::size_t m = 0; m < num_mics; ++m) {
    auto c = clean.channel(m);
    auto v = noise.channel(m);
    auto x = mixture.channel(m);
    for (std::size_t n = 0; n < total; ++n) x[n] = c[n] + v[n];
  }

  auto mismatch = apply_gain_mismatch(mixture, cfg.gain_mismatch_sigma, cfg.seed, ref);
  if (options.keep_components) {
    out.noise = std::move(noise);
    out.mixture_before_mismatch = mixture;
  }
  out.mixture = std::move(mismatch.wave);

  out.truth.activity = ground_truth_activity(out.truth.images, framing);
  out.truth.schedules = schedules;

  auto& prov = out.provenance;
  prov.seed = cfg.seed;
  prov.gain_factors = mismatch.factors;
  prov.achieved_overlap_ratio = overlap_ratio(out.truth.activity);
  prov.achieved_snr_db = achieved_snr;
  prov.wall_absorption =
      cfg.room.t60 > 0.0 ? wall_absorption(cfg.room, rir_opts.absorption) : 1.0;
  for (std::size_t j = 0; j < num_src; ++j) {
    double t60 = 0.0;
    if (cfg.room.t60 > 0.0) {
      try {
        t60 = schroeder_t60(rirs[j][ref].taps, fs);
      } catch (const ValidationError&) {
        t60 = 0.0;
      }
    }
    prov.rir_t60_estimates.push_back(t60);
  }
  return out;
}

ArrayGeometry preset_geometry(ArrayPreset preset, const Vec3& center) {
  switch (preset) {
    case ArrayPreset::kG1:
      return ArrayGeometry::ula(center, 4, 0.08);
    case ArrayPreset::kG2:
      return ArrayGeometry::ula(center, 4, 0.16);
    case ArrayPreset::kG3:
      return ArrayGeometry::ula(center, 3, 0.08);
  }
  throw ValidationError("unknown array preset");
}

SceneConfig random_scene(const ScenePreset& preset, std::uint64_t seed) {
  if (preset.num_speakers < 1 || preset.num_speakers > kMaxSpeakers)
    throw ValidationError("num_speakers: must be in 1..4");
  auto rng = substream(seed, Stream::kScene);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneConfig cfg;
  cfg.seed = seed;
  cfg.clip_len = preset.clip_len;
  cfg.snr_db = preset.snr_db;
  cfg.gain_mismatch_sigma = preset.gain_mismatch_sigma;
  cfg.room.dims = {uniform(3.0, 7.0), uniform(3.0, 7.0), uniform(2.5, 3.0)};
  if (preset.t60) {
    cfg.room.t60 = *preset.t60;
  } else {
    static constexpr double kT60s[] = {0.2, 0.3, 0.4, 0.5, 0.6};
    cfg.room.t60 = kT60s[std::uniform_int_distribution<int>(0, 4)(rng)];
  }
  cfg.target_overlap_ratio =
      preset.num_speakers == 1 ? 0.0
                               : (preset.overlap_ratio ? *preset.overlap_ratio
                                                       : uniform(0.0, 0.4));

  // Array 0.5 m from the y = 0 wall, broadside facing into the room.
  const Vec3 center{cfg.room.dims[0] / 2.0, 0.5, uniform(1.1, 1.5)};
  cfg.array = preset_geometry(preset.geometry, center);

  std::vector<double> azimuths;
  const double deg = std::numbers::pi / 180.0;
  int attempts = 0;
  while (azimuths.size() < preset.num_speakers) {
    if (++attempts > 10000)
      throw ValidationError("random_scene: cannot place sources in this room");
    const double az = uniform(-preset.max_abs_azimuth_deg, preset.max_abs_azimuth_deg);
    bool separated = std::all_of(azimuths.begin(), azimuths.end(), [&](double a) {
      return std::abs(a - az) >= preset.min_separation_deg;
    });
    if (!separated) continue;
    const double d = uniform(preset.min_source_distance, preset.max_source_distance);
    const Vec3 pos{center[0] + d * std::sin(az * deg), center[1] + d * std::cos(az * deg),
                   center[2] + uniform(-0.1, 0.2)};
    if (!cfg.room.contains(pos, 0.3)) continue;
    azimuths.push_back(az);
    SourceSpec src;
    src.position = pos;
    src.level_offset_db = uniform(-2.5, 2.5);
    cfg.sources.push_back(src);
  }
  return cfg;
}

}  // namespace spatialdiar
