#include "spatialdiar/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <unistd.h>

#include "spatialdiar/activity_io.hpp"
#include "spatialdiar/coherence_io.hpp"
#include "spatialdiar/errors.hpp"
#include "spatialdiar/json_fields.hpp"
#include "spatialdiar/linalg.hpp"
#include "spatialdiar/log.hpp"
#include "spatialdiar/scene_config.hpp"
#include "spatialdiar/wav_io.hpp"

namespace spatialdiar {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string speaker_file_name(std::size_t j) { return "spk" + std::to_string(j) + ".wav"; }

TimingProbe::Scope::Scope(TimingProbe& p, std::string s)
    : probe(p), stage(std::move(s)), start(std::chrono::steady_clock::now()),
      evd_start(linalg::eigendecomposition_count()) {}

TimingProbe::Scope::~Scope() {
  const auto dt = std::chrono::steady_clock::now() - start;
  probe.stages_.push_back({stage, std::chrono::duration<double>(dt).count(),
                           linalg::eigendecomposition_count() - evd_start});
}

void TimingProbe::append(const TimingProbe& other) {
  stages_.insert(stages_.end(), other.stages_.begin(), other.stages_.end());
}

const StageTiming* TimingProbe::find(const std::string& stage) const {
  for (const auto& s : stages_)
    if (s.stage == stage) return &s;
  return nullptr;
}

json TimingProbe::to_json() const {
  json stages = json::array();
  for (const auto& s : stages_)
    stages.push_back(
        {{"stage", s.stage}, {"wall_s", s.wall_s}, {"eigendecompositions", s.eigendecompositions}});
  return {{"stages", stages}};
}

namespace {

template <typename F>
decltype(auto) timed(TimingProbe* probe, const std::string& stage, F&& f) {
  if (probe) return probe->measure(stage, std::forward<F>(f));
  return f();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

WaveBuffer stack_mono(const std::vector<WaveBuffer>& waves) {
  if (waves.empty()) return {};
  WaveBuffer out(waves.size(), waves.front().length(), waves.front().sample_rate());
  for (std::size_t j = 0; j < waves.size(); ++j) {
    if (waves[j].length() != out.length() || waves[j].num_channels() != 1)
      throw ValidationError("clean signals must be mono and of equal length");
    std::copy(waves[j].channel(0).begin(), waves[j].channel(0).end(), out.channel(j).begin());
  }
  return out;
}

BinaryActivity select_rows(const BinaryActivity& a, const std::vector<std::size_t>& rows) {
  BinaryActivity out(rows.size(), a.num_frames());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.matrix.row(static_cast<Eigen::Index>(r)) = a.matrix.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

}  // namespace

WaveBuffer reference_first(const WaveBuffer& wave, std::size_t reference) {
  if (reference >= wave.num_channels())
    throw ValidationError("reference channel " + std::to_string(reference) + " out of range");
  if (reference == 0) return wave;
  WaveBuffer out(wave.num_channels(), wave.length(), wave.sample_rate());
  std::size_t dst = 1;
  for (std::size_t c = 0; c < wave.num_channels(); ++c) {
    auto src = wave.channel(c);
    std::copy(src.begin(), src.end(), out.channel(c == reference ? 0 : dst++).begin());
  }
  return out;
}

void quantize_float32(WaveBuffer& wave) {
  for (std::size_t c = 0; c < wave.num_channels(); ++c)
    for (double& x : wave.channel(c)) x = static_cast<double>(static_cast<float>(x));
}

ClipData simulate_clip(const SceneConfig& scene, TimingProbe* probe) {
  return timed(probe, "simulate", [&] {
    RenderedScene r = render_scene(scene);
    ClipData d;
    d.mixture = reference_first(r.mixture, scene.array.reference_index);
    quantize_float32(d.mixture);
    d.clean = r.truth.images;
    quantize_float32(*d.clean);
    d.reference = r.truth.activity;
    d.scene = scene;
    d.provenance = r.provenance;
    return d;
  });
}

ClipData load_clip(const InputFiles& files) {
  ClipData d;
  d.mixture = reference_first(read_wav(files.mixture), files.reference_channel);
  quantize_float32(d.mixture);
  if (!files.clean.empty()) {
    std::vector<WaveBuffer> clean;
    for (const auto& p : files.clean) clean.push_back(read_wav(p));
    d.clean = stack_mono(clean);
    quantize_float32(*d.clean);
  }
  if (files.reference_activity) d.reference = read_binary_activity_csv(*files.reference_activity);
  return d;
}

ClipData prepare_clip(const PipelineConfig& cfg, TimingProbe* probe) {
  if (const auto* f = std::get_if<InputFiles>(&cfg.scene)) return load_clip(*f);
  return simulate_clip(*cfg.resolved_scene(), probe);
}

FeatureStage featurize(const WaveBuffer& mixture, const FeatureConfig& cfg) {
  if (mixture.num_channels() < 2)
    throw ValidationError("featurize: need at least two microphone channels");
  StftParams params;
  params.sample_rate = mixture.sample_rate();
  FeatureStage f{stft(mixture, params), {}, {}};
  f.field = WrtfField::compute(f.spec, cfg.d_half);
  CoherenceOptions opts;
  opts.d_half = cfg.d_half;
  opts.band_lo_hz = cfg.band_lo_hz;
  opts.band_hi_hz = cfg.band_hi_hz;
  opts.silent_threshold_db = cfg.silent_threshold_db;
  f.coherence = coherence_matrix(f.spec, f.field, opts);
  return f;
}

DiarizationOutput diarize(const FeatureStage& features, const DiarizationConfig& cfg,
                          const BinaryActivity* oracle, TimingProbe* probe) {
  DiarizationOutput out;
  const std::size_t L = features.field.num_frames();
  SciOptions sci;
  sci.rectify = cfg.method != DiarizationMethod::kSci;
  sci.band_lo_hz = features.coherence.band_lo_hz;
  sci.band_hi_hz = features.coherence.band_hi_hz;
  sci.local_lo_hz = cfg.local_lo_hz;
  sci.local_hi_hz = cfg.local_hi_hz;
  sci.threshold = cfg.threshold;
  sci.max_condition = cfg.max_condition;

  if (cfg.method == DiarizationMethod::kOracleSciLt) {
    if (!oracle) throw ValidationError("oracle-seeded-sci-lt needs a reference activity");
    if (oracle->num_frames() != L)
      throw ValidationError("reference activity has " + std::to_string(oracle->num_frames()) +
                            " frames, mixture has " + std::to_string(L));
    for (std::size_t j = 0; j < oracle->num_speakers(); ++j)
      if (oracle->matrix.row(static_cast<Eigen::Index>(j)).any()) out.kept_seed_rows.push_back(j);
      else log_warning("reference speaker " + std::to_string(j) + " is never active; dropped");
    out.seed = select_rows(*oracle, out.kept_seed_rows);
    out.num_speakers_est = out.kept_seed_rows.size();
  } else {
    out.num_speakers_est = timed(probe, "count", [&]() -> std::size_t {
      if (cfg.counting == CountingMode::kFixed) return *cfg.num_speakers;
      return count_speakers_eigengap(features.coherence, cfg.eigengap);
    });
  }

  if (out.num_speakers_est == 0) {
    out.seed = BinaryActivity(0, L);
    out.binary = BinaryActivity(0, L);
    out.global.unrectified = Eigen::MatrixXd(0, static_cast<Eigen::Index>(L));
    out.global.rectified = out.global.unrectified;
    return out;
  }

  if (cfg.method == DiarizationMethod::kEvd) {
    auto d = timed(probe, "activity", [&] {
      return evd_simplex_diarize(features.coherence, out.num_speakers_est, cfg.threshold);
    });
    out.seed = d.binary;
    out.binary = std::move(d.binary);
    out.global = std::move(d.global);
    return out;
  }
  if (cfg.method != DiarizationMethod::kOracleSciLt) {
    out.seed = timed(probe, "seed", [&] {
      return evd_simplex_diarize(features.coherence, out.num_speakers_est, cfg.threshold).binary;
    });
  }
  auto r = timed(probe, "activity", [&] { return sci_lt_pipeline(features.field, out.seed, sci); });
  out.binary = std::move(r.binary);
  out.global = std::move(r.global);
  return out;
}

SeparationOutput separate(const FeatureStage& features, const BinaryActivity& template_activity,
                          const BinaryActivity& binary, const DiarizationConfig& dcfg,
                          const SeparationConfig& scfg) {
  if (template_activity.num_speakers() != binary.num_speakers())
    throw ValidationError("separate: template and binary activity speaker counts differ");
  SeparationOutput out;
  if (binary.num_speakers() == 0) return out;
  const StftParams& params = features.field.params();
  const auto bins =
      band_bins(params, dcfg.local_lo_hz, dcfg.local_hi_hz.value_or(params.sample_rate / 2.0));
  const auto templates = seed_templates(features.field, template_activity);
  const LocalActivity local =
      local_activity(features.field, templates, bins.front(), bins.back());
  out.masks = build_masks(local, binary, scfg.mode, scfg.beta);
  out.speakers = extract_speakers(features.spec, out.masks, 0);
  for (auto& w : out.speakers) quantize_float32(w);
  return out;
}

namespace {

// Injective reference -> output assignment with the largest summed SI-SDR.
std::vector<int> best_separation_mapping(const std::vector<std::vector<double>>& score,
                                         std::size_t outputs) {
  const std::size_t J = score.size();
  std::vector<int> cur(J, -1), best(J, -1);
  std::vector<bool> used(outputs, false);
  double best_total = -std::numeric_limits<double>::infinity();
  const std::size_t need = std::min(J, outputs);
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t j,
                                                                   std::size_t matched,
                                                                   double total) {
    if (j == J) {
      if (matched == need && total > best_total) {
        best_total = total;
        best = cur;
      }
      return;
    }
    if (need - matched < J - j) {
      cur[j] = -1;
      rec(j + 1, matched, total - kSiSdrCapDb);
    }
    for (std::size_t i = 0; i < outputs; ++i) {
      if (used[i]) continue;
      used[i] = true;
      cur[j] = static_cast<int>(i);
      rec(j + 1, matched + 1, total + score[j][i]);
      used[i] = false;
    }
    cur[j] = -1;
  };
  rec(0, 0, 0.0);
  return best;
}

}  // namespace

MetricsReport evaluate(const std::string& clip_id, const BinaryActivity& estimate,
                       const BinaryActivity* reference,
                       const std::vector<WaveBuffer>* separated, const WaveBuffer* clean,
                       const WaveBuffer& mixture, std::size_t collar) {
  MetricsReport r;
  r.clip_id = clip_id;
  r.num_speakers_est = estimate.num_speakers();
  if (reference) {
    r.num_speakers_ref = 0;
    for (std::size_t j = 0; j < reference->num_speakers(); ++j)
      if (reference->matrix.row(static_cast<Eigen::Index>(j)).any()) ++r.num_speakers_ref;
    BinaryActivity est = estimate;
    if (est.num_speakers() == 0) est = BinaryActivity(0, reference->num_frames());
    r.diarization = der(est, *reference, collar);
    r.counting_f1 = counting_f1({r.num_speakers_est}, {r.num_speakers_ref});
  } else if (clean) {
    r.num_speakers_ref = clean->num_channels();
  }
  if (separated && clean && mixture.num_channels() > 0) {
    const std::size_t J = clean->num_channels();
    const WaveBuffer mix_ref = mixture.extract_channel(0);
    std::vector<std::vector<double>> score(J, std::vector<double>(separated->size()));
    std::vector<double> mix_score(J);
    for (std::size_t j = 0; j < J; ++j) {
      const WaveBuffer ref = clean->extract_channel(j);
      if (!(energy(ref.channel(0)) > 0.0)) {
        std::fill(score[j].begin(), score[j].end(), -kSiSdrCapDb);
        mix_score[j] = -kSiSdrCapDb;
        continue;
      }
      mix_score[j] = si_sdr(ref, mix_ref);
      for (std::size_t i = 0; i < separated->size(); ++i)
        score[j][i] = si_sdr(ref, (*separated)[i]);
    }
    r.separation_mapping = best_separation_mapping(score, separated->size());
    for (std::size_t j = 0; j < J; ++j) {
      const int i = r.separation_mapping[j];
      r.si_sdr_db.push_back(i >= 0 ? score[j][static_cast<std::size_t>(i)] : -kSiSdrCapDb);
      r.si_sdr_mixture_db.push_back(mix_score[j]);
    }
  }
  return r;
}

ClipResult process_clip(const PipelineConfig& cfg) {
  cfg.validate();
  TimingProbe probe;
  ClipData data = prepare_clip(cfg, &probe);
  ClipResult r = process_clip(cfg, std::move(data));
  probe.append(r.timing);
  r.timing = std::move(probe);
  return r;
}

ClipResult process_clip(const PipelineConfig& cfg, ClipData data) {
  ClipResult r;
  r.data = std::move(data);
  r.features = r.timing.measure("featurize",
                                [&] { return featurize(r.data.mixture, cfg.features); });
  const BinaryActivity* oracle = r.data.reference ? &*r.data.reference : nullptr;
  r.diarization = diarize(r.features, cfg.diarization, oracle, &r.timing);
  if (cfg.separation.enabled && r.diarization.num_speakers_est > 0) {
    r.separation = r.timing.measure("separate", [&] {
      return separate(r.features, r.diarization.seed, r.diarization.binary, cfg.diarization,
                      cfg.separation);
    });
  }
  r.metrics = r.timing.measure("evaluate", [&] {
    return evaluate(cfg.clip_id, r.diarization.binary, oracle,
                    r.separation ? &r.separation->speakers : nullptr,
                    r.data.clean ? &*r.data.clean : nullptr, r.data.mixture,
                    cfg.evaluation.collar);
  });
  return r;
}

void write_clip_data(const fs::path& dir, const ClipData& data) {
  fs::create_directories(dir);
  write_wav(dir / artifact::kMixture, data.mixture);
  if (data.clean) {
    fs::create_directories(dir / artifact::kCleanDir);
    for (std::size_t j = 0; j < data.clean->num_channels(); ++j)
      write_wav(dir / artifact::kCleanDir / speaker_file_name(j), data.clean->extract_channel(j));
  }
  if (data.reference) write_activity_csv(dir / artifact::kReferenceActivity, *data.reference);
  if (data.scene) write_json(dir / artifact::kScene, to_json(*data.scene));
  if (data.provenance) write_json(dir / artifact::kProvenance, to_json(*data.provenance));
}

void write_features(const fs::path& dir, const FeatureStage& f, const FeatureConfig& cfg) {
  fs::create_directories(dir);
  write_coherence_binary(dir / artifact::kCoherence, f.coherence);
  std::vector<bool> silent = f.coherence.silent;
  silent.resize(f.coherence.num_frames(), false);
  write_frame_flags_csv(dir / artifact::kSilentFrames, silent);
  const StftParams& p = f.field.params();
  json j = to_json(cfg);
  j["num_frames"] = f.field.num_frames();
  j["num_bins"] = f.field.num_bins();
  j["num_channels"] = f.spec.num_channels();
  j["stft"] = {{"frame_len", p.frame_len},
               {"hop", p.hop},
               {"fft_size", p.fft_size},
               {"sample_rate", p.sample_rate},
               {"window", "sqrt-hann"}};
  write_json(dir / artifact::kFeatures, j);
}

CoherenceMatrix read_features(const fs::path& dir, const WaveBuffer& mixture,
                              const FeatureConfig& cfg, FeatureStage* out) {
  CoherenceMatrix w = read_coherence_binary(dir / artifact::kCoherence);
  w.silent = read_frame_flags_csv(dir / artifact::kSilentFrames);
  if (w.silent.size() != w.num_frames())
    throw ValidationError("silent frame flags do not match the coherence matrix");
  w.band_lo_hz = cfg.band_lo_hz;
  w.band_hi_hz = cfg.band_hi_hz;
  w.d_half = cfg.d_half;
  if (out) {
    StftParams params;
    params.sample_rate = mixture.sample_rate();
    out->spec = stft(mixture, params);
    out->field = WrtfField::compute(out->spec, cfg.d_half);
    if (out->field.num_frames() != w.num_frames())
      throw ValidationError("coherence matrix has " + std::to_string(w.num_frames()) +
                            " frames, mixture has " + std::to_string(out->field.num_frames()));
    w.framing = params;
    out->coherence = w;
  }
  return w;
}

void write_diarization(const fs::path& dir, const DiarizationOutput& d,
                       const DiarizationConfig& cfg, const StftParams& framing,
                       const std::string& clip_id) {
  fs::create_directories(dir);
  write_activity_csv(dir / artifact::kSeedActivity, d.seed);
  write_activity_csv(dir / artifact::kBinaryActivity, d.binary);
  write_activity_csv(dir / artifact::kGlobalActivity, d.global.rectified);
  write_activity_csv(dir / artifact::kUnrectifiedActivity, d.global.unrectified);
  write_rttm(dir / artifact::kRttm, d.binary, framing, clip_id);
  if (d.num_speakers_est > 0) export_scatter(d.global, dir / artifact::kScatter);
  json j = to_json(cfg);
  j["num_speakers_est"] = d.num_speakers_est;
  j["vertex_frames"] = d.global.vertex_frames;
  j["condition_number"] = d.num_speakers_est > 0 ? json(d.global.condition_number) : json(nullptr);
  if (cfg.method == DiarizationMethod::kOracleSciLt) j["kept_seed_rows"] = d.kept_seed_rows;
  write_json(dir / artifact::kDiarization, j);
}

void write_separation(const fs::path& dir, const SeparationOutput& s, const SeparationConfig& cfg) {
  fs::create_directories(dir / artifact::kSeparatedDir);
  for (std::size_t j = 0; j < s.speakers.size(); ++j)
    write_wav(dir / artifact::kSeparatedDir / speaker_file_name(j), s.speakers[j]);
  if (cfg.dump_masks) write_mask_dump(dir / artifact::kMasks, s.masks);
}

void write_metrics(const fs::path& dir, const MetricsReport& m) {
  fs::create_directories(dir);
  write_json(dir / artifact::kMetrics, to_json(m));
}

std::vector<WaveBuffer> read_speaker_wavs(const fs::path& dir) {
  std::vector<WaveBuffer> out;
  for (std::size_t j = 0;; ++j) {
    const fs::path p = dir / speaker_file_name(j);
    if (!fs::exists(p)) break;
    out.push_back(read_wav(p));
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

json hash_tree(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == artifact::kManifest || rel == artifact::kTiming) continue;
    names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  json out = json::object();
  for (const auto& n : names) out[n] = sha256_file(dir / n);
  return out;
}

fs::path resolve_output_dir(const fs::path& requested, const std::string& fallback_name) {
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = env && *env ? fs::path(env) : fs::path();
  if (requested.empty()) return (root.empty() ? fs::path(".") : root) / fallback_name;
  if (requested.is_relative() && !root.empty()) return root / requested;
  return requested;
}

void write_atomically(const fs::path& dir, const std::function<void(const fs::path&)>& body) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  fs::path name = target.filename();
  if (name.empty()) name = target.parent_path().filename();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = parent / ("." + name.string() + ".tmp-" + std::to_string(::getpid()) +
                                 "-" + std::to_string(counter++));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    body(tmp);
    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

RunSummary run_pipeline(const PipelineConfig& cfg, const fs::path& output_dir) {
  cfg.validate();
  RunSummary summary;
  summary.directory = output_dir;
  write_atomically(output_dir, [&](const fs::path& tmp) {
    ClipResult r = process_clip(cfg);
    json config = to_json(cfg);
    if (auto scene = cfg.resolved_scene()) config["resolved_scene"] = to_json(*scene);
    write_json(tmp / artifact::kConfig, config);
    write_clip_data(tmp, r.data);
    write_features(tmp, r.features, cfg.features);
    write_diarization(tmp, r.diarization, cfg.diarization, r.features.field.params(), cfg.clip_id);
    if (r.separation) write_separation(tmp, *r.separation, cfg.separation);
    write_metrics(tmp, r.metrics);
    json manifest = {{"clip_id", cfg.clip_id},
                     {"seed", cfg.seed},
                     {"config", config},
                     {"artifacts", hash_tree(tmp)}};
    if (r.data.provenance) manifest["provenance"] = to_json(*r.data.provenance);
    write_json(tmp / artifact::kManifest, manifest);
    write_json(tmp / artifact::kTiming, r.timing.to_json());
    summary.metrics = r.metrics;
    summary.timing = r.timing.stages();
  });
  return summary;
}

BatchConfig batch_config_from_json(const json& j, const fs::path& base_dir) {
  using json_fields::field_or;
  if (!j.is_object()) throw ValidationError("<root>: expected an object");
  BatchConfig b;
  json base = j.contains("pipeline") ? j.at("pipeline") : json::object();
  if (!base.is_object()) throw ValidationError("pipeline: expected an object");
  const bool has_preset = j.contains("random_scene");
  const bool has_configs = j.contains("configs");
  if (has_preset == has_configs)
    throw ValidationError("exactly one of random_scene or configs is required");
  if (has_preset) {
    b.preset = scene_preset_from_json(j.at("random_scene"), "random_scene");
    base["random_scene"] = j.at("random_scene");
    b.count = field_or<std::size_t>(j, "count", "", 0);
    if (b.count == 0) throw ValidationError("count: must be positive");
  } else {
    for (const auto& p : field_or<std::vector<std::string>>(j, "configs", "", {})) {
      fs::path path(p);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      b.configs.push_back(path);
    }
    if (b.configs.empty()) throw ValidationError("configs: must not be empty");
    base["random_scene"] = json::object();
  }
  b.first_seed = field_or<std::uint64_t>(j, "first_seed", "", 0);
  b.workers = field_or<std::size_t>(j, "workers", "", 1);
  if (b.workers == 0) throw ValidationError("workers: must be positive");
  b.base = pipeline_config_from_json(base, base_dir);
  return b;
}

BatchSummary run_batch(const BatchConfig& cfg, const fs::path& output_dir) {
  std::vector<PipelineConfig> clips;
  if (cfg.preset) {
    for (std::size_t i = 0; i < cfg.count; ++i) {
      PipelineConfig c = cfg.base;
      c.scene = PresetScene{*cfg.preset};
      c.seed = cfg.first_seed + i;
      std::ostringstream id;
      id << "clip_" << std::setw(4) << std::setfill('0') << i;
      c.clip_id = id.str();
      clips.push_back(std::move(c));
    }
  } else {
    for (const auto& p : cfg.configs) {
      PipelineConfig c = pipeline_config_from_json(read_json(p), p.parent_path());
      if (c.clip_id == "clip") c.clip_id = p.stem().string();
      clips.push_back(std::move(c));
    }
  }
  for (std::size_t a = 0; a < clips.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (clips[a].clip_id == clips[b].clip_id)
        throw ValidationError("duplicate clip_id '" + clips[a].clip_id + "'");

  fs::create_directories(output_dir);
  std::vector<std::optional<MetricsReport>> reports(clips.size());
  std::vector<json> params(clips.size());
  std::vector<std::string> errors(clips.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < clips.size(); i = next++) {
      try {
        if (auto s = clips[i].resolved_scene())
          params[i] = {{"t60", s->room.t60},
                       {"overlap_ratio", s->target_overlap_ratio},
                       {"snr_db", s->snr_db ? json(*s->snr_db) : json(nullptr)}};
        reports[i] = run_pipeline(clips[i], output_dir / clips[i].clip_id).metrics;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(cfg.workers, clips.size());
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BatchSummary summary;
  std::vector<json> ok_params;
  std::vector<std::size_t> est, ref;
  std::vector<double> ders;
  json failures = json::object();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (!reports[i]) {
      failures[clips[i].clip_id] = errors[i];
      continue;
    }
    summary.reports.push_back(*reports[i]);
    ok_params.push_back(params[i]);
    if (reports[i]->diarization) {
      est.push_back(reports[i]->num_speakers_est);
      ref.push_back(reports[i]->num_speakers_ref);
      ders.push_back(reports[i]->diarization->der());
    }
  }
  write_batch_csv(output_dir / "batch.csv", summary.reports, ok_params);
  std::sort(summary.reports.begin(), summary.reports.end(),
            [](const MetricsReport& a, const MetricsReport& b) { return a.clip_id < b.clip_id; });
  if (!ref.empty()) summary.counting_f1 = counting_f1(est, ref);
  if (!ders.empty()) {
    std::sort(ders.begin(), ders.end());
    const std::size_t m = ders.size();
    summary.median_der = m % 2 ? ders[m / 2] : 0.5 * (ders[m / 2 - 1] + ders[m / 2]);
  }
  write_json(output_dir / "summary.json",
             {{"num_clips", clips.size()},
              {"num_failed", failures.size()},
              {"failures", failures},
              {"counting_f1", summary.counting_f1 ? json(*summary.counting_f1) : json(nullptr)},
              {"median_der", summary.median_der ? json(*summary.median_der) : json(nullptr)}});
  if (!failures.empty())
    throw std::runtime_error(std::to_string(failures.size()) + " of " +
                             std::to_string(clips.size()) + " clips failed; see summary.json");
  return summary;
}

}  // namespace spatialdiar
