#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spatialdiar/activity.hpp"
#include "spatialdiar/features.hpp"
#include "spatialdiar/metrics.hpp"
#include "spatialdiar/pipeline_config.hpp"
#include "spatialdiar/scene.hpp"
#include "spatialdiar/separation.hpp"
#include "spatialdiar/stft.hpp"
#include "spatialdiar/wave.hpp"

namespace spatialdiar {

inline constexpr const char* kOutputRootEnv = "SPATIALDIAR_OUTPUT_ROOT";

// Artifact names inside a run directory.
namespace artifact {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kScene = "scene.json";
inline constexpr const char* kProvenance = "provenance.json";
inline constexpr const char* kMixture = "mixture.wav";
inline constexpr const char* kCleanDir = "clean";
inline constexpr const char* kReferenceActivity = "reference_activity.csv";
inline constexpr const char* kCoherence = "coherence.bin";
inline constexpr const char* kSilentFrames = "silent_frames.csv";
inline constexpr const char* kFeatures = "features.json";
inline constexpr const char* kSeedActivity = "seed_activity.csv";
inline constexpr const char* kBinaryActivity = "activity_binary.csv";
inline constexpr const char* kGlobalActivity = "activity_global.csv";
inline constexpr const char* kUnrectifiedActivity = "activity_unrectified.csv";
inline constexpr const char* kDiarization = "diarization.json";
inline constexpr const char* kRttm = "diarization.rttm";
inline constexpr const char* kScatter = "scatter.csv";
inline constexpr const char* kSeparatedDir = "separated";
inline constexpr const char* kMasks = "masks.bin";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kTiming = "timing.json";
}  // namespace artifact

std::string speaker_file_name(std::size_t j);  // "spk<j>.wav"

struct StageTiming {
  std::string stage;
  double wall_s = 0.0;
  std::uint64_t eigendecompositions = 0;
};

// Wall time and EVD count per stage on the calling thread.
class TimingProbe {
 public:
  template <typename F>
  decltype(auto) measure(const std::string& stage, F&& f) {
    Scope s(*this, stage);
    return f();
  }
  const std::vector<StageTiming>& stages() const { return stages_; }
  void append(const TimingProbe& other);
  const StageTiming* find(const std::string& stage) const;
  nlohmann::json to_json() const;

 private:
  struct Scope {
    Scope(TimingProbe& p, std::string stage);
    ~Scope();
    TimingProbe& probe;
    std::string stage;
    std::chrono::steady_clock::time_point start;
    std::uint64_t evd_start;
  };
  std::vector<StageTiming> stages_;
};

// Moves `reference` to channel 0, other channels keep their order.
WaveBuffer reference_first(const WaveBuffer& wave, std::size_t reference);
// Rounds every sample through float32, matching what a float WAV stores.
void quantize_float32(WaveBuffer& wave);

struct ClipData {
  WaveBuffer mixture;               // reference mic on channel 0, float32-exact
  std::optional<WaveBuffer> clean;  // J x N reference images, float32-exact
  std::optional<BinaryActivity> reference;
  std::optional<SceneConfig> scene;
  std::optional<SceneProvenance> provenance;
};

ClipData simulate_clip(const SceneConfig& scene, TimingProbe* probe = nullptr);
ClipData load_clip(const InputFiles& files);
ClipData prepare_clip(const PipelineConfig& cfg, TimingProbe* probe = nullptr);

struct FeatureStage {
  StftTensor spec;
  WrtfField field;
  CoherenceMatrix coherence;
};

FeatureStage featurize(const WaveBuffer& mixture, const FeatureConfig& cfg);

struct DiarizationOutput {
  std::size_t num_speakers_est = 0;
  BinaryActivity seed;    // activity the templates were built from
  BinaryActivity binary;  // final estimate
  GlobalActivity global;
  std::vector<std::size_t> kept_seed_rows;  // oracle mode: non-empty reference rows
};

// `oracle` is required for oracle-seeded-sci-lt and ignored otherwise.
DiarizationOutput diarize(const FeatureStage& features, const DiarizationConfig& cfg,
                          const BinaryActivity* oracle = nullptr, TimingProbe* probe = nullptr);

struct SeparationOutput {
  MaskSet masks;
  std::vector<WaveBuffer> speakers;  // float32-exact
};

// Templates from `template_activity`, local activity over the configured
// range, masks gated by `binary`.
SeparationOutput separate(const FeatureStage& features, const BinaryActivity& template_activity,
                          const BinaryActivity& binary, const DiarizationConfig& dcfg,
                          const SeparationConfig& scfg);

MetricsReport evaluate(const std::string& clip_id, const BinaryActivity& estimate,
                       const BinaryActivity* reference,
                       const std::vector<WaveBuffer>* separated, const WaveBuffer* clean,
                       const WaveBuffer& mixture, std::size_t collar = 0);

struct ClipResult {
  ClipData data;
  FeatureStage features;
  DiarizationOutput diarization;
  std::optional<SeparationOutput> separation;
  MetricsReport metrics;
  TimingProbe timing;
};

// Everything in memory, nothing written.
ClipResult process_clip(const PipelineConfig& cfg);
ClipResult process_clip(const PipelineConfig& cfg, ClipData data);

// Stage writers shared by the pipeline and the standalone subcommands.
void write_clip_data(const std::filesystem::path& dir, const ClipData& data);
void write_features(const std::filesystem::path& dir, const FeatureStage& f,
                    const FeatureConfig& cfg);
void write_diarization(const std::filesystem::path& dir, const DiarizationOutput& d,
                       const DiarizationConfig& cfg, const StftParams& framing,
                       const std::string& clip_id);
void write_separation(const std::filesystem::path& dir, const SeparationOutput& s,
                      const SeparationConfig& cfg);
void write_metrics(const std::filesystem::path& dir, const MetricsReport& m);

// Reads back what the writers above produce.
CoherenceMatrix read_features(const std::filesystem::path& dir, const WaveBuffer& mixture,
                              const FeatureConfig& cfg, FeatureStage* out);
std::vector<WaveBuffer> read_speaker_wavs(const std::filesystem::path& dir);

std::string sha256_file(const std::filesystem::path& path);
// Every file under `dir` except the manifest and timing, keyed by relative
// path with forward slashes.
nlohmann::json hash_tree(const std::filesystem::path& dir);

// Output directory from the config and the environment: relative paths go
// under $SPATIALDIAR_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_dir(const std::filesystem::path& requested,
                                         const std::string& fallback_name);

// Builds the run in a sibling temporary directory and renames it into place;
// nothing is left behind on failure.
struct RunSummary {
  std::filesystem::path directory;
  MetricsReport metrics;
  std::vector<StageTiming> timing;
};
RunSummary run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& output_dir);

// Runs `body(tmp_dir)` then atomically renames the directory to `dir`.
void write_atomically(const std::filesystem::path& dir,
                      const std::function<void(const std::filesystem::path&)>& body);

struct BatchConfig {
  PipelineConfig base;  // scene is replaced per clip for preset batches
  std::optional<ScenePreset> preset;
  std::vector<std::filesystem::path> configs;  // explicit per-clip configs
  std::size_t count = 0;
  std::uint64_t first_seed = 0;
  std::size_t workers = 1;
};

BatchConfig batch_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct BatchSummary {
  std::vector<MetricsReport> reports;  // sorted by clip id
  std::optional<double> counting_f1;
  std::optional<double> median_der;
};

BatchSummary run_batch(const BatchConfig& cfg, const std::filesystem::path& output_dir);

}  // namespace spatialdiar
