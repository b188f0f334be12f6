#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "spatialdiar/activity.hpp"
#include "spatialdiar/scene.hpp"
#include "spatialdiar/separation.hpp"

namespace spatialdiar {

enum class DiarizationMethod { kEvd, kSci, kSciLt, kOracleSciLt };
enum class CountingMode { kEigengap, kFixed };

DiarizationMethod parse_method(const std::string& s);
std::string to_string(DiarizationMethod m);
CountingMode parse_counting(const std::string& s);
std::string to_string(CountingMode c);

struct FeatureConfig {
  std::size_t d_half = 2;
  double band_lo_hz = 1000.0;
  double band_hi_hz = 3000.0;
  double silent_threshold_db = -60.0;
};

struct DiarizationConfig {
  DiarizationMethod method = DiarizationMethod::kSciLt;
  CountingMode counting = CountingMode::kEigengap;
  std::optional<std::size_t> num_speakers;  // required with fixed counting
  EigengapOptions eigengap;
  double threshold = kDefaultActivityThreshold;
  double local_lo_hz = 0.0;
  std::optional<double> local_hi_hz;
  double max_condition = kMaxVertexCondition;
};

struct SeparationConfig {
  bool enabled = true;
  MaskMode mode = MaskMode::kHard;
  double beta = kDefaultSoftBeta;
  bool dump_masks = false;
};

struct EvaluationConfig {
  std::size_t collar = 0;  // frames
};

// Pre-rendered input. Clean images and reference activity are optional and
// only feed evaluation and oracle seeding.
struct InputFiles {
  std::filesystem::path mixture;
  std::vector<std::filesystem::path> clean;
  std::optional<std::filesystem::path> reference_activity;
  std::size_t reference_channel = 0;
};

struct PresetScene {
  ScenePreset preset;
};

using SceneSource = std::variant<SceneConfig, PresetScene, InputFiles>;

struct PipelineConfig {
  SceneSource scene = PresetScene{};
  FeatureConfig features;
  DiarizationConfig diarization;
  SeparationConfig separation;
  EvaluationConfig evaluation;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::string clip_id = "clip";

  // Field-path ValidationError on any inconsistency.
  void validate() const;
  // The concrete scene for SceneConfig or PresetScene sources.
  std::optional<SceneConfig> resolved_scene() const;
};

// Schema:
//   {
//     "scene": {...SceneConfig...}            | "random_scene": {...ScenePreset...}
//                                             | "input": {"mixture": "mix.wav",
//                                                         "clean": ["s0.wav", ...],
//                                                         "reference_activity": "ref.csv",
//                                                         "reference_channel": 0},
//     "features": {"d_half": 2, "band_lo_hz": 1000, "band_hi_hz": 3000,
//                  "silent_threshold_db": -60},
//     "diarization": {"method": "sci-lt", "counting": "eigengap", "num_speakers": 2,
//                     "tau": 0.15, "floor_ratio": 0.05, "j_max": 4, "threshold": 0.2,
//                     "local_lo_hz": 0, "local_hi_hz": 8000, "max_condition": 1e8},
//     "separation": {"enabled": true, "mode": "hard", "beta": 10, "dump_masks": false},
//     "evaluation": {"collar": 0},
//     "output_dir": "out", "seed": 0, "clip_id": "clip"
//   }
// Relative paths resolve against `base_dir`; a relative output_dir is left
// relative for the caller to resolve.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& cfg);

nlohmann::json to_json(const FeatureConfig& c);
nlohmann::json to_json(const DiarizationConfig& c);
nlohmann::json to_json(const SeparationConfig& c);

FeatureConfig feature_config_from_json(const nlohmann::json& j, const std::string& prefix);
DiarizationConfig diarization_config_from_json(const nlohmann::json& j,
                                               const std::string& prefix);
SeparationConfig separation_config_from_json(const nlohmann::json& j, const std::string& prefix);

}  // namespace spatialdiar
