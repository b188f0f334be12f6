#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "spatialdiar/scene.hpp"

namespace spatialdiar {

// JSON schema (all lengths in meters, times in seconds):
//   {
//     "room": {"dims": [L, W, H], "t60": 0.3, "speed_of_sound": 343},
//     "array": {"mic_positions": [[x, y, z], ...], "reference_index": 0},
//     "sources": [{"position": [x, y, z], "dry_path": "a.wav",
//                  "schedule": [[start, end], ...], "level_offset_db": 0}],
//     "clip_len": 12, "target_overlap_ratio": 0.2, "snr_db": 20,
//     "gain_mismatch_sigma": 0, "seed": 1, "sample_rate": 16000
//   }
// "snr_db": null disables sensor noise. Relative dry paths resolve against
// `base_dir`.
SceneConfig scene_config_from_json(const nlohmann::json& j,
                                   const std::string& prefix = "",
                                   const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const SceneConfig& cfg);

// {"num_speakers": 2, "t60": 0.3, "overlap_ratio": 0.2, "snr_db": 20,
//  "geometry": "G1", "gain_mismatch_sigma": 0, "clip_len": 12}
ScenePreset scene_preset_from_json(const nlohmann::json& j,
                                   const std::string& prefix = "");
nlohmann::json to_json(const ScenePreset& preset);

nlohmann::json to_json(const SceneProvenance& prov);

ArrayPreset parse_array_preset(const std::string& name, const std::string& field);
std::string to_string(ArrayPreset preset);

}  // namespace spatialdiar
