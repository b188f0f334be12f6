#include "spatialdiar/scene_config.hpp"

#include <cmath>

#include "spatialdiar/json_fields.hpp"

namespace spatialdiar {

using json_fields::field_or;
using json_fields::join;
using json_fields::optional_field;
using json_fields::required_field;
using nlohmann::json;

namespace {

Vec3 parse_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3)
    throw ValidationError(path + ": expected [x, y, z]");
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ValidationError(path + ": expected numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace

ArrayPreset parse_array_preset(const std::string& name, const std::string& field) {
  if (name == "G1") return ArrayPreset::kG1;
  if (name == "G2") return ArrayPreset::kG2;
  if (name == "G3") return ArrayPreset::kG3;
  throw ValidationError(field + ": unknown array geometry '" + name + "'");
}

std::string to_string(ArrayPreset preset) {
  switch (preset) {
    case ArrayPreset::kG1: return "G1";
    case ArrayPreset::kG2: return "G2";
    case ArrayPreset::kG3: return "G3";
  }
  return "?";
}

SceneConfig scene_config_from_json(const json& j, const std::string& prefix,
                                   const std::filesystem::path& base_dir) {
  SceneConfig cfg;
  const std::string room_path = join(prefix, "room");
  const json room = required_field<json>(j, "room", prefix);
  cfg.room.dims = parse_vec3(required_field<json>(room, "dims", room_path),
                             join(room_path, "dims"));
  cfg.room.t60 = required_field<double>(room, "t60", room_path);
  cfg.room.speed_of_sound = field_or<double>(room, "speed_of_sound", room_path, 343.0);

  const std::string array_path = join(prefix, "array");
  const json array = required_field<json>(j, "array", prefix);
  const json mics = required_field<json>(array, "mic_positions", array_path);
  if (!mics.is_array())
    throw ValidationError(join(array_path, "mic_positions") + ": expected an array");
  for (std::size_t m = 0; m < mics.size(); ++m)
    cfg.array.mic_positions.push_back(parse_vec3(
        mics[m], join(array_path, "mic_positions[" + std::to_string(m) + "]")));
  cfg.array.reference_index =
      field_or<std::size_t>(array, "reference_index", array_path, 0);

  const json sources = required_field<json>(j, "sources", prefix);
  if (!sources.is_array())
    throw ValidationError(join(prefix, "sources") + ": expected an array");
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const std::string sp = join(prefix, "sources[" + std::to_string(s) + "]");
    SourceSpec src;
    src.position = parse_vec3(required_field<json>(sources[s], "position", sp),
                              join(sp, "position"));
    if (auto p = optional_field<std::string>(sources[s], "dry_path", sp)) {
      std::filesystem::path path(*p);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      src.dry_path = path.string();
    }
    if (auto sched = optional_field<json>(sources[s], "schedule", sp)) {
      if (!sched->is_array())
        throw ValidationError(join(sp, "schedule") + ": expected [[start, end], ...]");
      for (const auto& seg : *sched) {
        if (!seg.is_array() || seg.size() != 2 || !seg[0].is_number() ||
            !seg[1].is_number())
          throw ValidationError(join(sp, "schedule") + ": expected [start, end] pairs");
        src.schedule.push_back({seg[0].get<double>(), seg[1].get<double>()});
      }
    }
    src.level_offset_db = field_or<double>(sources[s], "level_offset_db", sp, 0.0);
    cfg.sources.push_back(std::move(src));
  }

  cfg.clip_len = field_or<double>(j, "clip_len", prefix, 12.0);
  cfg.target_overlap_ratio = field_or<double>(j, "target_overlap_ratio", prefix, 0.0);
  if (j.contains("snr_db") && j.at("snr_db").is_null())
    cfg.snr_db.reset();
  else
    cfg.snr_db = field_or<double>(j, "snr_db", prefix, 20.0);
  cfg.gain_mismatch_sigma = field_or<double>(j, "gain_mismatch_sigma", prefix, 0.0);
  cfg.seed = field_or<std::uint64_t>(j, "seed", prefix, 0);
  cfg.sample_rate = field_or<double>(j, "sample_rate", prefix, 16000.0);

  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(prefix.empty() ? e.what() : prefix + "." + e.what());
  }
  return cfg;
}

json to_json(const SceneConfig& cfg) {
  json mics = json::array();
  for (const auto& p : cfg.array.mic_positions) mics.push_back(vec3_json(p));
  json sources = json::array();
  for (const auto& s : cfg.sources) {
    json src = {{"position", vec3_json(s.position)},
                {"level_offset_db", s.level_offset_db}};
    if (s.dry_path) src["dry_path"] = *s.dry_path;
    if (!s.schedule.empty()) {
      json sched = json::array();
      for (const auto& seg : s.schedule) sched.push_back({seg.start, seg.end});
      src["schedule"] = sched;
    }
    sources.push_back(src);
  }
  return {
      {"room",
       {{"dims", vec3_json(cfg.room.dims)},
        {"t60", cfg.room.t60},
        {"speed_of_sound", cfg.room.speed_of_sound}}},
      {"array", {{"mic_positions", mics}, {"reference_index", cfg.array.reference_index}}},
      {"sources", sources},
      {"clip_len", cfg.clip_len},
      {"target_overlap_ratio", cfg.target_overlap_ratio},
      {"snr_db", cfg.snr_db ? json(*cfg.snr_db) : json(nullptr)},
      {"gain_mismatch_sigma", cfg.gain_mismatch_sigma},
      {"seed", cfg.seed},
      {"sample_rate", cfg.sample_rate},
  };
}

ScenePreset scene_preset_from_json(const json& j, const std::string& prefix) {
  ScenePreset p;
  p.num_speakers = field_or<std::size_t>(j, "num_speakers", prefix, 2);
  if (p.num_speakers < 1 || p.num_speakers > kMaxSpeakers)
    throw ValidationError(join(prefix, "num_speakers") + ": must be in 1..4, got " +
                          std::to_string(p.num_speakers));
  p.t60 = optional_field<double>(j, "t60", prefix);
  p.overlap_ratio = optional_field<double>(j, "overlap_ratio", prefix);
  if (p.overlap_ratio && (*p.overlap_ratio < 0.0 || *p.overlap_ratio > 0.4))
    throw ValidationError(join(prefix, "overlap_ratio") + ": must be in [0, 0.4]");
  if (j.contains("snr_db") && j.at("snr_db").is_null())
    p.snr_db.reset();
  else
    p.snr_db = field_or<double>(j, "snr_db", prefix, 20.0);
  p.geometry = parse_array_preset(field_or<std::string>(j, "geometry", prefix, "G1"),
                                  join(prefix, "geometry"));
  p.gain_mismatch_sigma = field_or<double>(j, "gain_mismatch_sigma", prefix, 0.0);
  if (p.gain_mismatch_sigma < 0.0)
    throw ValidationError(join(prefix, "gain_mismatch_sigma") + ": must be non-negative");
  p.clip_len = field_or<double>(j, "clip_len", prefix, 12.0);
  return p;
}

json to_json(const ScenePreset& p) {
  return {
      {"num_speakers", p.num_speakers},
      {"t60", p.t60 ? json(*p.t60) : json(nullptr)},
      {"overlap_ratio", p.overlap_ratio ? json(*p.overlap_ratio) : json(nullptr)},
      {"snr_db", p.snr_db ? json(*p.snr_db) : json(nullptr)},
      {"geometry", to_string(p.geometry)},
      {"gain_mismatch_sigma", p.gain_mismatch_sigma},
      {"clip_len", p.clip_len},
  };
}

json to_json(const SceneProvenance& prov) {
  return {
      {"seed", prov.seed},
      {"gain_factors", prov.gain_factors},
      {"achieved_overlap_ratio", prov.achieved_overlap_ratio},
      {"achieved_snr_db",
       std::isfinite(prov.achieved_snr_db) ? json(prov.achieved_snr_db) : json(nullptr)},
      {"wall_absorption", prov.wall_absorption},
      {"rir_t60_estimates", prov.rir_t60_estimates},
  };
}

}  // namespace spatialdiar
