#include "spatialdiar/pipeline_config.hpp"

#include "spatialdiar/errors.hpp"
#include "spatialdiar/json_fields.hpp"
#include "spatialdiar/scene_config.hpp"

namespace spatialdiar {

using json = nlohmann::json;
using json_fields::field_or;
using json_fields::join;
using json_fields::optional_field;
using json_fields::required_field;

DiarizationMethod parse_method(const std::string& s) {
  if (s == "evd") return DiarizationMethod::kEvd;
  if (s == "sci") return DiarizationMethod::kSci;
  if (s == "sci-lt") return DiarizationMethod::kSciLt;
  if (s == "oracle-seeded-sci-lt") return DiarizationMethod::kOracleSciLt;
  throw ValidationError("unknown diarization method '" + s +
                        "' (expected evd, sci, sci-lt or oracle-seeded-sci-lt)");
}

std::string to_string(DiarizationMethod m) {
  switch (m) {
    case DiarizationMethod::kEvd: return "evd";
    case DiarizationMethod::kSci: return "sci";
    case DiarizationMethod::kSciLt: return "sci-lt";
    case DiarizationMethod::kOracleSciLt: return "oracle-seeded-sci-lt";
  }
  return "?";
}

CountingMode parse_counting(const std::string& s) {
  if (s == "eigengap") return CountingMode::kEigengap;
  if (s == "fixed" || s == "fixed-J") return CountingMode::kFixed;
  throw ValidationError("unknown counting mode '" + s + "' (expected eigengap or fixed)");
}

std::string to_string(CountingMode c) { return c == CountingMode::kFixed ? "fixed" : "eigengap"; }

namespace {

template <typename F>
auto rethrow_with(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

}  // namespace

FeatureConfig feature_config_from_json(const json& j, const std::string& prefix) {
  FeatureConfig c;
  c.d_half = field_or<std::size_t>(j, "d_half", prefix, c.d_half);
  c.band_lo_hz = field_or<double>(j, "band_lo_hz", prefix, c.band_lo_hz);
  c.band_hi_hz = field_or<double>(j, "band_hi_hz", prefix, c.band_hi_hz);
  c.silent_threshold_db = field_or<double>(j, "silent_threshold_db", prefix, c.silent_threshold_db);
  return c;
}

DiarizationConfig diarization_config_from_json(const json& j, const std::string& prefix) {
  DiarizationConfig c;
  if (auto m = optional_field<std::string>(j, "method", prefix))
    c.method = rethrow_with(join(prefix, "method"), [&] { return parse_method(*m); });
  if (auto m = optional_field<std::string>(j, "counting", prefix))
    c.counting = rethrow_with(join(prefix, "counting"), [&] { return parse_counting(*m); });
  c.num_speakers = optional_field<std::size_t>(j, "num_speakers", prefix);
  c.eigengap.tau = field_or<double>(j, "tau", prefix, c.eigengap.tau);
  c.eigengap.floor_ratio = field_or<double>(j, "floor_ratio", prefix, c.eigengap.floor_ratio);
  c.eigengap.j_max = field_or<std::size_t>(j, "j_max", prefix, c.eigengap.j_max);
  c.threshold = field_or<double>(j, "threshold", prefix, c.threshold);
  c.local_lo_hz = field_or<double>(j, "local_lo_hz", prefix, c.local_lo_hz);
  c.local_hi_hz = optional_field<double>(j, "local_hi_hz", prefix);
  c.max_condition = field_or<double>(j, "max_condition", prefix, c.max_condition);
  return c;
}

SeparationConfig separation_config_from_json(const json& j, const std::string& prefix) {
  SeparationConfig c;
  c.enabled = field_or<bool>(j, "enabled", prefix, c.enabled);
  if (auto m = optional_field<std::string>(j, "mode", prefix))
    c.mode = rethrow_with(join(prefix, "mode"), [&] { return parse_mask_mode(*m); });
  c.beta = field_or<double>(j, "beta", prefix, c.beta);
  c.dump_masks = field_or<bool>(j, "dump_masks", prefix, c.dump_masks);
  return c;
}

PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("<root>: expected an object");
  PipelineConfig cfg;
  cfg.seed = field_or<std::uint64_t>(j, "seed", "", 0);
  cfg.clip_id = field_or<std::string>(j, "clip_id", "", cfg.clip_id);

  const int sources = static_cast<int>(j.contains("scene")) +
                      static_cast<int>(j.contains("random_scene")) +
                      static_cast<int>(j.contains("input"));
  if (sources != 1)
    throw ValidationError("exactly one of scene, random_scene or input is required");
  if (j.contains("scene")) {
    json scene = j.at("scene");
    if (scene.is_object() && !scene.contains("seed")) scene["seed"] = cfg.seed;
    cfg.scene = scene_config_from_json(scene, "scene", base_dir);
  } else if (j.contains("random_scene")) {
    cfg.scene = PresetScene{scene_preset_from_json(j.at("random_scene"), "random_scene")};
  } else {
    const json& in = j.at("input");
    InputFiles f;
    f.mixture = resolve(required_field<std::string>(in, "mixture", "input"), base_dir);
    for (const auto& c : field_or<std::vector<std::string>>(in, "clean", "input", {}))
      f.clean.push_back(resolve(c, base_dir));
    if (auto r = optional_field<std::string>(in, "reference_activity", "input"))
      f.reference_activity = resolve(*r, base_dir);
    f.reference_channel = field_or<std::size_t>(in, "reference_channel", "input", 0);
    cfg.scene = f;
  }

  if (j.contains("features")) cfg.features = feature_config_from_json(j.at("features"), "features");
  if (j.contains("diarization"))
    cfg.diarization = diarization_config_from_json(j.at("diarization"), "diarization");
  if (j.contains("separation"))
    cfg.separation = separation_config_from_json(j.at("separation"), "separation");
  if (j.contains("evaluation"))
    cfg.evaluation.collar = field_or<std::size_t>(j.at("evaluation"), "collar", "evaluation", 0);
  if (auto o = optional_field<std::string>(j, "output_dir", "")) cfg.output_dir = *o;
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  if (clip_id.empty() || clip_id.find_first_of(" \t\n/") != std::string::npos)
    throw ValidationError("clip_id: must be non-empty without whitespace or '/'");
  if (const auto* s = std::get_if<SceneConfig>(&scene)) {
    try {
      s->validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("scene.") + e.what());
    }
  }
  if (const auto* f = std::get_if<InputFiles>(&scene)) {
    if (f->mixture.empty()) throw ValidationError("input.mixture: required field missing");
    if (!std::filesystem::exists(f->mixture))
      throw ValidationError("input.mixture: file not found: " + f->mixture.string());
    for (std::size_t i = 0; i < f->clean.size(); ++i)
      if (!std::filesystem::exists(f->clean[i]))
        throw ValidationError("input.clean[" + std::to_string(i) +
                              "]: file not found: " + f->clean[i].string());
    if (f->reference_activity && !std::filesystem::exists(*f->reference_activity))
      throw ValidationError("input.reference_activity: file not found: " +
                            f->reference_activity->string());
  }
  for (const auto& s : std::get_if<SceneConfig>(&scene)
                           ? std::get<SceneConfig>(scene).sources
                           : std::vector<SourceSpec>{})
    if (s.dry_path && !std::filesystem::exists(*s.dry_path))
      throw ValidationError("scene.sources: dry_path not found: " + *s.dry_path);

  if (features.band_lo_hz < 0.0 || !(features.band_hi_hz > features.band_lo_hz))
    throw ValidationError("features.band_hi_hz: must exceed band_lo_hz >= 0");
  if (features.band_hi_hz > 8000.0)
    throw ValidationError("features.band_hi_hz: must not exceed the Nyquist frequency (8000)");

  const auto& d = diarization;
  if (d.threshold < 0.0 || d.threshold >= 1.0)
    throw ValidationError("diarization.threshold: must be in [0, 1)");
  if (d.eigengap.tau <= 0.0 || d.eigengap.tau >= 1.0)
    throw ValidationError("diarization.tau: must be in (0, 1)");
  if (d.eigengap.j_max < 1 || d.eigengap.j_max > kMaxSpeakers)
    throw ValidationError("diarization.j_max: must be in 1..4");
  if (d.counting == CountingMode::kFixed && d.method != DiarizationMethod::kOracleSciLt) {
    if (!d.num_speakers)
      throw ValidationError("diarization.num_speakers: required with fixed counting");
  }
  if (d.num_speakers && (*d.num_speakers < 1 || *d.num_speakers > kMaxSpeakers))
    throw ValidationError("diarization.num_speakers: must be in 1..4");
  if (d.local_hi_hz && !(*d.local_hi_hz > d.local_lo_hz))
    throw ValidationError("diarization.local_hi_hz: must exceed local_lo_hz");
  if (d.local_lo_hz > features.band_lo_hz || d.local_hi_hz.value_or(8000.0) < features.band_hi_hz)
    throw ValidationError("diarization.local_lo_hz: local range must cover the feature band");
  if (d.method == DiarizationMethod::kOracleSciLt) {
    const auto* f = std::get_if<InputFiles>(&scene);
    if (f && !f->reference_activity)
      throw ValidationError(
          "diarization.method: oracle-seeded-sci-lt needs input.reference_activity");
  }
  if (separation.mode == MaskMode::kSoft && !(separation.beta > 0.0))
    throw ValidationError("separation.beta: must be positive");
}

std::optional<SceneConfig> PipelineConfig::resolved_scene() const {
  if (const auto* s = std::get_if<SceneConfig>(&scene)) return *s;
  if (const auto* p = std::get_if<PresetScene>(&scene)) return random_scene(p->preset, seed);
  return std::nullopt;
}

json to_json(const FeatureConfig& c) {
  return {{"d_half", c.d_half},
          {"band_lo_hz", c.band_lo_hz},
          {"band_hi_hz", c.band_hi_hz},
          {"silent_threshold_db", c.silent_threshold_db}};
}

json to_json(const DiarizationConfig& c) {
  return {{"method", to_string(c.method)},
          {"counting", to_string(c.counting)},
          {"num_speakers", c.num_speakers ? json(*c.num_speakers) : json(nullptr)},
          {"tau", c.eigengap.tau},
          {"floor_ratio", c.eigengap.floor_ratio},
          {"j_max", c.eigengap.j_max},
          {"threshold", c.threshold},
          {"local_lo_hz", c.local_lo_hz},
          {"local_hi_hz", c.local_hi_hz ? json(*c.local_hi_hz) : json(nullptr)},
          {"max_condition", c.max_condition}};
}

json to_json(const SeparationConfig& c) {
  return {{"enabled", c.enabled},
          {"mode", to_string(c.mode)},
          {"beta", c.beta},
          {"dump_masks", c.dump_masks}};
}

json to_json(const PipelineConfig& cfg) {
  json j;
  if (const auto* s = std::get_if<SceneConfig>(&cfg.scene)) {
    j["scene"] = to_json(*s);
  } else if (const auto* p = std::get_if<PresetScene>(&cfg.scene)) {
    j["random_scene"] = to_json(p->preset);
  } else {
    const auto& f = std::get<InputFiles>(cfg.scene);
    json in = {{"mixture", f.mixture.string()}, {"reference_channel", f.reference_channel}};
    json clean = json::array();
    for (const auto& c : f.clean) clean.push_back(c.string());
    in["clean"] = clean;
    if (f.reference_activity) in["reference_activity"] = f.reference_activity->string();
    j["input"] = in;
  }
  j["features"] = to_json(cfg.features);
  j["diarization"] = to_json(cfg.diarization);
  j["separation"] = to_json(cfg.separation);
  j["evaluation"] = {{"collar", cfg.evaluation.collar}};
  j["seed"] = cfg.seed;
  j["clip_id"] = cfg.clip_id;
  return j;
}

}  // namespace spatialdiar
