#include <doctest.h>

#include <fstream>
#include <string>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/pipeline.hpp"
#include "spatialdiar/pipeline_config.hpp"
#include "spatialdiar/scene_config.hpp"
#include "support.hpp"

using namespace spatialdiar;
using nlohmann::json;

namespace {

std::string validation_message(const json& j) {
  try {
    pipeline_config_from_json(j).validate();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

json small_config(std::size_t speakers, double t60, double clip_len) {
  return json{{"random_scene",
               {{"num_speakers", speakers}, {"t60", t60}, {"overlap_ratio", 0.1},
                {"snr_db", 30}, {"clip_len", clip_len}}},
              {"diarization", {{"method", "sci-lt"}, {"counting", "eigengap"}}},
              {"seed", 3},
              {"clip_id", "small"}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  auto cfg = pipeline_config_from_json(small_config(2, 0.3, 6.0));
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.features.d_half == 2);
  CHECK(cfg.features.band_lo_hz == 1000.0);
  CHECK(cfg.diarization.method == DiarizationMethod::kSciLt);
  CHECK(cfg.diarization.eigengap.tau == 0.15);
  CHECK(cfg.separation.mode == MaskMode::kHard);
  CHECK(cfg.seed == 3);
  auto scene = cfg.resolved_scene();
  REQUIRE(scene.has_value());
  CHECK(scene->sources.size() == 2);

  // Round trip through JSON.
  auto again = pipeline_config_from_json(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));

  for (auto m : {DiarizationMethod::kEvd, DiarizationMethod::kSci, DiarizationMethod::kSciLt,
                 DiarizationMethod::kOracleSciLt})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(to_string(DiarizationMethod::kOracleSciLt) == "oracle-seeded-sci-lt");
  CHECK_THROWS_AS(parse_method("lstm"), ValidationError);
}

TEST_CASE("config validation reports field paths") {
  auto j = small_config(2, 0.3, 6.0);
  j["random_scene"]["num_speakers"] = 5;
  auto msg = validation_message(j);
  CHECK(msg.find("random_scene.num_speakers") != std::string::npos);

  j = small_config(2, 0.3, 6.0);
  j["features"] = {{"band_lo_hz", 3000}, {"band_hi_hz", 1000}};
  CHECK(validation_message(j).rfind("features.band_hi_hz", 0) == 0);

  j = small_config(2, 0.3, 6.0);
  j["diarization"]["tau"] = 1.5;
  CHECK(validation_message(j).rfind("diarization.tau", 0) == 0);

  j = small_config(2, 0.3, 6.0);
  j["diarization"]["counting"] = "fixed";
  CHECK(validation_message(j).rfind("diarization.num_speakers", 0) == 0);
  j["diarization"]["num_speakers"] = 5;
  CHECK(validation_message(j).rfind("diarization.num_speakers", 0) == 0);

  j = small_config(2, 0.3, 6.0);
  j["separation"] = {{"mode", "soft"}, {"beta", -1}};
  CHECK(validation_message(j).rfind("separation.beta", 0) == 0);

  j = small_config(2, 0.3, 6.0);
  j["clip_id"] = "a b";
  CHECK(validation_message(j).rfind("clip_id", 0) == 0);

  j = small_config(2, 0.3, 6.0);
  j["input"] = {{"mixture", "/nonexistent/mix.wav"}};
  CHECK_FALSE(validation_message(j).empty());
  j.erase("random_scene");
  CHECK(validation_message(j).rfind("input.mixture", 0) == 0);

  CHECK_FALSE(validation_message(json::array()).empty());
}

TEST_CASE("explicit scene with five sources is rejected") {
  auto preset = random_scene(ScenePreset{}, 1);
  auto sj = to_json(preset);
  auto src = sj["sources"][0];
  while (sj["sources"].size() < 5) sj["sources"].push_back(src);
  json j{{"scene", sj}};
  auto msg = validation_message(j);
  CHECK(msg.rfind("scene.", 0) == 0);
  CHECK(msg.find("sources") != std::string::npos);
}

TEST_CASE("one-speaker anechoic clip") {
  auto j = small_config(1, 0.0, 6.0);
  j["random_scene"]["overlap_ratio"] = 0.0;
  auto cfg = pipeline_config_from_json(j);
  auto res = process_clip(cfg);
  CHECK(res.diarization.num_speakers_est == 1);
  REQUIRE(res.metrics.diarization.has_value());
  // Only onset/offset frames may disagree with the energy-based reference.
  CHECK(res.metrics.diarization->der() < 0.03);
  REQUIRE(res.separation.has_value());
  CHECK(res.separation->speakers.size() == 1);
  const auto* act = res.timing.find("activity");
  REQUIRE(act != nullptr);
  CHECK(act->eigendecompositions == 0);
}

TEST_CASE("run directory contents and reproducibility") {
  auto root = testing::scratch_dir("pipeline");
  auto cfg = pipeline_config_from_json(small_config(2, 0.2, 5.0));
  auto a = run_pipeline(cfg, root / "a");
  auto b = run_pipeline(cfg, root / "b");
  CHECK(a.directory == root / "a");

  for (const char* name :
       {artifact::kConfig, artifact::kScene, artifact::kMixture, artifact::kReferenceActivity,
        artifact::kCoherence, artifact::kSilentFrames, artifact::kBinaryActivity,
        artifact::kGlobalActivity, artifact::kUnrectifiedActivity, artifact::kRttm,
        artifact::kScatter, artifact::kMetrics, artifact::kManifest, artifact::kTiming})
    CHECK_MESSAGE(std::filesystem::exists(root / "a" / name), name);
  CHECK(std::filesystem::exists(root / "a" / artifact::kSeparatedDir / speaker_file_name(0)));
  CHECK(std::filesystem::exists(root / "a" / artifact::kCleanDir));

  const auto ha = hash_tree(root / "a"), hb = hash_tree(root / "b");
  CHECK(ha == hb);
  CHECK_FALSE(ha.contains(artifact::kTiming));
  CHECK(ha.contains(artifact::kMixture));
  CHECK(slurp(root / "a" / artifact::kManifest) == slurp(root / "b" / artifact::kManifest));
  CHECK(ha.at(artifact::kMixture).get<std::string>() == sha256_file(root / "a" / artifact::kMixture));

  auto metrics = json::parse(slurp(root / "a" / artifact::kMetrics));
  CHECK(metrics.contains("der"));
  CHECK(metrics.contains("si_sdr_db"));

  // An existing run directory is replaced, not merged.
  { std::ofstream(root / "a" / "stale.txt") << "x"; }
  run_pipeline(cfg, root / "a");
  CHECK_FALSE(std::filesystem::exists(root / "a" / "stale.txt"));
  CHECK(hash_tree(root / "a") == hb);
  std::filesystem::remove_all(root);
}

TEST_CASE("failed runs leave nothing behind") {
  auto root = testing::scratch_dir("atomic");
  CHECK_THROWS_AS(write_atomically(root / "out",
                                   [](const std::filesystem::path& tmp) {
                                     std::ofstream(tmp / "partial.txt") << "half";
                                     throw IoError("disk on fire");
                                   }),
                  IoError);
  CHECK_FALSE(std::filesystem::exists(root / "out"));
  CHECK(std::filesystem::is_empty(root));

  write_atomically(root / "out", [](const std::filesystem::path& tmp) {
    std::ofstream(tmp / "done.txt") << "ok";
  });
  CHECK(slurp(root / "out" / "done.txt") == "ok");
  CHECK(std::distance(std::filesystem::directory_iterator(root), {}) == 1);
  std::filesystem::remove_all(root);
}

TEST_CASE("stages compose through files") {
  auto root = testing::scratch_dir("stages");
  auto cfg = pipeline_config_from_json(small_config(2, 0.2, 5.0));
  auto data = prepare_clip(cfg);
  write_clip_data(root, data);
  auto feats = featurize(data.mixture, cfg.features);
  write_features(root, feats, cfg.features);

  FeatureStage back;
  auto coh = read_features(root, data.mixture, cfg.features, &back);
  CHECK(coh.entries == feats.coherence.entries);
  CHECK(coh.silent == feats.coherence.silent);

  auto d1 = diarize(feats, cfg.diarization, &*data.reference);
  auto d2 = diarize(back, cfg.diarization, &*data.reference);
  CHECK(d1.binary == d2.binary);
  CHECK(d1.global.rectified == d2.global.rectified);

  auto direct = process_clip(cfg);
  CHECK(direct.diarization.binary == d1.binary);
  std::filesystem::remove_all(root);
}

TEST_CASE("method variants") {
  auto cfg = pipeline_config_from_json(small_config(2, 0.2, 5.0));
  auto data = prepare_clip(cfg);
  auto feats = featurize(data.mixture, cfg.features);
  for (auto m : {DiarizationMethod::kEvd, DiarizationMethod::kSci, DiarizationMethod::kSciLt,
                 DiarizationMethod::kOracleSciLt}) {
    DiarizationConfig d = cfg.diarization;
    d.method = m;
    TimingProbe probe;
    auto out = diarize(feats, d, &*data.reference, &probe);
    CHECK(out.binary.num_frames() == feats.spec.num_frames());
    CHECK(out.num_speakers_est == out.binary.num_speakers());
    if (m == DiarizationMethod::kOracleSciLt) {
      CHECK(out.seed == *data.reference);
      CHECK(probe.find("count") == nullptr);
    }
    if (const auto* a = probe.find("activity"); a && m != DiarizationMethod::kEvd)
      CHECK(a->eigendecompositions == 0);
  }
  DiarizationConfig oracle = cfg.diarization;
  oracle.method = DiarizationMethod::kOracleSciLt;
  CHECK_THROWS_AS(diarize(feats, oracle, nullptr), ValidationError);
}
