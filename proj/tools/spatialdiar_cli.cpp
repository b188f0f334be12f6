// Command-line front end: simulate | featurize | diarize | separate |
// evaluate | run | batch. Exit status 0 on success, 2 on invalid input or
// configuration, 3 on any other failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spatialdiar/activity_io.hpp"
#include "spatialdiar/errors.hpp"
#include "spatialdiar/log.hpp"
#include "spatialdiar/pipeline.hpp"
#include "spatialdiar/scene_config.hpp"
#include "spatialdiar/wav_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace spatialdiar;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

json load_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

WaveBuffer load_mixture(const fs::path& path, std::size_t reference_channel) {
  WaveBuffer w = reference_first(read_wav(path), reference_channel);
  quantize_float32(w);
  return w;
}

struct FeatureFlags {
  std::size_t d_half = 2;
  double band_lo = 1000.0, band_hi = 3000.0, silent_db = -60.0;
  FeatureConfig config() const { return {d_half, band_lo, band_hi, silent_db}; }
};

struct DiarizeFlags {
  std::string method = "sci-lt", counting = "eigengap";
  std::optional<std::size_t> num_speakers;
  double tau = 0.15, floor_ratio = 0.05, threshold = kDefaultActivityThreshold;
  std::size_t j_max = 4;
  double local_lo = 0.0;
  std::optional<double> local_hi;

  DiarizationConfig config() const {
    DiarizationConfig c;
    c.method = parse_method(method);
    c.counting = parse_counting(counting);
    c.num_speakers = num_speakers;
    c.eigengap.tau = tau;
    c.eigengap.floor_ratio = floor_ratio;
    c.eigengap.j_max = j_max;
    c.threshold = threshold;
    c.local_lo_hz = local_lo;
    c.local_hi_hz = local_hi;
    return c;
  }
  void add(CLI::App* app) {
    app->add_option("--method", method, "evd | sci | sci-lt | oracle-seeded-sci-lt")
        ->capture_default_str();
    app->add_option("--counting", counting, "eigengap | fixed")->capture_default_str();
    app->add_option("--num-speakers", num_speakers, "speaker count for fixed counting");
    app->add_option("--tau", tau, "eigengap ratio")->capture_default_str();
    app->add_option("--floor-ratio", floor_ratio, "largest-eigenvalue floor / L")
        ->capture_default_str();
    app->add_option("--j-max", j_max, "maximum speaker count")->capture_default_str();
    app->add_option("--threshold", threshold, "activity threshold")->capture_default_str();
    app->add_option("--local-lo", local_lo, "local activity lower edge (Hz)")
        ->capture_default_str();
    app->add_option("--local-hi", local_hi, "local activity upper edge (Hz), default Nyquist");
  }
};

void print_metrics(const MetricsReport& m) {
  if (m.diarization)
    std::printf("DER %.4f (FA %zu, MD %zu, CF %zu over %zu frames)\n", m.diarization->der(),
                m.diarization->components.false_alarm, m.diarization->components.missed,
                m.diarization->components.confusion, m.diarization->components.total);
  std::printf("speakers: estimated %zu, reference %zu\n", m.num_speakers_est, m.num_speakers_ref);
  if (auto imp = m.mean_si_sdr_improvement()) std::printf("SI-SDR improvement %.2f dB\n", *imp);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Spatial-activity speaker diarization and separation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  // simulate
  auto* sim = app.add_subcommand("simulate", "render a simulated scene");
  fs::path sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("-c,--config", sim_config, "scene or pipeline JSON")->required();
  sim->add_option("-o,--out", sim_out, "output directory");
  sim->add_option("--seed", sim_seed, "override the seed");

  // featurize
  auto* feat = app.add_subcommand("featurize", "wRTF features and coherence matrix");
  fs::path feat_mix, feat_out;
  std::size_t feat_ref = 0;
  FeatureFlags ff;
  feat->add_option("-m,--mixture", feat_mix, "multichannel WAV")->required();
  feat->add_option("--reference-channel", feat_ref, "reference microphone")->capture_default_str();
  feat->add_option("--d-half", ff.d_half, "RTF smoothing half-width (frames)")->capture_default_str();
  feat->add_option("--band-lo", ff.band_lo, "feature band lower edge (Hz)")->capture_default_str();
  feat->add_option("--band-hi", ff.band_hi, "feature band upper edge (Hz)")->capture_default_str();
  feat->add_option("--silent-db", ff.silent_db, "silent-frame threshold (dB)")->capture_default_str();
  feat->add_option("-o,--out", feat_out, "output directory");

  // diarize
  auto* dia = app.add_subcommand("diarize", "estimate speaker activity");
  fs::path dia_mix, dia_features, dia_seed, dia_out;
  std::size_t dia_ref = 0;
  std::string dia_clip = "clip";
  DiarizeFlags df;
  dia->add_option("-m,--mixture", dia_mix, "multichannel WAV")->required();
  dia->add_option("--reference-channel", dia_ref, "reference microphone")->capture_default_str();
  dia->add_option("-f,--features", dia_features, "featurize output directory")->required();
  dia->add_option("--seed-activity", dia_seed, "reference activity CSV for oracle seeding");
  dia->add_option("--clip-id", dia_clip, "RTTM file id")->capture_default_str();
  dia->add_option("-o,--out", dia_out, "output directory");
  df.add(dia);

  // separate
  auto* sep = app.add_subcommand("separate", "mask and resynthesize each speaker");
  fs::path sep_mix, sep_dia, sep_out;
  std::size_t sep_ref = 0;
  std::string sep_mode = "hard";
  double sep_beta = kDefaultSoftBeta;
  bool sep_dump = false;
  std::size_t sep_dhalf = 2;
  sep->add_option("-m,--mixture", sep_mix, "multichannel WAV")->required();
  sep->add_option("--reference-channel", sep_ref, "reference microphone")->capture_default_str();
  sep->add_option("-d,--diarization", sep_dia, "diarize output directory")->required();
  sep->add_option("--mode", sep_mode, "hard | soft")->capture_default_str();
  sep->add_option("--beta", sep_beta, "soft-mask sharpness")->capture_default_str();
  sep->add_option("--d-half", sep_dhalf, "RTF smoothing half-width (frames)")->capture_default_str();
  sep->add_flag("--dump-masks", sep_dump, "write masks.bin");
  sep->add_option("-o,--out", sep_out, "output directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "DER, counting F1 and SI-SDR");
  fs::path ev_act, ev_ref, ev_sep, ev_clean, ev_mix, ev_out;
  std::size_t ev_collar = 0, ev_refch = 0;
  std::string ev_clip = "clip";
  ev->add_option("-a,--activity", ev_act, "estimated binary activity CSV")->required();
  ev->add_option("-r,--reference", ev_ref, "reference binary activity CSV");
  ev->add_option("--separated", ev_sep, "directory of spk<j>.wav estimates");
  ev->add_option("--clean", ev_clean, "directory of spk<j>.wav reference images");
  ev->add_option("-m,--mixture", ev_mix, "mixture WAV (SI-SDR baseline)");
  ev->add_option("--reference-channel", ev_refch, "reference microphone")->capture_default_str();
  ev->add_option("--collar", ev_collar, "frames ignored around reference boundaries")
      ->capture_default_str();
  ev->add_option("--clip-id", ev_clip, "clip identifier")->capture_default_str();
  ev->add_option("-o,--out", ev_out, "output directory");

  // run
  auto* run = app.add_subcommand("run", "full pipeline from a config");
  fs::path run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_method;
  run->add_option("-c,--config", run_config, "pipeline JSON")->required();
  run->add_option("-o,--out", run_out, "output directory");
  run->add_option("--seed", run_seed, "override the seed");
  run->add_option("--method", run_method, "override the diarization method");

  // batch
  auto* bat = app.add_subcommand("batch", "many clips, concurrently");
  fs::path bat_config, bat_out;
  std::optional<std::size_t> bat_workers;
  bat->add_option("-c,--config", bat_config, "batch JSON")->required();
  bat->add_option("-o,--out", bat_out, "output directory");
  bat->add_option("-j,--workers", bat_workers, "concurrent clips");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  set_warnings_enabled(!quiet);

  if (*sim) {
    json j = load_json(sim_config);
    SceneConfig scene;
    if (j.contains("scene") || j.contains("random_scene")) {
      if (sim_seed) j["seed"] = *sim_seed;
      PipelineConfig pc = pipeline_config_from_json(j, sim_config.parent_path());
      scene = *pc.resolved_scene();
    } else {
      if (sim_seed) j["seed"] = *sim_seed;
      scene = scene_config_from_json(j, "", sim_config.parent_path());
    }
    const fs::path out = resolve_output_dir(sim_out, "simulate");
    write_atomically(out, [&](const fs::path& tmp) { write_clip_data(tmp, simulate_clip(scene)); });
    std::printf("%s\n", out.string().c_str());
  } else if (*feat) {
    const FeatureConfig cfg = ff.config();
    PipelineConfig check;
    check.features = cfg;
    check.validate();
    const WaveBuffer mix = load_mixture(feat_mix, feat_ref);
    const fs::path out = resolve_output_dir(feat_out, "featurize");
    fs::create_directories(out);
    write_features(out, featurize(mix, cfg), cfg);
    std::printf("%s\n", out.string().c_str());
  } else if (*dia) {
    const json fj = load_json(dia_features / artifact::kFeatures);
    const FeatureConfig fcfg = feature_config_from_json(fj, "features");
    const DiarizationConfig dcfg = df.config();
    PipelineConfig check;
    check.features = fcfg;
    check.diarization = dcfg;
    check.validate();
    const WaveBuffer mix = load_mixture(dia_mix, dia_ref);
    FeatureStage f;
    read_features(dia_features, mix, fcfg, &f);
    std::optional<BinaryActivity> seed;
    if (!dia_seed.empty()) seed = read_binary_activity_csv(dia_seed);
    if (dcfg.method == DiarizationMethod::kOracleSciLt && !seed)
      throw ValidationError("--seed-activity: required for oracle-seeded-sci-lt");
    const DiarizationOutput d = diarize(f, dcfg, seed ? &*seed : nullptr);
    const fs::path out = resolve_output_dir(dia_out, "diarize");
    write_diarization(out, d, dcfg, f.field.params(), dia_clip);
    std::printf("%zu speaker(s)\n", d.num_speakers_est);
  } else if (*sep) {
    const json dj = load_json(sep_dia / artifact::kDiarization);
    const DiarizationConfig dcfg = diarization_config_from_json(dj, "diarization");
    SeparationConfig scfg;
    scfg.mode = parse_mask_mode(sep_mode);
    scfg.beta = sep_beta;
    scfg.dump_masks = sep_dump;
    const WaveBuffer mix = load_mixture(sep_mix, sep_ref);
    FeatureStage f;
    StftParams params;
    params.sample_rate = mix.sample_rate();
    f.spec = stft(mix, params);
    f.field = WrtfField::compute(f.spec, sep_dhalf);
    const BinaryActivity tpl = read_binary_activity_csv(sep_dia / artifact::kSeedActivity);
    const BinaryActivity bin = read_binary_activity_csv(sep_dia / artifact::kBinaryActivity);
    const fs::path out = resolve_output_dir(sep_out, "separate");
    if (bin.num_speakers() == 0) {
      log_warning("no speakers in the activity; nothing to separate");
      fs::create_directories(out / artifact::kSeparatedDir);
    } else {
      write_separation(out, separate(f, tpl, bin, dcfg, scfg), scfg);
    }
    std::printf("%s\n", out.string().c_str());
  } else if (*ev) {
    BinaryActivity est = read_binary_activity_csv(ev_act);
    std::optional<BinaryActivity> ref;
    if (!ev_ref.empty()) ref = read_binary_activity_csv(ev_ref);
    std::optional<std::vector<WaveBuffer>> separated;
    if (!ev_sep.empty()) separated = read_speaker_wavs(ev_sep);
    std::optional<WaveBuffer> clean;
    if (!ev_clean.empty()) {
      WaveBuffer stacked;
      auto waves = read_speaker_wavs(ev_clean);
      if (!waves.empty()) {
        stacked = WaveBuffer(waves.size(), waves[0].length(), waves[0].sample_rate());
        for (std::size_t j = 0; j < waves.size(); ++j) {
          if (waves[j].length() != stacked.length())
            throw ValidationError("clean signals differ in length");
          std::copy(waves[j].channel(0).begin(), waves[j].channel(0).end(),
                    stacked.channel(j).begin());
        }
      }
      clean = stacked;
    }
    WaveBuffer mix;
    if (!ev_mix.empty()) mix = load_mixture(ev_mix, ev_refch);
    if (separated && clean && mix.empty())
      throw ValidationError("--mixture: required with --separated and --clean");
    const MetricsReport m =
        evaluate(ev_clip, est, ref ? &*ref : nullptr, separated ? &*separated : nullptr,
                 clean ? &*clean : nullptr, mix, ev_collar);
    const fs::path out = resolve_output_dir(ev_out, "evaluate");
    write_metrics(out, m);
    print_metrics(m);
  } else if (*run) {
    json j = load_json(run_config);
    if (run_seed) j["seed"] = *run_seed;
    if (run_method) j["diarization"]["method"] = *run_method;
    const PipelineConfig cfg = pipeline_config_from_json(j, run_config.parent_path());
    const fs::path out = resolve_output_dir(run_out.empty() ? cfg.output_dir : run_out, "run");
    const RunSummary s = run_pipeline(cfg, out);
    print_metrics(s.metrics);
    std::printf("%s\n", s.directory.string().c_str());
  } else if (*bat) {
    BatchConfig cfg = batch_config_from_json(load_json(bat_config), bat_config.parent_path());
    if (bat_workers) cfg.workers = std::max<std::size_t>(1, *bat_workers);
    const fs::path out = resolve_output_dir(bat_out.empty() ? cfg.base.output_dir : bat_out, "batch");
    const BatchSummary s = run_batch(cfg, out);
    if (s.median_der) std::printf("median DER %.4f\n", *s.median_der);
    if (s.counting_f1) std::printf("counting F1 %.4f\n", *s.counting_f1);
    std::printf("%s\n", out.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
