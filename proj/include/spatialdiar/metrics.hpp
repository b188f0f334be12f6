#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <span>

#include <json.hpp>

#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/wave.hpp"

namespace spatialdiar {

inline constexpr double kSiSdrCapDb = 60.0;

// mapping[i] = reference speaker matched to estimated speaker i, or -1.
using SpeakerMapping = std::vector<int>;

struct DerComponents {
  std::size_t false_alarm = 0;
  std::size_t missed = 0;
  std::size_t confusion = 0;
  std::size_t total = 0;

  double der() const;
  std::size_t errors() const { return false_alarm + missed + confusion; }
};

struct DerResult {
  DerComponents components;
  SpeakerMapping mapping;
  double der() const { return components.der(); }
};

// Frame-level scoring under a fixed mapping. Frames within `collar` frames of
// a reference speaker change point are skipped (and not counted in total).
DerComponents der_components(const BinaryActivity& est, const BinaryActivity& ref,
                             const SpeakerMapping& mapping, std::size_t collar = 0);

// Every maximal injective mapping, lowest error count wins, first one in
// lexicographic order on ties.
SpeakerMapping align_permutation(const BinaryActivity& est, const BinaryActivity& ref,
                                 std::size_t collar = 0);

DerResult der(const BinaryActivity& est, const BinaryActivity& ref, std::size_t collar = 0);

// Macro F1 over the classes that occur in `refs`.
double counting_f1(const std::vector<std::size_t>& estimates,
                   const std::vector<std::size_t>& refs);

// Clamped to [-60, 60] dB.
double si_sdr(std::span<const double> ref, std::span<const double> est);
double si_sdr(const WaveBuffer& ref, const WaveBuffer& est);

struct MetricsReport {
  std::string clip_id;
  std::size_t num_speakers_ref = 0;
  std::size_t num_speakers_est = 0;
  std::optional<DerResult> diarization;
  std::optional<double> counting_f1;
  std::vector<double> si_sdr_db;           // per reference speaker, aligned
  std::vector<double> si_sdr_mixture_db;   // unprocessed reference channel vs each image
  std::vector<int> separation_mapping;     // reference speaker -> output index

  std::optional<double> mean_si_sdr_improvement() const;
};

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

// One row per report sorted by clip id.
void write_batch_csv(const std::filesystem::path& path, std::vector<MetricsReport> reports,
                     const std::vector<nlohmann::json>& scene_params = {});

}  // namespace spatialdiar
