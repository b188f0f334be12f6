#pragma once

#include <cstdint>
#include <vector>

namespace spatialdiar {

// Parameters of the source-filter speech-like generator. Defaults give a
// continuous utterance with short intra-word pauses.
struct SpeechSynthOptions {
  double sample_rate = 16000.0;
  double min_f0_hz = 90.0;
  double max_f0_hz = 240.0;
  double min_syllable_s = 0.12;
  double max_syllable_s = 0.30;
  double max_pause_s = 0.09;
  double unvoiced_probability = 0.2;
  double aspiration_level = 0.12;
};

// Speech-like dry signal: glottal pulse train plus aspiration noise through
// time-varying formant resonators, with syllabic amplitude envelopes.
// Deterministic in `seed`; normalized to unit RMS.
std::vector<double> synthesize_speech(double duration_s, std::uint64_t seed,
                                      const SpeechSynthOptions& options = {});

}  // namespace spatialdiar
