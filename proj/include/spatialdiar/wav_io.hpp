#pragma once

#include <filesystem>

#include "spatialdiar/wave.hpp"

namespace spatialdiar {

enum class SampleFormat { kPcm16, kFloat32 };

// Reads a RIFF/WAVE file with 16-bit PCM or 32-bit IEEE float samples and any
// number of channels (WAVE_FORMAT_EXTENSIBLE accepted). Samples are scaled to
// nominal [-1, 1].
WaveBuffer read_wav(const std::filesystem::path& path);

// PCM16 output is clipped to the representable range.
void write_wav(const std::filesystem::path& path, const WaveBuffer& wave,
               SampleFormat format = SampleFormat::kFloat32);

}  // namespace spatialdiar
