#pragma once

#include <filesystem>
#include <vector>

#include "spatialdiar/features.hpp"

namespace spatialdiar {

// Binary layout, little-endian:
//   bytes 0-3   magic "SCM1"
//   bytes 4-7   uint32 L
//   bytes 8-11  uint32 whitened flag (0 or 1)
//   then L*L float64, row-major.
void write_coherence_binary(const std::filesystem::path& path, const CoherenceMatrix& w);
// Only entries and the whitened flag are restored.
CoherenceMatrix read_coherence_binary(const std::filesystem::path& path);

// L rows of L comma-separated values, full double precision.
void write_coherence_csv(const std::filesystem::path& path, const CoherenceMatrix& w);

// One row per frame: "frame,silent".
void write_frame_flags_csv(const std::filesystem::path& path, const std::vector<bool>& silent);
std::vector<bool> read_frame_flags_csv(const std::filesystem::path& path);

}  // namespace spatialdiar
