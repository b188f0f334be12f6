#include "spatialdiar/separation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "hard") return MaskMode::kHard;
  if (s == "soft") return MaskMode::kSoft;
  throw ValidationError("unknown mask mode '" + s + "' (expected hard or soft)");
}

std::string to_string(MaskMode m) { return m == MaskMode::kHard ? "hard" : "soft"; }

MaskSet build_masks(const LocalActivity& local, const BinaryActivity& binary, MaskMode mode,
                    double beta) {
  if (local.num_speakers() != binary.num_speakers() ||
      local.num_frames() != binary.num_frames())
    throw ValidationError("build_masks: local activity is " +
                          std::to_string(local.num_speakers()) + "x" +
                          std::to_string(local.num_frames()) + ", binary activity is " +
                          std::to_string(binary.num_speakers()) + "x" +
                          std::to_string(binary.num_frames()));
  if (mode == MaskMode::kSoft && !(beta > 0.0 && std::isfinite(beta)))
    throw ValidationError("build_masks: soft-mask beta must be positive");

  const std::size_t J = local.num_speakers(), L = local.num_frames(), F = local.num_bins();
  MaskSet masks(J, L, F, mode, beta);
  std::vector<std::size_t> active;
  std::vector<double> w;
  for (std::size_t l = 0; l < L; ++l) {
    active.clear();
    for (std::size_t j = 0; j < J; ++j)
      if (binary.active(j, l)) active.push_back(j);
    if (active.empty()) continue;
    w.resize(active.size());
    for (std::size_t f = 0; f < F; ++f) {
      if (mode == MaskMode::kHard) {
        std::size_t best = active[0];
        for (std::size_t j : active)
          if (local(j, l, f) > local(best, l, f)) best = j;
        masks(best, l, f) = 1.0;
      } else {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j : active) top = std::max(top, beta * local(j, l, f));
        double sum = 0.0;
        for (std::size_t k = 0; k < active.size(); ++k) {
          w[k] = std::exp(beta * local(active[k], l, f) - top);
          sum += w[k];
        }
        for (std::size_t k = 0; k < active.size(); ++k) masks(active[k], l, f) = w[k] / sum;
      }
    }
  }
  return masks;
}

std::vector<WaveBuffer> extract_speakers(const StftTensor& spec, const MaskSet& masks,
                                         std::size_t reference_channel) {
  if (reference_channel >= spec.num_channels())
    throw ValidationError("extract_speakers: reference channel out of range");
  if (masks.num_frames() != spec.num_frames() || masks.num_bins() != spec.num_bins())
    throw ValidationError("extract_speakers: mask shape " + std::to_string(masks.num_frames()) +
                          "x" + std::to_string(masks.num_bins()) +
                          " does not match spectrogram " + std::to_string(spec.num_frames()) +
                          "x" + std::to_string(spec.num_bins()));
  std::vector<WaveBuffer> out;
  out.reserve(masks.num_speakers());
  const StftTensor ref = spec.extract_channel(reference_channel);
  for (std::size_t j = 0; j < masks.num_speakers(); ++j) {
    StftTensor masked = ref;
    for (std::size_t l = 0; l < masked.num_frames(); ++l)
      for (std::size_t f = 0; f < masked.num_bins(); ++f) masked(0, l, f) *= masks(j, l, f);
    out.push_back(istft(masked));
  }
  return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("mask dump truncated");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_mask_dump(const std::filesystem::path& path, const MaskSet& masks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("MSK1", 4);
  put_u32(out, static_cast<std::uint32_t>(masks.num_speakers()));
  put_u32(out, static_cast<std::uint32_t>(masks.num_frames()));
  put_u32(out, static_cast<std::uint32_t>(masks.num_bins()));
  for (double v : masks.data()) {
    const float x = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    put_u32(out, bits);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MaskSet read_mask_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MSK1", 4) != 0)
    throw IoError(path.string() + ": not a mask dump");
  const std::size_t J = get_u32(in), L = get_u32(in), F = get_u32(in);
  MaskSet masks(J, L, F, MaskMode::kHard, kDefaultSoftBeta);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t f = 0; f < F; ++f) {
        const std::uint32_t bits = get_u32(in);
        float x;
        std::memcpy(&x, &bits, 4);
        masks(j, l, f) = x;
      }
  return masks;
}

}  // namespace spatialdiar
