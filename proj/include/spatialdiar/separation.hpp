#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "spatialdiar/activity.hpp"
#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/stft.hpp"
#include "spatialdiar/wave.hpp"

namespace spatialdiar {

enum class MaskMode { kHard, kSoft };

inline constexpr double kDefaultSoftBeta = 10.0;

MaskMode parse_mask_mode(const std::string& s);
std::string to_string(MaskMode m);

class MaskSet {
 public:
  MaskSet() = default;
  MaskSet(std::size_t speakers, std::size_t frames, std::size_t bins, MaskMode mode, double beta)
      : speakers_(speakers), frames_(frames), bins_(bins), mode_(mode), beta_(beta),
        data_(speakers * frames * bins, 0.0) {}

  std::size_t num_speakers() const { return speakers_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return bins_; }
  MaskMode mode() const { return mode_; }
  double beta() const { return beta_; }

  double& operator()(std::size_t j, std::size_t l, std::size_t f) {
    return data_[(j * frames_ + l) * bins_ + f];
  }
  double operator()(std::size_t j, std::size_t l, std::size_t f) const {
    return data_[(j * frames_ + l) * bins_ + f];
  }
  const std::vector<double>& data() const { return data_; }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  std::size_t speakers_ = 0, frames_ = 0, bins_ = 0;
  MaskMode mode_ = MaskMode::kHard;
  double beta_ = kDefaultSoftBeta;
  std::vector<double> data_;
};

// Only speakers marked active in frame l compete for its bins.
MaskSet build_masks(const LocalActivity& local, const BinaryActivity& binary,
                    MaskMode mode = MaskMode::kHard, double beta = kDefaultSoftBeta);

// Masked reference-channel spectrogram, resynthesized; one mono buffer per
// speaker, same length as the analysed signal.
std::vector<WaveBuffer> extract_speakers(const StftTensor& spec, const MaskSet& masks,
                                         std::size_t reference_channel = 0);

// "MSK1", u32 J, u32 L, u32 F, then float32 values in (j, l, f) order.
void write_mask_dump(const std::filesystem::path& path, const MaskSet& masks);
MaskSet read_mask_dump(const std::filesystem::path& path);

}  // namespace spatialdiar
