#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "spatialdiar/wave.hpp"

namespace spatialdiar {

enum class WindowType { kSqrtHann };

struct StftParams {
  std::size_t frame_len = 2048;  // 128 ms at 16 kHz
  std::size_t hop = 512;         // 32 ms
  std::size_t fft_size = 2048;
  WindowType window = WindowType::kSqrtHann;
  double sample_rate = 16000.0;

  std::size_t num_bins() const { return fft_size / 2 + 1; }
  // Zeros prepended to the signal; the same amount (rounded up to a whole
  // hop) is appended.
  std::size_t head_pad() const { return frame_len - hop; }
  std::size_t num_frames(std::size_t signal_len) const;
  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
  }
  // Original-signal sample index of the first sample of frame `l` (may be
  // negative for the leading frames).
  long frame_start(std::size_t l) const {
    return static_cast<long>(l * hop) - static_cast<long>(head_pad());
  }

  // Throws ValidationError unless hop <= frame_len <= fft_size and the
  // analysis/synthesis pair is constant-overlap-add within 1e-10.
  void validate() const;

  bool operator==(const StftParams&) const = default;
};

std::vector<double> analysis_window(const StftParams& params);
std::vector<double> synthesis_window(const StftParams& params);
// Sum over frames of analysis*synthesis at every sample of one hop period.
std::vector<double> cola_profile(const StftParams& params);

// Complex spectrogram cube, channels x frames x bins (bin index fastest).
class StftTensor {
 public:
  StftTensor() = default;
  StftTensor(std::size_t channels, std::size_t frames, const StftParams& params,
             std::size_t signal_len);

  std::size_t num_channels() const { return channels_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t signal_length() const { return signal_len_; }
  const StftParams& params() const { return params_; }

  std::complex<double>& operator()(std::size_t m, std::size_t l, std::size_t f) {
    return data_[(m * frames_ + l) * bins_ + f];
  }
  const std::complex<double>& operator()(std::size_t m, std::size_t l,
                                         std::size_t f) const {
    return data_[(m * frames_ + l) * bins_ + f];
  }
  std::span<std::complex<double>> frame(std::size_t m, std::size_t l) {
    return {data_.data() + (m * frames_ + l) * bins_, bins_};
  }
  std::span<const std::complex<double>> frame(std::size_t m,
                                              std::size_t l) const {
    return {data_.data() + (m * frames_ + l) * bins_, bins_};
  }
  const std::vector<std::complex<double>>& raw() const { return data_; }

  StftTensor extract_channel(std::size_t m) const;

 private:
  std::size_t channels_ = 0;
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t signal_len_ = 0;
  StftParams params_;
  std::vector<std::complex<double>> data_;
};

StftTensor stft(const WaveBuffer& wave, const StftParams& params = {});

// Overlap-add synthesis; output has the original signal length.
WaveBuffer istft(const StftTensor& spec);

// Inclusive bin indices k with lo <= k * fs / fft_size <= hi.
std::vector<std::size_t> band_bins(const StftParams& params, double lo_hz,
                                   double hi_hz);

}  // namespace spatialdiar
