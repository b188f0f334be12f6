#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spatialdiar {

// Multichannel real signal, channel-major storage.
class WaveBuffer {
 public:
  WaveBuffer() = default;
  WaveBuffer(std::size_t num_channels, std::size_t length,
             double sample_rate = 16000.0);

  std::size_t num_channels() const { return num_channels_; }
  std::size_t length() const { return length_; }
  double sample_rate() const { return sample_rate_; }
  bool empty() const { return num_channels_ == 0 || length_ == 0; }

  std::span<double> channel(std::size_t c) {
    return {data_.data() + c * length_, length_};
  }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * length_, length_};
  }
  double& operator()(std::size_t c, std::size_t n) {
    return data_[c * length_ + n];
  }
  double operator()(std::size_t c, std::size_t n) const {
    return data_[c * length_ + n];
  }

  const std::vector<double>& raw() const { return data_; }

  // Throws ValidationError if sample_rate <= 0 or any sample is non-finite.
  void validate() const;

  static WaveBuffer mono(std::vector<double> samples,
                         double sample_rate = 16000.0);
  WaveBuffer extract_channel(std::size_t c) const;

  bool operator==(const WaveBuffer&) const = default;

 private:
  std::size_t num_channels_ = 0;
  std::size_t length_ = 0;
  double sample_rate_ = 16000.0;
  std::vector<double> data_;
};

double energy(std::span<const double> x);
double rms(std::span<const double> x);

}  // namespace spatialdiar
