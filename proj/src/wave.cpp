#include "spatialdiar/wave.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {

WaveBuffer::WaveBuffer(std::size_t num_channels, std::size_t length,
                       double sample_rate)
    : num_channels_(num_channels),
      length_(length),
      sample_rate_(sample_rate),
      data_(num_channels * length, 0.0) {}

void WaveBuffer::validate() const {
  if (!(sample_rate_ > 0.0))
    throw ValidationError("sample rate must be positive");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i]))
      throw ValidationError("non-finite sample at channel " +
                            std::to_string(i / length_) + ", index " +
                            std::to_string(i % length_));
  }
}

WaveBuffer WaveBuffer::mono(std::vector<double> samples, double sample_rate) {
  WaveBuffer w;
  w.num_channels_ = 1;
  w.length_ = samples.size();
  w.sample_rate_ = sample_rate;
  w.data_ = std::move(samples);
  return w;
}

WaveBuffer WaveBuffer::extract_channel(std::size_t c) const {
  auto ch = channel(c);
  return mono(std::vector<double>(ch.begin(), ch.end()), sample_rate_);
}

double energy(std::span<const double> x) {
  return std::transform_reduce(x.begin(), x.end(), x.begin(), 0.0);
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::sqrt(energy(x) / static_cast<double>(x.size()));
}

}  // namespace spatialdiar
