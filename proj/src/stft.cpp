#include "spatialdiar/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/fft.hpp"

namespace spatialdiar {

std::size_t StftParams::num_frames(std::size_t signal_len) const {
  const std::size_t tail_extra = (hop - signal_len % hop) % hop;
  const std::size_t padded = signal_len + 2 * head_pad() + tail_extra;
  return (padded - frame_len) / hop + 1;
}

void StftParams::validate() const {
  if (hop == 0 || hop > frame_len || frame_len > fft_size)
    throw ValidationError("STFT parameters must satisfy 0 < hop <= frame_len <= fft_size");
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  auto profile = cola_profile(*this);
  for (double v : profile) {
    if (std::abs(v - profile.front()) > 1e-10)
      throw ValidationError("window pair is not constant-overlap-add for hop " +
                            std::to_string(hop));
  }
}

std::vector<double> analysis_window(const StftParams& params) {
  std::vector<double> w(params.frame_len);
  const double n = static_cast<double>(params.frame_len);
  // Periodic square-root Hann: sin(pi k / N).
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = std::sin(std::numbers::pi * static_cast<double>(k) / n);
  return w;
}

std::vector<double> synthesis_window(const StftParams& params) {
  return analysis_window(params);
}

std::vector<double> cola_profile(const StftParams& params) {
  auto wa = analysis_window(params);
  auto ws = synthesis_window(params);
  std::vector<double> profile(params.hop, 0.0);
  for (std::size_t k = 0; k < params.frame_len; ++k)
    profile[k % params.hop] += wa[k] * ws[k];
  return profile;
}

StftTensor::StftTensor(std::size_t channels, std::size_t frames,
                       const StftParams& params, std::size_t signal_len)
    : channels_(channels),
      frames_(frames),
      bins_(params.num_bins()),
      signal_len_(signal_len),
      params_(params),
      data_(channels * frames * params.num_bins()) {}

StftTensor StftTensor::extract_channel(std::size_t m) const {
  StftTensor out(1, frames_, params_, signal_len_);
  for (std::size_t l = 0; l < frames_; ++l) {
    auto src = frame(m, l);
    std::copy(src.begin(), src.end(), out.frame(0, l).begin());
  }
  return out;
}

StftTensor stft(const WaveBuffer& wave, const StftParams& params) {
  params.validate();
  if (wave.empty()) throw ValidationError("stft: empty input");
  wave.validate();
  if (std::abs(wave.sample_rate() - params.sample_rate) > 1e-9)
    throw ValidationError("stft: wave sample rate " +
                          std::to_string(wave.sample_rate()) +
                          " does not match STFT parameters");

  const std::size_t n = wave.length();
  const std::size_t frames = params.num_frames(n);
  StftTensor spec(wave.num_channels(), frames, params, n);
  const auto window = analysis_window(params);
  RealFft fft(params.fft_size);
  std::vector<double> buf(params.frame_len);

  for (std::size_t m = 0; m < wave.num_channels(); ++m) {
    auto x = wave.channel(m);
    for (std::size_t l = 0; l < frames; ++l) {
      const long start = params.frame_start(l);
      for (std::size_t k = 0; k < params.frame_len; ++k) {
        const long idx = start + static_cast<long>(k);
        const double s = (idx >= 0 && idx < static_cast<long>(n))
                             ? x[static_cast<std::size_t>(idx)]
                             : 0.0;
        buf[k] = s * window[k];
      }
      fft.forward(buf, spec.frame(m, l));
    }
  }
  return spec;
}

WaveBuffer istft(const StftTensor& spec) {
  const StftParams& params = spec.params();
  params.validate();
  if (spec.num_bins() != params.num_bins() ||
      spec.num_frames() != params.num_frames(spec.signal_length()))
    throw ValidationError("istft: tensor shape inconsistent with STFT parameters");

  const std::size_t n = spec.signal_length();
  const auto window = synthesis_window(params);
  const double cola = cola_profile(params).front();
  const double scale = 1.0 / (cola * static_cast<double>(params.fft_size));
  RealFft fft(params.fft_size);
  std::vector<double> buf(params.fft_size);

  WaveBuffer out(spec.num_channels(), n, params.sample_rate);
  for (std::size_t m = 0; m < spec.num_channels(); ++m) {
    auto y = out.channel(m);
    for (std::size_t l = 0; l < spec.num_frames(); ++l) {
      fft.inverse(spec.frame(m, l), buf);
      const long start = params.frame_start(l);
      for (std::size_t k = 0; k < params.frame_len; ++k) {
        const long idx = start + static_cast<long>(k);
        if (idx < 0 || idx >= static_cast<long>(n)) continue;
        y[static_cast<std::size_t>(idx)] += buf[k] * window[k] * scale;
      }
    }
  }
  return out;
}

std::vector<std::size_t> band_bins(const StftParams& params, double lo_hz,
                                   double hi_hz) {
  const double nyquist = params.sample_rate / 2.0;
  if (!(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyquist))
    throw ValidationError("band must satisfy 0 <= lo < hi <= fs/2");
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k < params.num_bins(); ++k) {
    const double hz = params.bin_hz(k);
    if (hz >= lo_hz && hz <= hi_hz) bins.push_back(k);
  }
  return bins;
}

}  // namespace spatialdiar
