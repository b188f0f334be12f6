#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace spatialdiar {

// Real-input FFT of fixed size backed by FFTW. An instance owns its work
// buffers and must not be shared between threads; create one per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return size_; }
  std::size_t num_bins() const { return size_ / 2 + 1; }

  // `in` shorter than size() is zero-padded. `out` must hold num_bins().
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Unnormalized inverse: inverse(forward(x)) == size() * x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t size_;
  std::unique_ptr<Impl> impl_;
};

std::size_t next_pow2(std::size_t n);

// Linear convolution via FFT; output length a.size() + b.size() - 1.
std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b);

// Convolves many kernels against one fixed signal, reusing its spectrum.
class FftConvolver {
 public:
  FftConvolver(std::span<const double> signal, std::size_t max_kernel_len);
  // Returns the first signal.size() samples of signal * kernel.
  std::vector<double> convolve_truncated(std::span<const double> kernel);

 private:
  std::size_t signal_len_;
  std::size_t max_kernel_len_;
  RealFft fft_;
  std::vector<std::complex<double>> signal_spectrum_;
};

}  // namespace spatialdiar
