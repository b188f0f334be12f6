#include "spatialdiar/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {
namespace {

// FFTW planning is not thread-safe; execution with distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan forward_plan = nullptr;
  fftw_plan inverse_plan = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward_plan) fftw_destroy_plan(forward_plan);
    if (inverse_plan) fftw_destroy_plan(inverse_plan);
    fftw_free(time);
    fftw_free(freq);
  }
};

RealFft::RealFft(std::size_t size) : size_(size), impl_(std::make_unique<Impl>()) {
  if (size < 2) throw ValidationError("FFT size must be at least 2");
  impl_->time = fftw_alloc_real(size);
  impl_->freq = fftw_alloc_complex(size / 2 + 1);
  std::lock_guard lock(planner_mutex());
  const int n = static_cast<int>(size);
  impl_->forward_plan =
      fftw_plan_dft_r2c_1d(n, impl_->time, impl_->freq, FFTW_ESTIMATE);
  impl_->inverse_plan = fftw_plan_dft_c2r_1d(n, impl_->freq, impl_->time,
                                             FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  const std::size_t n = std::min(in.size(), size_);
  std::copy_n(in.begin(), n, impl_->time);
  std::fill(impl_->time + n, impl_->time + size_, 0.0);
  fftw_execute(impl_->forward_plan);
  std::memcpy(static_cast<void*>(out.data()), impl_->freq,
              num_bins() * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  std::memcpy(impl_->freq, in.data(), num_bins() * sizeof(fftw_complex));
  fftw_execute(impl_->inverse_plan);
  std::copy_n(impl_->time, std::min(out.size(), size_), out.begin());
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  RealFft fft(next_pow2(out_len));
  std::vector<std::complex<double>> fa(fft.num_bins()), fb(fft.num_bins());
  fft.forward(a, fa);
  fft.forward(b, fb);
  const double scale = 1.0 / static_cast<double>(fft.size());
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k] * scale;
  std::vector<double> out(fft.size());
  fft.inverse(fa, out);
  out.resize(out_len);
  return out;
}

FftConvolver::FftConvolver(std::span<const double> signal,
                           std::size_t max_kernel_len)
    : signal_len_(signal.size()),
      max_kernel_len_(max_kernel_len),
      fft_(next_pow2(signal.size() + max_kernel_len)),
      signal_spectrum_(fft_.num_bins()) {
  fft_.forward(signal, signal_spectrum_);
}

std::vector<double> FftConvolver::convolve_truncated(
    std::span<const double> kernel) {
  if (kernel.size() > max_kernel_len_)
    throw ValidationError("kernel longer than convolver capacity");
  std::vector<std::complex<double>> spectrum(fft_.num_bins());
  fft_.forward(kernel, spectrum);
  const double scale = 1.0 / static_cast<double>(fft_.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k)
    spectrum[k] *= signal_spectrum_[k] * scale;
  std::vector<double> out(fft_.size());
  fft_.inverse(spectrum, out);
  out.resize(signal_len_);
  return out;
}

}  // namespace spatialdiar
