#include "spatialdiar/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {
namespace {

constexpr double kModulusFloor = 1e-12;
constexpr double kDegenerateRatio = 1e-12;
// |z| this close to 1 counts as already whitened; keeps whitening idempotent.
constexpr double kUnitTolerance = 4.0 * std::numeric_limits<double>::epsilon();

void check_spec(const StftTensor& spec) {
  if (spec.num_channels() < 2)
    throw ValidationError("spatial features need at least two channels");
  if (spec.num_frames() == 0) throw ValidationError("spectrogram has no frames");
}

double mean_reference_power(const StftTensor& spec) {
  double acc = 0.0;
  for (std::size_t l = 0; l < spec.num_frames(); ++l)
    for (const auto& x : spec.frame(0, l)) acc += std::norm(x);
  return acc / static_cast<double>(spec.num_frames() * spec.num_bins());
}

cplx whiten_entry(cplx z, bool& degenerate) {
  const double mod = std::abs(z);
  degenerate = false;
  if (!(mod >= kModulusFloor)) {
    degenerate = true;
    return {1.0, 0.0};
  }
  if (std::abs(mod - 1.0) <= kUnitTolerance) return z;
  return z / mod;
}

}  // namespace

bool BinFeature::any_degenerate() const {
  return std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
}

RtfEstimate estimate_rtf(const StftTensor& spec, std::size_t l, std::size_t f,
                         std::size_t d_half) {
  check_spec(spec);
  if (l >= spec.num_frames() || f >= spec.num_bins())
    throw ValidationError("estimate_rtf: frame or bin out of range");
  const std::size_t dims = spec.num_channels() - 1;
  const std::size_t first = l >= d_half ? l - d_half : 0;
  const std::size_t last = std::min(spec.num_frames() - 1, l + d_half);

  RtfEstimate out;
  out.values.assign(dims, cplx{});
  double den = 0.0;
  for (std::size_t n = first; n <= last; ++n) den += std::norm(spec(0, n, f));
  if (den < kDegenerateRatio * mean_reference_power(spec)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t m = 1; m <= dims; ++m) {
    cplx num{};
    for (std::size_t n = first; n <= last; ++n)
      num += spec(m, n, f) * std::conj(spec(0, n, f));
    out.values[m - 1] = num / den;
  }
  return out;
}

BinFeature whiten_bin_feature(std::span<const cplx> rtf) {
  BinFeature out;
  out.values.resize(rtf.size());
  out.degenerate.resize(rtf.size());
  for (std::size_t i = 0; i < rtf.size(); ++i) {
    if (!std::isfinite(rtf[i].real()) || !std::isfinite(rtf[i].imag()))
      throw ValidationError("whiten_bin_feature: non-finite entry");
    bool d = false;
    out.values[i] = whiten_entry(rtf[i], d);
    out.degenerate[i] = d;
  }
  return out;
}

FrameFeature frame_feature(const StftTensor& spec, std::size_t l,
                           std::span<const std::size_t> band, std::size_t d_half) {
  if (band.empty()) throw ValidationError("frame_feature: empty band");
  FrameFeature out;
  out.values.reserve(band.size() * (spec.num_channels() - 1));
  for (std::size_t f : band) {
    auto rtf = estimate_rtf(spec, l, f, d_half);
    auto bin = whiten_bin_feature(rtf.values);
    if (rtf.degenerate || bin.any_degenerate()) ++out.degenerate_bins;
    out.values.insert(out.values.end(), bin.values.begin(), bin.values.end());
  }
  return out;
}

WrtfField WrtfField::compute(const StftTensor& spec, std::size_t d_half) {
  check_spec(spec);
  WrtfField field;
  field.frames_ = spec.num_frames();
  field.bins_ = spec.num_bins();
  field.dims_ = spec.num_channels() - 1;
  field.d_half_ = d_half;
  field.params_ = spec.params();
  const std::size_t L = field.frames_, F = field.bins_, D = field.dims_;
  field.raw_.assign(L * F * D, cplx{});
  field.white_.assign(L * F * D, cplx{1.0, 0.0});
  field.degenerate_.assign(L * F, 0);

  const double floor = kDegenerateRatio * mean_reference_power(spec);
  std::vector<cplx> num(D);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t first = l >= d_half ? l - d_half : 0;
    const std::size_t end = std::min(L, l + d_half + 1);
    for (std::size_t f = 0; f < F; ++f) {
      double den = 0.0;
      std::fill(num.begin(), num.end(), cplx{});
      for (std::size_t n = first; n < end; ++n) {
        const cplx ref = spec(0, n, f);
        den += std::norm(ref);
        for (std::size_t m = 0; m < D; ++m) num[m] += spec(m + 1, n, f) * std::conj(ref);
      }
      if (den < floor) {
        field.degenerate_[l * F + f] = 1;
        continue;
      }
      const std::size_t base = (l * F + f) * D;
      bool any = false;
      for (std::size_t m = 0; m < D; ++m) {
        const cplx r = num[m] / den;
        field.raw_[base + m] = r;
        bool d = false;
        field.white_[base + m] = whiten_entry(r, d);
        any = any || d;
      }
      if (any) field.degenerate_[l * F + f] = 1;
    }
  }
  return field;
}

FrameFeature WrtfField::frame_feature(std::size_t l,
                                      std::span<const std::size_t> band) const {
  if (band.empty()) throw ValidationError("frame_feature: empty band");
  FrameFeature out;
  out.values.reserve(band.size() * dims_);
  for (std::size_t f : band) {
    auto w = whitened(l, f);
    out.values.insert(out.values.end(), w.begin(), w.end());
    if (degenerate(l, f)) ++out.degenerate_bins;
  }
  return out;
}

std::vector<std::size_t> CoherenceMatrix::active_frames() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < num_frames(); ++l)
    if (!is_silent(l)) out.push_back(l);
  return out;
}

namespace {

// Normalized real Gram matrix of the columns of `stack` (2D x L real/imag
// stacked). Zero-norm columns get a unit diagonal and zero off-diagonals.
Eigen::MatrixXd normalized_gram(const Eigen::MatrixXd& stack, bool whitened) {
  Eigen::MatrixXd gram = stack.transpose() * stack;
  const Eigen::Index L = gram.rows();
  Eigen::VectorXd inv_norm(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const double n2 = gram(l, l);
    if (!(n2 > 0.0)) {
      if (whitened) throw Error("coherence_matrix: zero-norm whitened feature");
      inv_norm(l) = 0.0;
    } else {
      inv_norm(l) = 1.0 / std::sqrt(n2);
    }
  }
  Eigen::MatrixXd w(L, L);
  for (Eigen::Index l = 0; l < L; ++l) {
    w(l, l) = 1.0;
    for (Eigen::Index n = l + 1; n < L; ++n) {
      const double v = gram(l, n) * inv_norm(l) * inv_norm(n);
      w(l, n) = v;
      w(n, l) = v;
    }
  }
  return w;
}

}  // namespace

CoherenceMatrix coherence_matrix(std::span<const FrameFeature> features,
                                 bool whitened) {
  if (features.empty()) throw ValidationError("coherence_matrix: no features");
  const std::size_t len = features.front().values.size();
  const auto L = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd stack(static_cast<Eigen::Index>(2 * len), L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const auto& v = features[static_cast<std::size_t>(l)].values;
    if (v.size() != len)
      throw ValidationError("coherence_matrix: features differ in length");
    for (std::size_t i = 0; i < len; ++i) {
      stack(static_cast<Eigen::Index>(2 * i), l) = v[i].real();
      stack(static_cast<Eigen::Index>(2 * i + 1), l) = v[i].imag();
    }
  }
  CoherenceMatrix out;
  out.entries = normalized_gram(stack, whitened);
  out.whitened = whitened;
  return out;
}

CoherenceMatrix coherence_matrix(const StftTensor& spec, const WrtfField& field,
                                 const CoherenceOptions& options) {
  const auto band = band_bins(spec.params(), options.band_lo_hz, options.band_hi_hz);
  if (band.empty()) throw ValidationError("coherence_matrix: empty band");
  const std::size_t D = field.dims();
  const auto L = static_cast<Eigen::Index>(field.num_frames());
  Eigen::MatrixXd stack(static_cast<Eigen::Index>(2 * D * band.size()), L);
  for (Eigen::Index l = 0; l < L; ++l) {
    Eigen::Index row = 0;
    for (std::size_t f : band) {
      auto v = options.whitened ? field.whitened(static_cast<std::size_t>(l), f)
                                : field.raw(static_cast<std::size_t>(l), f);
      for (std::size_t m = 0; m < D; ++m) {
        stack(row++, l) = v[m].real();
        stack(row++, l) = v[m].imag();
      }
    }
  }
  CoherenceMatrix out;
  out.entries = normalized_gram(stack, options.whitened);
  out.whitened = options.whitened;
  out.band_lo_hz = options.band_lo_hz;
  out.band_hi_hz = options.band_hi_hz;
  out.d_half = field.d_half();
  out.framing = spec.params();
  out.silent = silent_frames(spec, band, options.silent_threshold_db);
  return out;
}

std::vector<bool> silent_frames(const StftTensor& spec,
                                std::span<const std::size_t> band,
                                double threshold_db) {
  std::vector<double> e(spec.num_frames(), 0.0);
  for (std::size_t l = 0; l < spec.num_frames(); ++l)
    for (std::size_t f : band) e[l] += std::norm(spec(0, l, f));
  const double peak = e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
  const double limit = peak * std::pow(10.0, threshold_db / 10.0);
  std::vector<bool> out(e.size());
  for (std::size_t l = 0; l < e.size(); ++l) out[l] = !(e[l] > limit) || peak <= 0.0;
  return out;
}

}  // namespace spatialdiar
