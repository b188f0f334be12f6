#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spatialdiar/stft.hpp"

namespace spatialdiar {

using cplx = std::complex<double>;

// Relative transfer function of channels 2..M against channel 1 at one TF bin.
struct RtfEstimate {
  std::vector<cplx> values;  // length M-1; zeros when degenerate
  // Reference auto-spectrum fell below 1e-12 x its clip mean.
  bool degenerate = false;
};

// Unit-modulus (whitened) RTF of one TF bin.
struct BinFeature {
  std::vector<cplx> values;
  std::vector<bool> degenerate;  // per entry: modulus under the floor, set to 1
  bool any_degenerate() const;
};

// Whitened bin features of one frame stacked over the selected bins,
// bin-major / mic-minor.
struct FrameFeature {
  std::vector<cplx> values;
  std::size_t degenerate_bins = 0;
};

RtfEstimate estimate_rtf(const StftTensor& spec, std::size_t l, std::size_t f,
                         std::size_t d_half);

BinFeature whiten_bin_feature(std::span<const cplx> rtf);

FrameFeature frame_feature(const StftTensor& spec, std::size_t l,
                           std::span<const std::size_t> band, std::size_t d_half);

// Raw and whitened RTFs of every TF bin of a spectrogram, computed with
// running sums over the (2 d_half + 1)-frame averaging window.
class WrtfField {
 public:
  static WrtfField compute(const StftTensor& spec, std::size_t d_half);

  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t dims() const { return dims_; }  // M - 1
  std::size_t d_half() const { return d_half_; }
  const StftParams& params() const { return params_; }

  std::span<const cplx> raw(std::size_t l, std::size_t f) const {
    return {raw_.data() + (l * bins_ + f) * dims_, dims_};
  }
  std::span<const cplx> whitened(std::size_t l, std::size_t f) const {
    return {white_.data() + (l * bins_ + f) * dims_, dims_};
  }
  bool degenerate(std::size_t l, std::size_t f) const {
    return degenerate_[l * bins_ + f] != 0;
  }

  FrameFeature frame_feature(std::size_t l, std::span<const std::size_t> band) const;

 private:
  std::size_t frames_ = 0, bins_ = 0, dims_ = 0, d_half_ = 0;
  StftParams params_;
  std::vector<cplx> raw_;
  std::vector<cplx> white_;
  std::vector<unsigned char> degenerate_;
};

// L x L frame-similarity matrix. Whitened: spatial coherence of wRTF
// features; otherwise the same normalized inner product on raw RTFs.
struct CoherenceMatrix {
  Eigen::MatrixXd entries;
  bool whitened = true;
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
  std::size_t d_half = 0;
  StftParams framing;
  std::vector<bool> silent;  // per frame; empty means none flagged

  std::size_t num_frames() const { return static_cast<std::size_t>(entries.rows()); }
  bool is_silent(std::size_t l) const { return !silent.empty() && silent[l]; }
  std::vector<std::size_t> active_frames() const;
};

CoherenceMatrix coherence_matrix(std::span<const FrameFeature> features,
                                 bool whitened = true);

struct CoherenceOptions {
  std::size_t d_half = 2;
  double band_lo_hz = 1000.0;
  double band_hi_hz = 3000.0;
  bool whitened = true;
  double silent_threshold_db = -60.0;
};

CoherenceMatrix coherence_matrix(const StftTensor& spec, const WrtfField& field,
                                 const CoherenceOptions& options);

// Frames whose reference-channel energy over `band` is more than
// `threshold_db` below the loudest frame.
std::vector<bool> silent_frames(const StftTensor& spec,
                                std::span<const std::size_t> band,
                                double threshold_db = -60.0);

}  // namespace spatialdiar
