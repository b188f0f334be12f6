#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/features.hpp"

namespace spatialdiar {

inline constexpr double kDefaultActivityThreshold = 0.2;
inline constexpr double kMaxVertexCondition = 1e8;

// Per-speaker frame activity. Column l of `unrectified` is the raw activity
// vector of frame l; `rectified` = transform^-1 * unrectified, which maps the
// vertex frame of speaker j to the j-th standard basis vector.
struct GlobalActivity {
  Eigen::MatrixXd unrectified;  // J x L
  Eigen::MatrixXd rectified;    // J x L
  std::vector<std::size_t> vertex_frames;
  Eigen::MatrixXd transform;  // J x J
  double condition_number = 1.0;

  std::size_t num_speakers() const { return static_cast<std::size_t>(rectified.rows()); }
  std::size_t num_frames() const { return static_cast<std::size_t>(rectified.cols()); }
};

// Unit-modulus wRTF of one speaker at every bin.
struct SpeakerTemplate {
  std::vector<cplx> values;  // bins x (M-1), bin-major
  std::vector<bool> degenerate;  // per bin
  std::vector<std::size_t> support;  // frames the template was averaged over
  std::size_t dims = 0;

  std::size_t num_bins() const { return degenerate.size(); }
  std::span<const cplx> bin(std::size_t f) const {
    return {values.data() + f * dims, dims};
  }
};

// J x L x F coherence between each TF bin's wRTF and each speaker template.
class LocalActivity {
 public:
  LocalActivity() = default;
  LocalActivity(std::size_t speakers, std::size_t frames, std::size_t bins)
      : speakers_(speakers), frames_(frames), bins_(bins),
        data_(speakers * frames * bins, 0.0),
        flagged_(speakers * frames * bins, 0) {}

  std::size_t num_speakers() const { return speakers_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return bins_; }

  double& operator()(std::size_t j, std::size_t l, std::size_t f) {
    return data_[(j * frames_ + l) * bins_ + f];
  }
  double operator()(std::size_t j, std::size_t l, std::size_t f) const {
    return data_[(j * frames_ + l) * bins_ + f];
  }
  bool flagged(std::size_t j, std::size_t l, std::size_t f) const {
    return flagged_[(j * frames_ + l) * bins_ + f] != 0;
  }
  void set_flagged(std::size_t j, std::size_t l, std::size_t f) {
    flagged_[(j * frames_ + l) * bins_ + f] = 1;
  }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::size_t speakers_ = 0, frames_ = 0, bins_ = 0;
  std::vector<double> data_;
  std::vector<unsigned char> flagged_;
};

struct EigengapOptions {
  std::size_t j_max = 4;
  double tau = 0.15;          // relative to the largest eigenvalue
  double floor_ratio = 0.05;  // largest eigenvalue below floor_ratio * L => 0
  bool exclude_silent = true;
};

// Number of eigenvalues (up to j_max) within tau of the largest.
std::size_t count_speakers_eigengap(const CoherenceMatrix& w,
                                    const EigengapOptions& options = {});

struct Diarization {
  BinaryActivity binary;
  GlobalActivity global;
};

// Baseline: embed frames with the top-J scaled eigenvectors, find J simplex
// vertices by successive projection, rectify with the inverse vertex matrix
// and threshold. Silent frames (per the matrix flags) are left inactive.
Diarization evd_simplex_diarize(const CoherenceMatrix& w, std::size_t num_speakers,
                                double threshold = kDefaultActivityThreshold);

// Frames where speaker j is the only active speaker.
std::vector<std::size_t> dominant_frames(const BinaryActivity& act, std::size_t j);

// Template from the raw RTFs averaged over `support`, each entry then
// normalized to unit modulus.
SpeakerTemplate speaker_template_from_support(const WrtfField& field,
                                              std::span<const std::size_t> support);
// Throws NoDominantFrames when speaker j has no solo frames.
SpeakerTemplate speaker_template(const WrtfField& field, const BinaryActivity& act,
                                 std::size_t j);
SpeakerTemplate speaker_template(const StftTensor& spec, const BinaryActivity& act,
                                 std::size_t j, std::size_t d_half);

// Re{t^H r(l,f)} / (M-1) for each speaker template, over bins in
// [first_bin, last_bin]; bins outside the range and degenerate bins are 0
// (degenerate ones flagged).
LocalActivity local_activity(const WrtfField& field,
                             std::span<const SpeakerTemplate> templates,
                             std::size_t first_bin = 0,
                             std::optional<std::size_t> last_bin = {});

// Mean of the local activity over `band`, J x L.
Eigen::MatrixXd global_activity_unrectified(const LocalActivity& local,
                                            std::span<const std::size_t> band);

// Vertex l_j = argmax_l unrect(j, l) (smallest index on ties); transform
// columns are the unrectified vertex columns. Throws VertexDegeneracy on a
// repeated vertex frame or condition number above `max_condition`.
GlobalActivity rectify_global_activity(const Eigen::MatrixXd& unrectified,
                                       double max_condition = kMaxVertexCondition);

// Same as above with the vertex frames given.
GlobalActivity rectify_with_vertices(const Eigen::MatrixXd& unrectified,
                                     std::vector<std::size_t> vertex_frames,
                                     double max_condition = kMaxVertexCondition);

BinaryActivity binarize_activity(const GlobalActivity& global,
                                 double threshold = kDefaultActivityThreshold);

struct SciOptions {
  bool rectify = true;  // false: plain SCI, thresholds the unrectified activity
  double band_lo_hz = 1000.0;
  double band_hi_hz = 3000.0;
  double local_lo_hz = 0.0;
  std::optional<double> local_hi_hz;  // Nyquist when empty
  double threshold = kDefaultActivityThreshold;
  double max_condition = kMaxVertexCondition;
};

struct SciResult {
  GlobalActivity global;
  LocalActivity local;
  BinaryActivity binary;
  std::vector<SpeakerTemplate> templates;
};

// One template per seed row, built from the speaker's solo frames. A speaker
// without solo frames falls back to the frame of maximum seed global activity
// when `seed_global` is given, otherwise to its least-overlapped active frames.
// Throws NoDominantFrames for a speaker that is never active.
std::vector<SpeakerTemplate> seed_templates(const WrtfField& field, const BinaryActivity& seed,
                                            const GlobalActivity* seed_global = nullptr);

// Seed activity -> templates -> local activity -> frequency-averaged global
// activity -> (rectification) -> thresholding. Performs no eigen-
// decomposition.
SciResult sci_lt_pipeline(const WrtfField& field, const BinaryActivity& seed,
                          const SciOptions& options = {},
                          const GlobalActivity* seed_global = nullptr);

}  // namespace spatialdiar
