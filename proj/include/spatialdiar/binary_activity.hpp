#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace spatialdiar {

// Speakers x frames matrix of 0/1 activity indicators.
struct BinaryActivity {
  Eigen::MatrixXi matrix;

  BinaryActivity() = default;
  explicit BinaryActivity(Eigen::MatrixXi m) : matrix(std::move(m)) {}
  BinaryActivity(std::size_t speakers, std::size_t frames)
      : matrix(Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(speakers),
                                     static_cast<Eigen::Index>(frames))) {}

  std::size_t num_speakers() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t num_frames() const { return static_cast<std::size_t>(matrix.cols()); }
  bool active(std::size_t j, std::size_t l) const {
    return matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) != 0;
  }
  std::size_t active_count(std::size_t l) const {
    return static_cast<std::size_t>(matrix.col(static_cast<Eigen::Index>(l)).sum());
  }

  bool operator==(const BinaryActivity& o) const { return matrix == o.matrix; }
};

// Frames with >= 2 active speakers over frames with >= 1; 0 when nobody talks.
double overlap_ratio(const BinaryActivity& activity);

}  // namespace spatialdiar
