#pragma once

// Seeded generators and small oracles shared by the unit tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/wave.hpp"

namespace testing {

inline std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> out(n);
  for (double& v : out) v = g(rng);
  return out;
}

inline spatialdiar::WaveBuffer noise_wave(std::size_t channels, std::size_t n, std::uint64_t seed) {
  spatialdiar::WaveBuffer w(channels, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < n; ++i) w(c, i) = g(rng);
  return w;
}

// J x L activity with each frame owned by at most one speaker; every speaker
// gets at least one frame.
inline spatialdiar::BinaryActivity random_disjoint_activity(std::size_t j, std::size_t l,
                                                            std::mt19937_64& rng,
                                                            double silence = 0.0) {
  spatialdiar::BinaryActivity a(j, l);
  std::uniform_int_distribution<std::size_t> pick(0, j - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t c = 0; c < l; ++c) {
    if (c < j) {
      a.matrix(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 1;
      continue;
    }
    if (u(rng) < silence) continue;
    a.matrix(static_cast<Eigen::Index>(pick(rng)), static_cast<Eigen::Index>(c)) = 1;
  }
  return a;
}

inline spatialdiar::BinaryActivity random_activity(std::size_t j, std::size_t l,
                                                   std::mt19937_64& rng, double p = 0.4) {
  spatialdiar::BinaryActivity a(j, l);
  std::bernoulli_distribution b(p);
  for (Eigen::Index r = 0; r < a.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < a.matrix.cols(); ++c) a.matrix(r, c) = b(rng) ? 1 : 0;
  return a;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("spatialdiar_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
