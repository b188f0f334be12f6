#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "spatialdiar/activity.hpp"
#include "spatialdiar/binary_activity.hpp"
#include "spatialdiar/stft.hpp"

namespace spatialdiar {

// J rows x L columns, comma separated, no header.
void write_activity_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values);
void write_activity_csv(const std::filesystem::path& path, const BinaryActivity& act);
Eigen::MatrixXd read_activity_csv(const std::filesystem::path& path);
// Entries must be exactly 0 or 1.
BinaryActivity read_binary_activity_csv(const std::filesystem::path& path);

struct RttmSegment {
  std::size_t speaker;
  double onset_s;
  double duration_s;
};

// Runs of consecutive active frames. Frame l covers the hop-long interval
// centred on its analysis window, clipped at t = 0.
std::vector<RttmSegment> activity_segments(const BinaryActivity& act, const StftParams& params);
std::string format_rttm(const BinaryActivity& act, const StftParams& params,
                        const std::string& file_id);
void write_rttm(const std::filesystem::path& path, const BinaryActivity& act,
                const StftParams& params, const std::string& file_id);

// Columns: frame, unrect_0..unrect_{J-1}, rect_0..rect_{J-1}.
void export_scatter(const GlobalActivity& global, const std::filesystem::path& path);

}  // namespace spatialdiar
