#include "spatialdiar/activity_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/log.hpp"

namespace spatialdiar {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t row) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw IoError(path.string() + ": empty cell on row " + std::to_string(row));
  double v = 0.0;
  auto res = std::from_chars(s.data() + b, s.data() + e + 1, v);
  if (res.ec != std::errc() || res.ptr != s.data() + e + 1)
    throw IoError(path.string() + ": bad number '" + s + "' on row " + std::to_string(row));
  return v;
}

}  // namespace

void write_activity_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < values.rows(); ++j) {
    for (Eigen::Index l = 0; l < values.cols(); ++l) {
      if (l) out << ',';
      out << values(j, l);
    }
    out << '\n';
  }
  finish(out, path);
}

void write_activity_csv(const std::filesystem::path& path, const BinaryActivity& act) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < act.matrix.rows(); ++j) {
    for (Eigen::Index l = 0; l < act.matrix.cols(); ++l) {
      if (l) out << ',';
      out << act.matrix(j, l);
    }
    out << '\n';
  }
  finish(out, path);
}

Eigen::MatrixXd read_activity_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell, path, rows.size()));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ": ragged row " + std::to_string(rows.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t l = 0; l < rows[j].size(); ++l)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = rows[j][l];
  return out;
}

BinaryActivity read_binary_activity_csv(const std::filesystem::path& path) {
  const Eigen::MatrixXd v = read_activity_csv(path);
  BinaryActivity out(static_cast<std::size_t>(v.rows()), static_cast<std::size_t>(v.cols()));
  for (Eigen::Index j = 0; j < v.rows(); ++j)
    for (Eigen::Index l = 0; l < v.cols(); ++l) {
      if (v(j, l) != 0.0 && v(j, l) != 1.0)
        throw IoError(path.string() + ": binary activity entry is neither 0 nor 1");
      out.matrix(j, l) = static_cast<int>(v(j, l));
    }
  return out;
}

std::vector<RttmSegment> activity_segments(const BinaryActivity& act, const StftParams& params) {
  const double fs = params.sample_rate;
  const double hop = static_cast<double>(params.hop);
  // Window of frame l is centred on sample l*hop - head_pad + frame_len/2.
  const double centre_offset =
      static_cast<double>(params.frame_len) / 2.0 - static_cast<double>(params.head_pad());
  auto frame_begin = [&](std::size_t l) {
    return std::max(0.0, static_cast<double>(l) * hop + centre_offset - hop / 2.0) / fs;
  };
  std::vector<RttmSegment> segs;
  for (std::size_t j = 0; j < act.num_speakers(); ++j) {
    std::size_t l = 0;
    while (l < act.num_frames()) {
      if (!act.active(j, l)) {
        ++l;
        continue;
      }
      std::size_t end = l;
      while (end < act.num_frames() && act.active(j, end)) ++end;
      const double on = frame_begin(l);
      const double off = frame_begin(end);
      if (off > on) segs.push_back({j, on, off - on});
      l = end;
    }
  }
  std::stable_sort(segs.begin(), segs.end(), [](const RttmSegment& a, const RttmSegment& b) {
    return a.onset_s < b.onset_s;
  });
  return segs;
}

std::string format_rttm(const BinaryActivity& act, const StftParams& params,
                        const std::string& file_id) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  for (const auto& s : activity_segments(act, params))
    os << "SPEAKER " << file_id << " 1 " << s.onset_s << ' ' << s.duration_s
       << " <NA> <NA> spk" << s.speaker << " <NA> <NA>\n";
  return os.str();
}

void write_rttm(const std::filesystem::path& path, const BinaryActivity& act,
                const StftParams& params, const std::string& file_id) {
  auto out = open_out(path);
  out << format_rttm(act, params, file_id);
  finish(out, path);
}

void export_scatter(const GlobalActivity& global, const std::filesystem::path& path) {
  const Eigen::Index J = global.rectified.rows();
  if (J == 1) log_warning("export_scatter: single speaker, writing traces only");
  auto out = open_out(path);
  out << "frame";
  for (Eigen::Index j = 0; j < J; ++j) out << ",unrect_" << j;
  for (Eigen::Index j = 0; j < J; ++j) out << ",rect_" << j;
  out << '\n';
  for (Eigen::Index l = 0; l < global.rectified.cols(); ++l) {
    out << l;
    for (Eigen::Index j = 0; j < J; ++j) out << ',' << global.unrectified(j, l);
    for (Eigen::Index j = 0; j < J; ++j) out << ',' << global.rectified(j, l);
    out << '\n';
  }
  finish(out, path);
}

}  // namespace spatialdiar
