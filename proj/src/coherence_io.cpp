#include "spatialdiar/coherence_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "spatialdiar/errors.hpp"

namespace spatialdiar {
namespace {

constexpr char kMagic[4] = {'S', 'C', 'M', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(const unsigned char* p, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_coherence_binary(const std::filesystem::path& path, const CoherenceMatrix& w) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto L = w.entries.rows();
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(L));
  put_u32(out, w.whitened ? 1u : 0u);
  for (Eigen::Index r = 0; r < L; ++r)
    for (Eigen::Index c = 0; c < L; ++c) put_f64(out, w.entries(r, c));
  if (!out) throw IoError("write failed: " + path.string());
}

CoherenceMatrix read_coherence_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError(path.string() + ": not a coherence matrix file");
  const auto L = static_cast<std::size_t>(get_le(bytes.data() + 4, 4));
  const auto flag = get_le(bytes.data() + 8, 4);
  if (bytes.size() != 12 + L * L * 8)
    throw IoError(path.string() + ": size does not match header");
  CoherenceMatrix w;
  w.whitened = flag != 0;
  w.entries.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  const unsigned char* p = bytes.data() + 12;
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t c = 0; c < L; ++c, p += 8)
      w.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::bit_cast<double>(get_le(p, 8));
  return w;
}

void write_coherence_csv(const std::filesystem::path& path, const CoherenceMatrix& w) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < w.entries.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.entries.cols(); ++c) {
      if (c) out << ',';
      out << w.entries(r, c);
    }
    out << '\n';
  }
}

void write_frame_flags_csv(const std::filesystem::path& path,
                           const std::vector<bool>& silent) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,silent\n";
  for (std::size_t l = 0; l < silent.size(); ++l) out << l << ',' << (silent[l] ? 1 : 0) << '\n';
}

std::vector<bool> read_frame_flags_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<bool> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row");
    out.push_back(std::stoi(line.substr(comma + 1)) != 0);
  }
  return out;
}

}  // namespace spatialdiar
