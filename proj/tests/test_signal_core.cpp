#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/fft.hpp"
#include "spatialdiar/stft.hpp"
#include "spatialdiar/wav_io.hpp"
#include "support.hpp"

using namespace spatialdiar;

TEST_CASE("stft params defaults and framing") {
  StftParams p;
  CHECK(p.num_bins() == 1025);
  CHECK(p.head_pad() == 1536);
  // 12 s clip: head pad 1536, tail pad 1536, 192000 is a whole number of hops.
  const std::size_t n = 192000;
  CHECK(p.num_frames(n) == (n + 2 * 1536 - 2048) / 512 + 1);
  CHECK(p.num_frames(n) == 378);
  // Partial last hop is padded up to a whole hop.
  CHECK(p.num_frames(n + 1) == 379);
  CHECK(p.frame_start(0) == -1536);
  CHECK(p.frame_start(3) == 0);
}

TEST_CASE("stft params validation") {
  StftParams p;
  CHECK_NOTHROW(p.validate());
  StftParams bad = p;
  bad.hop = 4096;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.fft_size = 1024;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  // sqrt-Hann pair at 50% overlap sums to a constant as well; 1/3 overlap does not.
  bad = p;
  bad.hop = 700;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("cola profile is flat") {
  StftParams p;
  auto prof = cola_profile(p);
  REQUIRE(prof.size() == p.hop);
  for (double v : prof) CHECK(std::abs(v - prof.front()) < 1e-10);
  CHECK(prof.front() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("stft of zeros is zero") {
  WaveBuffer w(2, 8000);
  auto s = stft(w);
  CHECK(s.num_channels() == 2);
  for (const auto& v : s.raw()) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft rejects empty and non-finite input") {
  CHECK_THROWS_AS(stft(WaveBuffer()), ValidationError);
  WaveBuffer w(1, 4096);
  w(0, 100) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(stft(w), ValidationError);
  WaveBuffer wrong_rate(1, 4096, 8000.0);
  CHECK_THROWS_AS(stft(wrong_rate), ValidationError);
}

TEST_CASE("1 kHz sine peaks at bin 128") {
  const std::size_t n = 16000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0);
  auto s = stft(WaveBuffer::mono(x));
  const std::size_t expected = 1000 * 2048 / 16000;
  for (std::size_t l = 4; l + 4 < s.num_frames(); ++l) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < s.num_bins(); ++f)
      if (std::abs(s(0, l, f)) > std::abs(s(0, l, best))) best = f;
    CHECK(best == expected);
  }
}

TEST_CASE("parseval per frame") {
  auto x = testing::gaussian_noise(20000, 11);
  StftParams p;
  auto s = stft(WaveBuffer::mono(x), p);
  auto w = analysis_window(p);
  for (std::size_t l : {0ul, 7ul, 20ul, s.num_frames() - 1}) {
    double time_energy = 0.0;
    for (std::size_t k = 0; k < p.frame_len; ++k) {
      const long idx = p.frame_start(l) + static_cast<long>(k);
      if (idx >= 0 && idx < static_cast<long>(x.size()))
        time_energy += std::pow(x[static_cast<std::size_t>(idx)] * w[k], 2);
    }
    // One-sided spectrum: DC and Nyquist counted once, the rest twice.
    double spec_energy = std::norm(s(0, l, 0)) + std::norm(s(0, l, p.num_bins() - 1));
    for (std::size_t f = 1; f + 1 < p.num_bins(); ++f) spec_energy += 2.0 * std::norm(s(0, l, f));
    spec_energy /= static_cast<double>(p.fft_size);
    CHECK(std::abs(spec_energy - time_energy) <= 1e-9 * time_energy);
  }
}

TEST_CASE("stft round trip on a random 4-channel 12 s signal") {
  auto w = testing::noise_wave(4, 192000, 3);
  auto back = istft(stft(w));
  REQUIRE(back.num_channels() == 4);
  REQUIRE(back.length() == w.length());
  double peak = 0.0, err = 0.0;
  for (std::size_t i = 0; i < w.raw().size(); ++i) {
    peak = std::max(peak, std::abs(w.raw()[i]));
    err = std::max(err, std::abs(w.raw()[i] - back.raw()[i]));
  }
  CHECK(err < 1e-6);
  CHECK(err / peak < 1e-6);
  // -80 dB in energy terms as well.
  double e_sig = 0.0, e_err = 0.0;
  for (std::size_t i = 0; i < w.raw().size(); ++i) {
    e_sig += w.raw()[i] * w.raw()[i];
    e_err += std::pow(w.raw()[i] - back.raw()[i], 2);
  }
  CHECK(10.0 * std::log10(e_err / e_sig) < -80.0);
}

TEST_CASE("round trip holds for odd lengths") {
  for (std::size_t n : {2049ul, 5000ul, 12345ul}) {
    auto w = testing::noise_wave(1, n, n);
    auto back = istft(stft(w));
    REQUIRE(back.length() == n);
    CHECK(testing::max_abs_diff(w.raw(), back.raw()) < 1e-9);
  }
}

TEST_CASE("istft of zeros is zero and rejects inconsistent shapes") {
  StftParams p;
  StftTensor z(1, p.num_frames(4000), p, 4000);
  auto w = istft(z);
  for (double v : w.raw()) CHECK(v == 0.0);
  StftTensor bad(1, 3, p, 4000);
  CHECK_THROWS_AS(istft(bad), ValidationError);
}

TEST_CASE("stft is linear") {
  auto x = testing::noise_wave(2, 9000, 5);
  auto y = testing::noise_wave(2, 9000, 6);
  WaveBuffer z(2, 9000);
  const double a = 0.7, b = -1.3;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 9000; ++i) z(c, i) = a * x(c, i) + b * y(c, i);
  auto sx = stft(x), sy = stft(y), sz = stft(z);
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < sz.raw().size(); ++i) {
    scale = std::max(scale, std::abs(sz.raw()[i]));
    err = std::max(err, std::abs(sz.raw()[i] - (a * sx.raw()[i] + b * sy.raw()[i])));
  }
  CHECK(err <= 1e-9 * scale);
}

TEST_CASE("stft is deterministic") {
  auto x = testing::noise_wave(3, 7000, 8);
  auto a = stft(x), b = stft(x);
  CHECK(a.raw() == b.raw());
}

TEST_CASE("band bins") {
  StftParams p;
  auto band = band_bins(p, 1000.0, 3000.0);
  REQUIRE(band.size() == 257);
  CHECK(band.front() == 128);
  CHECK(band.back() == 384);
  CHECK(band_bins(p, 0.0, 8000.0).size() == 1025);
  CHECK(band_bins(p, 100.0, 100.1).empty());
  CHECK_THROWS_AS(band_bins(p, 3000.0, 1000.0), ValidationError);
  CHECK_THROWS_AS(band_bins(p, 0.0, 9000.0), ValidationError);
  CHECK_THROWS_AS(band_bins(p, -1.0, 1000.0), ValidationError);
}

TEST_CASE("fft convolution matches direct convolution") {
  auto a = testing::gaussian_noise(300, 1);
  auto b = testing::gaussian_noise(57, 2);
  auto c = fft_convolve(a, b);
  REQUIRE(c.size() == 356);
  for (std::size_t n = 0; n < c.size(); ++n) {
    double ref = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k)
      if (n >= k && n - k < a.size()) ref += a[n - k] * b[k];
    CHECK(c[n] == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
  }
  FftConvolver conv(a, 64);
  auto t = conv.convolve_truncated(b);
  REQUIRE(t.size() == a.size());
  for (std::size_t n = 0; n < t.size(); ++n) CHECK(t[n] == doctest::Approx(c[n]).scale(1.0));
}

TEST_CASE("wav round trip") {
  auto dir = testing::scratch_dir("wav");
  auto w = testing::noise_wave(3, 1000, 4);
  for (std::size_t c = 0; c < 3; ++c)
    for (double& v : w.channel(c)) v = std::clamp(v, -0.99, 0.99);
  write_wav(dir / "f.wav", w, SampleFormat::kFloat32);
  auto f = read_wav(dir / "f.wav");
  REQUIRE(f.num_channels() == 3);
  REQUIRE(f.length() == 1000);
  for (std::size_t i = 0; i < w.raw().size(); ++i)
    CHECK(f.raw()[i] == static_cast<double>(static_cast<float>(w.raw()[i])));
  write_wav(dir / "p.wav", w, SampleFormat::kPcm16);
  auto p = read_wav(dir / "p.wav");
  CHECK(testing::max_abs_diff(w.raw(), p.raw()) <= 1.0 / 32768.0 + 1e-12);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  std::filesystem::remove_all(dir);
}
