#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "spatialdiar/activity.hpp"
#include "spatialdiar/activity_io.hpp"
#include "spatialdiar/errors.hpp"
#include "spatialdiar/fft.hpp"
#include "spatialdiar/linalg.hpp"
#include "spatialdiar/rir.hpp"
#include "support.hpp"

using namespace spatialdiar;
using Eigen::Index;

namespace {

CoherenceMatrix gram_of(const BinaryActivity& p) {
  CoherenceMatrix w;
  const Eigen::MatrixXd pd = p.matrix.cast<double>();
  w.entries = pd.transpose() * pd;
  return w;
}

// Fraction of frames on which `est` matches `truth` after the best row
// permutation (brute force).
double best_frame_accuracy(const BinaryActivity& est, const BinaryActivity& truth,
                           std::size_t margin = 0) {
  std::vector<int> perm(truth.num_speakers());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  double best = 0.0;
  do {
    std::size_t ok = 0, counted = 0;
    for (std::size_t l = 0; l < truth.num_frames(); ++l) {
      // Skip frames whose analysis window straddles a change of the truth.
      bool steady = true;
      for (std::size_t k = l >= margin ? l - margin : 0; k <= l + margin && k < truth.num_frames(); ++k)
        steady = steady && truth.matrix.col(static_cast<Index>(k)) == truth.matrix.col(static_cast<Index>(l));
      if (!steady) continue;
      ++counted;
      bool same = true;
      for (std::size_t j = 0; j < truth.num_speakers(); ++j)
        same = same && est.active(static_cast<std::size_t>(perm[j]), l) == truth.active(j, l);
      ok += same;
    }
    best = std::max(best, static_cast<double>(ok) / static_cast<double>(counted));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Spectrogram with X^1 = 1 and X^{m+1} = rtf[m] in every TF bin of one
// frame, so that with D = 0 the RTF of that bin is exactly `rtf`.
StftTensor spectrogram_with_rtf(const std::vector<std::vector<cplx>>& per_frame) {
  StftParams p;
  const std::size_t L = per_frame.size(), M = per_frame.front().size() + 1;
  // A whole number of hops n gives n / hop + 3 frames.
  const std::size_t n = (L - 3) * p.hop;
  StftTensor spec(M, p.num_frames(n), p, n);
  REQUIRE(spec.num_frames() == L);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t f = 0; f < spec.num_bins(); ++f) {
      spec(0, l, f) = 1.0;
      for (std::size_t m = 1; m < M; ++m) spec(m, l, f) = per_frame[l][m - 1];
    }
  return spec;
}

SpeakerTemplate constant_template(const std::vector<cplx>& t, std::size_t bins) {
  SpeakerTemplate tpl;
  tpl.dims = t.size();
  for (std::size_t f = 0; f < bins; ++f) tpl.values.insert(tpl.values.end(), t.begin(), t.end());
  tpl.degenerate.assign(bins, false);
  tpl.support = {0};
  return tpl;
}

// Four-channel mixture of white-noise sources with pure integer delays, one
// delay pattern per speaker, following `act` frame by frame.
WaveBuffer delayed_sources(const BinaryActivity& act, std::uint64_t seed) {
  StftParams p;
  const std::size_t n = (act.num_frames() - 3) * p.hop;
  WaveBuffer w(4, n);
  const int delays[4][4] = {{0, 1, 2, 3}, {0, -1, -2, -3}, {0, 2, 4, 6}, {0, -2, -4, -6}};
  for (std::size_t j = 0; j < act.num_speakers(); ++j) {
    auto x = testing::gaussian_noise(n + 32, seed + j);
    for (std::size_t s = 0; s < n; ++s) {
      // Frame owning sample s: centre (l - 1) * hop.
      const std::size_t l = std::min(act.num_frames() - 1, (s + p.hop / 2) / p.hop + 1);
      if (!act.active(j, l)) continue;
      for (std::size_t m = 0; m < 4; ++m)
        w(m, s) += x[static_cast<std::size_t>(static_cast<long>(s) + 16 - delays[j][m])];
    }
  }
  return w;
}

}  // namespace

TEST_CASE("eigengap count on block Gram matrices") {
  BinaryActivity p(2, 6);
  p.matrix << 1, 1, 1, 0, 0, 0,
              0, 0, 0, 1, 1, 1;
  auto w = gram_of(p);
  auto ev = linalg::symmetric_eigenvalues(w.entries);
  CHECK(ev(0) == doctest::Approx(3.0));
  CHECK(ev(1) == doctest::Approx(3.0));
  CHECK(std::abs(ev(2)) < 1e-12);
  CHECK(count_speakers_eigengap(w) == 2);

  CoherenceMatrix ones;
  ones.entries = Eigen::MatrixXd::Ones(8, 8);
  CHECK(count_speakers_eigengap(ones) == 1);

  CoherenceMatrix zero;
  zero.entries = Eigen::MatrixXd::Zero(8, 8);
  CHECK(count_speakers_eigengap(zero) == 0);

  CoherenceMatrix skew;
  skew.entries = Eigen::MatrixXd::Identity(3, 3);
  skew.entries(0, 1) = 0.5;
  CHECK_THROWS_AS(count_speakers_eigengap(skew), ValidationError);
}

TEST_CASE("eigengap options") {
  std::mt19937_64 rng(1);
  auto p = testing::random_disjoint_activity(4, 60, rng);
  auto w = gram_of(p);
  EigengapOptions opts;
  opts.j_max = 2;
  CHECK(count_speakers_eigengap(w, opts) == 2);
  opts.j_max = 4;
  opts.tau = 1.01;
  CHECK(count_speakers_eigengap(w, opts) == 0);
  opts.tau = 0.15;
  opts.floor_ratio = 10.0;
  CHECK(count_speakers_eigengap(w, opts) == 0);

  // Silent frames are left out of the count when flagged.
  CoherenceMatrix flagged = w;
  flagged.silent.assign(60, false);
  for (std::size_t l = 0; l < 60; ++l)
    if (p.active(3, l)) flagged.silent[l] = true;
  CHECK(count_speakers_eigengap(flagged) == 3);
  EigengapOptions keep;
  keep.exclude_silent = false;
  CHECK(count_speakers_eigengap(flagged, keep) == 4);
}

TEST_CASE("eigengap recovers J on random disjoint activity") {
  std::mt19937_64 rng(2);
  std::size_t exact = 0, trials = 0;
  for (std::size_t j = 1; j <= 4; ++j)
    for (int t = 0; t < 20; ++t, ++trials)
      exact += count_speakers_eigengap(gram_of(testing::random_disjoint_activity(j, 100, rng))) == j;
  CHECK(static_cast<double>(exact) >= 0.95 * static_cast<double>(trials));
}

TEST_CASE("evd simplex recovers synthetic activity") {
  std::mt19937_64 rng(3);
  for (std::size_t j = 1; j <= 4; ++j)
    for (int t = 0; t < 5; ++t) {
      auto p = testing::random_disjoint_activity(j, 100, rng, 0.1);
      auto d = evd_simplex_diarize(gram_of(p), j);
      CHECK(best_frame_accuracy(d.binary, p) >= 0.99);
      for (std::size_t k = 0; k < j; ++k) {
        const auto v = static_cast<Index>(d.global.vertex_frames[k]);
        for (Index r = 0; r < static_cast<Index>(j); ++r)
          CHECK(std::abs(d.global.rectified(r, v) - (r == static_cast<Index>(k) ? 1.0 : 0.0)) < 1e-9);
      }
    }
}

TEST_CASE("evd simplex with one speaker and with silent frames") {
  std::mt19937_64 rng(4);
  auto p = testing::random_disjoint_activity(1, 50, rng, 0.3);
  auto d = evd_simplex_diarize(gram_of(p), 1);
  CHECK(d.binary == p);

  auto q = testing::random_disjoint_activity(2, 40, rng);
  auto w = gram_of(q);
  w.silent.assign(40, false);
  w.silent[10] = w.silent[11] = true;
  auto e = evd_simplex_diarize(w, 2);
  CHECK(e.binary.active_count(10) == 0);
  CHECK(e.binary.active_count(11) == 0);
  CHECK(e.global.unrectified.col(10).isZero());

  CHECK_THROWS_AS(evd_simplex_diarize(w, 0), ValidationError);
  CHECK_THROWS_AS(evd_simplex_diarize(gram_of(BinaryActivity(2, 3)), 4), ValidationError);
}

TEST_CASE("evd counter sees the baseline and not the coherence-indicator path") {
  std::mt19937_64 rng(5);
  auto p = testing::random_disjoint_activity(2, 30, rng);
  const auto before = linalg::eigendecomposition_count();
  evd_simplex_diarize(gram_of(p), 2);
  CHECK(linalg::eigendecomposition_count() == before + 1);
  count_speakers_eigengap(gram_of(p));
  CHECK(linalg::eigendecomposition_count() == before + 2);
}

TEST_CASE("rectification: hand-solved 2 x 2 example") {
  Eigen::MatrixXd u(2, 3);
  u << 0.9, 0.2, 0.55,
       0.1, 0.8, 0.45;
  auto g = rectify_global_activity(u);
  REQUIRE(g.vertex_frames == std::vector<std::size_t>{0, 1});
  // G = [[0.9, 0.2], [0.1, 0.8]], det 0.70; G^-1 (0.55, 0.45) = (0.35, 0.35) / 0.70.
  CHECK(g.rectified(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.rectified(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(g.rectified(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(g.rectified(1, 0)) < 1e-12);
  CHECK(std::abs(g.rectified(0, 1)) < 1e-12);
  CHECK(std::abs(g.rectified(1, 1) - 1.0) < 1e-12);
  CHECK(g.transform == u.leftCols(2));
  CHECK(g.condition_number == doctest::Approx(linalg::condition_number_1(u.leftCols(2))));
  auto b = binarize_activity(g);
  CHECK(b.active_count(0) == 1);
  CHECK(b.active_count(1) == 1);
}

TEST_CASE("rectification: scalar case and tie-breaking") {
  Eigen::MatrixXd u(1, 4);
  u << 0.2, 0.8, 0.4, 0.8;
  auto g = rectify_global_activity(u);
  CHECK(g.vertex_frames == std::vector<std::size_t>{1});
  CHECK(g.rectified(0, 0) == doctest::Approx(0.25));
  CHECK(g.rectified(0, 1) == 1.0);
  CHECK(g.rectified(0, 3) == 1.0);
}

TEST_CASE("rectification errors") {
  Eigen::MatrixXd dup(2, 3);
  dup << 0.9, 0.1, 0.2,
         0.9, 0.1, 0.3;
  CHECK_THROWS_AS(rectify_global_activity(dup), VertexDegeneracy);

  Eigen::MatrixXd near(2, 3);
  near << 1.0, 1.0 - 1e-10, 0.0,
          1.0 - 1e-10, 1.0, 0.0;
  try {
    rectify_global_activity(near);
    FAIL("expected VertexDegeneracy");
  } catch (const VertexDegeneracy& e) {
    CHECK(e.condition_number() > 1e8);
  }
  CHECK_NOTHROW(rectify_global_activity(near, 1e12));
  CHECK_THROWS_AS(rectify_with_vertices(near, {0}), ValidationError);
  CHECK_THROWS_AS(rectify_with_vertices(near, {0, 7}), ValidationError);
}

TEST_CASE("rectification property: vertices map to one-hot columns") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index J = 1 + trial % 4, L = 20 + trial % 30;
    Eigen::MatrixXd m(J, L);
    for (Index r = 0; r < J; ++r)
      for (Index c = 0; c < L; ++c) m(r, c) = u(rng);
    GlobalActivity g;
    try {
      g = rectify_global_activity(m);
    } catch (const VertexDegeneracy&) {
      continue;
    }
    for (Index j = 0; j < J; ++j)
      for (Index r = 0; r < J; ++r)
        CHECK(std::abs(g.rectified(r, static_cast<Index>(g.vertex_frames[static_cast<std::size_t>(j)])) -
                       (r == j ? 1.0 : 0.0)) < 1e-9);
    // rectified = G^-1 unrect, checked by multiplying back.
    CHECK((g.transform * g.rectified - m).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("binarization threshold") {
  GlobalActivity g;
  g.rectified.resize(2, 4);
  g.rectified << 0.21, 0.19, 0.2, 1.3,
                 -0.5, 0.0, 0.0, 0.0;
  auto b = binarize_activity(g);
  CHECK(b.matrix(0, 0) == 1);
  CHECK(b.matrix(0, 1) == 0);
  CHECK(b.matrix(0, 2) == 0);
  CHECK(b.matrix(0, 3) == 1);
  CHECK(b.matrix.row(1).sum() == 0);
  CHECK(binarize_activity(g, 0.1).matrix(0, 1) == 1);
}

TEST_CASE("dominant frames") {
  BinaryActivity a(2, 5);
  a.matrix << 1, 1, 0, 1, 0,
              0, 1, 1, 0, 0;
  CHECK(dominant_frames(a, 0) == std::vector<std::size_t>{0, 3});
  CHECK(dominant_frames(a, 1) == std::vector<std::size_t>{2});
}

TEST_CASE("local activity of hand-built features") {
  const cplx t1 = std::polar(1.0, 0.4), t2 = std::polar(1.0, -1.1);
  const cplx i(0.0, 1.0);
  // Frames: equal to the template, rotated by i, negated, scaled (whitened away).
  auto spec = spectrogram_with_rtf({{t1, t2}, {i * t1, i * t2}, {-t1, -t2}, {3.0 * t1, 0.2 * t2}});
  auto field = WrtfField::compute(spec, 0);
  const std::vector<SpeakerTemplate> tpls{constant_template({t1, t2}, spec.num_bins())};
  auto loc = local_activity(field, tpls);
  for (std::size_t f : {0ul, 500ul, 1024ul}) {
    CHECK(loc(0, 0, f) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(loc(0, 1, f)) < 1e-12);
    CHECK(loc(0, 2, f) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(loc(0, 3, f) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Restricted range: bins outside are zero.
  auto part = local_activity(field, tpls, 100, 200);
  CHECK(part(0, 0, 99) == 0.0);
  CHECK(part(0, 0, 100) == doctest::Approx(1.0));
  CHECK(part(0, 0, 201) == 0.0);
  CHECK_THROWS_AS(local_activity(field, tpls, 300, 200), ValidationError);

  // Constant local activity averages to the same constant.
  auto band = band_bins(spec.params(), 1000.0, 3000.0);
  auto glob = global_activity_unrectified(loc, band);
  CHECK(glob(0, 0) == doctest::Approx(1.0));
  CHECK(glob(0, 2) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(global_activity_unrectified(loc, {}), ValidationError);
}

TEST_CASE("degenerate bins are flagged and zeroed") {
  auto spec = spectrogram_with_rtf({{1.0}, {1.0}, {1.0}, {1.0}});
  spec(0, 1, 40) = 0.0;
  spec(1, 1, 40) = 0.0;
  auto field = WrtfField::compute(spec, 0);
  const std::vector<SpeakerTemplate> tpls{constant_template({1.0}, spec.num_bins())};
  auto loc = local_activity(field, tpls);
  CHECK(loc.flagged(0, 1, 40));
  CHECK(loc(0, 1, 40) == 0.0);
  CHECK_FALSE(loc.flagged(0, 1, 41));
}

TEST_CASE("local activity is bounded on random data") {
  auto w = testing::noise_wave(4, 30000, 7);
  auto field = WrtfField::compute(stft(w), 2);
  std::mt19937_64 rng(8);
  BinaryActivity seed = testing::random_disjoint_activity(3, field.num_frames(), rng);
  auto tpls = seed_templates(field, seed);
  auto loc = local_activity(field, tpls);
  for (double v : loc.raw()) {
    CHECK(v <= 1.0 + 1e-9);
    CHECK(v >= -1.0 - 1e-9);
  }
  for (const auto& t : tpls)
    for (auto z : t.values) CHECK(std::abs(std::abs(z) - 1.0) < 1e-12);
}

TEST_CASE("speaker templates") {
  auto w = testing::noise_wave(3, 20000, 9);
  auto spec = stft(w);
  auto field = WrtfField::compute(spec, 2);
  BinaryActivity act(2, field.num_frames());
  act.matrix(0, 5) = 1;
  act.matrix(0, 6) = act.matrix(1, 6) = 1;
  act.matrix(1, 9) = act.matrix(1, 12) = 1;

  SUBCASE("one solo frame: template is that frame's whitened feature") {
    auto tpl = speaker_template(field, act, 0);
    CHECK(tpl.support == std::vector<std::size_t>{5});
    for (std::size_t f = 0; f < field.num_bins(); f += 11)
      for (std::size_t m = 0; m < 2; ++m)
        CHECK(std::abs(tpl.bin(f)[m] - field.whitened(5, f)[m]) < 1e-12);
    auto direct = speaker_template(spec, act, 0, 2);
    CHECK(direct.values == tpl.values);
  }
  SUBCASE("average of raw RTFs, then whitened") {
    auto tpl = speaker_template(field, act, 1);
    CHECK(tpl.support == std::vector<std::size_t>{9, 12});
    for (std::size_t f : {30ul, 600ul}) {
      for (std::size_t m = 0; m < 2; ++m) {
        const cplx avg = field.raw(9, f)[m] + field.raw(12, f)[m];
        CHECK(std::abs(tpl.bin(f)[m] - avg / std::abs(avg)) < 1e-12);
      }
    }
  }
  SUBCASE("no solo frames") {
    BinaryActivity overlapped(2, field.num_frames());
    overlapped.matrix(0, 3) = overlapped.matrix(1, 3) = 1;
    CHECK_THROWS_AS(speaker_template(field, overlapped, 0), NoDominantFrames);
    // The seeding helper falls back to the least-overlapped frames.
    auto tpls = seed_templates(field, overlapped);
    CHECK(tpls[0].support == std::vector<std::size_t>{3});
    BinaryActivity never(2, field.num_frames());
    never.matrix(0, 3) = 1;
    CHECK_THROWS_AS(seed_templates(field, never), NoDominantFrames);
  }
}

TEST_CASE("static anechoic source: template matches every dominant frame") {
  // Noise with a 512-sample period through an anechoic room: every interior
  // frame carries the same spatial signature.
  auto cycle = testing::gaussian_noise(512, 10);
  std::vector<double> dry(40000);
  for (std::size_t n = 0; n < dry.size(); ++n) dry[n] = cycle[n % 512];
  RoomSpec room;
  room.dims = {6.0, 5.0, 3.0};
  room.t60 = 0.0;
  auto arr = ArrayGeometry::ula({3.0, 1.0, 1.4}, 4, 0.08);
  auto rirs = simulate_rir(room, {1.9, 2.3, 1.5}, arr);
  WaveBuffer w(4, dry.size());
  for (std::size_t m = 0; m < 4; ++m) {
    auto y = fft_convolve(dry, rirs[m].taps);
    std::copy_n(y.begin(), dry.size(), w.channel(m).begin());
  }
  auto field = WrtfField::compute(stft(w), 2);
  BinaryActivity act(1, field.num_frames());
  for (std::size_t l = 10; l < 60; ++l) act.matrix(0, static_cast<Index>(l)) = 1;
  auto tpl = speaker_template(field, act, 0);
  auto band = band_bins(field.params(), 1000.0, 3000.0);
  double worst = 0.0;
  for (std::size_t l = 10; l < 60; ++l)
    for (std::size_t f : band)
      for (std::size_t m = 0; m < 3; ++m)
        worst = std::max(worst, std::abs(tpl.bin(f)[m] - field.whitened(l, f)[m]));
  CHECK(worst < 1e-6);
  // Speaker-dominant frames reach high unrectified activity.
  const std::vector<SpeakerTemplate> tpls{tpl};
  auto glob = global_activity_unrectified(local_activity(field, tpls), band);
  for (std::size_t l = 10; l < 60; ++l) CHECK(glob(0, static_cast<Index>(l)) > 0.8);
}

TEST_CASE("SCI-LT pipeline on delayed noise sources") {
  std::mt19937_64 rng(11);
  auto truth = testing::random_disjoint_activity(3, 120, rng, 0.05);
  // Contiguous turns work better for the RTF window; rebuild as blocks.
  truth = BinaryActivity(3, 120);
  for (Index l = 0; l < 120; ++l) truth.matrix((l / 10) % 3, l) = 1;
  auto w = delayed_sources(truth, 12);
  auto field = WrtfField::compute(stft(w), 1);

  const auto before = linalg::eigendecomposition_count();
  auto res = sci_lt_pipeline(field, truth);
  CHECK(linalg::eigendecomposition_count() == before);

  REQUIRE(res.binary.num_speakers() == 3);
  REQUIRE(res.templates.size() == 3);
  CHECK(best_frame_accuracy(res.binary, truth) > 0.75);
  CHECK(best_frame_accuracy(res.binary, truth, 2) > 0.97);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto v = static_cast<Index>(res.global.vertex_frames[j]);
    for (Index r = 0; r < 3; ++r)
      CHECK(std::abs(res.global.rectified(r, v) - (r == static_cast<Index>(j) ? 1.0 : 0.0)) < 1e-9);
  }

  SUBCASE("SCI without rectification thresholds the raw activity") {
    SciOptions opts;
    opts.rectify = false;
    auto sci = sci_lt_pipeline(field, truth, opts);
    CHECK(sci.global.rectified == sci.global.unrectified);
    CHECK(sci.global.unrectified == res.global.unrectified);
    CHECK(sci.binary == binarize_activity(sci.global));
  }
  SUBCASE("permutation equivariance") {
    const std::vector<Index> perm{2, 0, 1};
    BinaryActivity permuted(3, 120);
    for (Index j = 0; j < 3; ++j) permuted.matrix.row(j) = truth.matrix.row(perm[static_cast<std::size_t>(j)]);
    auto p = sci_lt_pipeline(field, permuted);
    for (Index j = 0; j < 3; ++j) {
      const Index src = perm[static_cast<std::size_t>(j)];
      CHECK(p.templates[static_cast<std::size_t>(j)].values ==
            res.templates[static_cast<std::size_t>(src)].values);
      CHECK((p.global.unrectified.row(j) - res.global.unrectified.row(src)).cwiseAbs().maxCoeff() == 0.0);
      CHECK((p.global.rectified.row(j) - res.global.rectified.row(src)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(p.binary.matrix.row(j) == res.binary.matrix.row(src));
    }
  }
  SUBCASE("gain invariance") {
    WaveBuffer g = w;
    const double gains[] = {1.0, 0.4, 1.7, 2.9};
    for (std::size_t m = 1; m < 4; ++m)
      for (double& v : g.channel(m)) v *= gains[m];
    auto gres = sci_lt_pipeline(WrtfField::compute(stft(g), 1), truth);
    CHECK((gres.global.rectified - res.global.rectified).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((gres.global.unrectified - res.global.unrectified).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(gres.binary == res.binary);
  }
  SUBCASE("option validation") {
    SciOptions opts;
    opts.local_lo_hz = 1500.0;
    CHECK_THROWS_AS(sci_lt_pipeline(field, truth, opts), ValidationError);
    CHECK_THROWS_AS(sci_lt_pipeline(field, BinaryActivity(3, 10)), ValidationError);
  }
}

TEST_CASE("single-speaker SCI-LT keeps the seed") {
  BinaryActivity truth(1, 80);
  for (Index l = 5; l < 75; ++l) truth.matrix(0, l) = 1;
  auto w = delayed_sources(truth, 13);
  auto res = sci_lt_pipeline(WrtfField::compute(stft(w), 1), truth);
  CHECK(best_frame_accuracy(res.binary, truth, 2) > 0.95);
  CHECK(best_frame_accuracy(res.binary, truth) >= 0.9);
}

TEST_CASE("activity csv round trip") {
  auto dir = testing::scratch_dir("act");
  Eigen::MatrixXd v(2, 3);
  v << 0.1, -2.5, 1.0 / 3.0,
       7.0, 0.0, 1e-17;
  write_activity_csv(dir / "g.csv", v);
  CHECK(read_activity_csv(dir / "g.csv") == v);

  BinaryActivity b(2, 4);
  b.matrix << 1, 0, 0, 1,
              0, 1, 1, 1;
  write_activity_csv(dir / "b.csv", b);
  CHECK(read_binary_activity_csv(dir / "b.csv") == b);
  CHECK_THROWS_AS(read_binary_activity_csv(dir / "g.csv"), IoError);

  { std::ofstream(dir / "ragged.csv") << "1,0\n1\n"; }
  CHECK_THROWS_AS(read_activity_csv(dir / "ragged.csv"), IoError);
  { std::ofstream(dir / "junk.csv") << "1,x\n"; }
  CHECK_THROWS_AS(read_activity_csv(dir / "junk.csv"), IoError);
  CHECK_THROWS_AS(read_activity_csv(dir / "absent.csv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("rttm segments") {
  StftParams p;
  BinaryActivity b(2, 10);
  b.matrix << 0, 0, 1, 1, 1, 0, 0, 0, 0, 0,
              1, 1, 0, 0, 0, 0, 0, 0, 1, 1;
  auto segs = activity_segments(b, p);
  REQUIRE(segs.size() == 3);
  // Frame l spans (l - 1) * hop +/- hop / 2 samples, clipped at zero.
  CHECK(segs[0].speaker == 1);
  CHECK(segs[0].onset_s == 0.0);
  CHECK(segs[0].duration_s == doctest::Approx((2 * 512 - 768) / 16000.0));
  CHECK(segs[1].speaker == 0);
  CHECK(segs[1].onset_s == doctest::Approx(256.0 / 16000.0));
  CHECK(segs[1].duration_s == doctest::Approx(3 * 512 / 16000.0));
  CHECK(segs[2].onset_s == doctest::Approx((8 * 512 - 768) / 16000.0));
  CHECK(segs[2].duration_s == doctest::Approx(2 * 512 / 16000.0));

  const std::string text = format_rttm(b, p, "clipA");
  CHECK(text.find("SPEAKER clipA 1 0.016 0.096 <NA> <NA> spk0 <NA> <NA>\n") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("scatter export shape") {
  auto dir = testing::scratch_dir("scatter");
  Eigen::MatrixXd u(3, 5);
  u << 0.9, 0.1, 0.2, 0.4, 0.3,
       0.1, 0.8, 0.1, 0.3, 0.3,
       0.0, 0.1, 0.7, 0.3, 0.4;
  auto g = rectify_global_activity(u);
  export_scatter(g, dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "frame,unrect_0,unrect_1,unrect_2,rect_0,rect_1,rect_2");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    ++rows;
  }
  CHECK(rows == 5);

  Eigen::MatrixXd one(1, 3);
  one << 0.2, 0.9, 0.5;
  export_scatter(rectify_global_activity(one), dir / "one.csv");
  std::ifstream in1(dir / "one.csv");
  std::getline(in1, header);
  CHECK(header == "frame,unrect_0,rect_0");
  std::filesystem::remove_all(dir);
}
