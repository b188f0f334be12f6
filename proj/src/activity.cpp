#include "spatialdiar/activity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/linalg.hpp"
#include "spatialdiar/log.hpp"

namespace spatialdiar {
namespace {

using Eigen::Index;

constexpr double kSymmetryTolerance = 1e-9;

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<std::size_t>& idx) {
  const auto n = static_cast<Index>(idx.size());
  Eigen::MatrixXd out(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      out(r, c) = a(static_cast<Index>(idx[static_cast<std::size_t>(r)]),
                    static_cast<Index>(idx[static_cast<std::size_t>(c)]));
  return out;
}

std::vector<std::size_t> frames_for_analysis(const CoherenceMatrix& w, bool exclude_silent) {
  if (exclude_silent) return w.active_frames();
  std::vector<std::size_t> all(w.num_frames());
  for (std::size_t l = 0; l < all.size(); ++l) all[l] = l;
  return all;
}

void require_symmetric(const CoherenceMatrix& w) {
  if (!linalg::is_symmetric(w.entries, kSymmetryTolerance))
    throw ValidationError("coherence matrix is not symmetric");
}

// Successive projection: repeatedly take the row of largest residual norm and
// project every row onto the orthogonal complement of it.
std::vector<std::size_t> successive_projection(const Eigen::MatrixXd& rows,
                                               std::size_t count) {
  Eigen::MatrixXd residual = rows;
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < count; ++k) {
    const Eigen::VectorXd norms = residual.rowwise().squaredNorm();
    Index best = 0;
    for (Index i = 1; i < norms.size(); ++i)
      if (norms(i) > norms(best)) best = i;
    if (!(norms(best) > 0.0))
      throw VertexDegeneracy(std::numeric_limits<double>::infinity(),
                             "successive projection ran out of independent frames at vertex " +
                                 std::to_string(k));
    const Eigen::VectorXd v = residual.row(best).transpose() / std::sqrt(norms(best));
    residual -= (residual * v) * v.transpose();
    picked.push_back(static_cast<std::size_t>(best));
  }
  return picked;
}

}  // namespace

std::size_t count_speakers_eigengap(const CoherenceMatrix& w, const EigengapOptions& options) {
  require_symmetric(w);
  const auto frames = frames_for_analysis(w, options.exclude_silent);
  if (frames.empty()) return 0;
  const Eigen::VectorXd lambda = linalg::symmetric_eigenvalues(submatrix(w.entries, frames));
  const double top = lambda(0);
  if (!(top >= options.floor_ratio * static_cast<double>(frames.size()))) return 0;
  std::size_t count = 0;
  for (Index i = 0; i < lambda.size() && count < options.j_max; ++i) {
    if (lambda(i) >= options.tau * top)
      ++count;
    else
      break;
  }
  return count;
}

Diarization evd_simplex_diarize(const CoherenceMatrix& w, std::size_t num_speakers,
                                double threshold) {
  require_symmetric(w);
  const auto frames = w.active_frames();
  if (num_speakers < 1) throw ValidationError("evd_simplex_diarize: need J >= 1");
  if (num_speakers > frames.size())
    throw ValidationError("evd_simplex_diarize: J exceeds number of non-silent frames");
  const auto J = static_cast<Index>(num_speakers);
  const std::size_t L = w.num_frames();

  const auto eig = linalg::symmetric_eigen(submatrix(w.entries, frames));
  Eigen::MatrixXd embed(static_cast<Index>(frames.size()), J);
  for (Index j = 0; j < J; ++j)
    embed.col(j) = eig.vectors.col(j) * std::sqrt(std::max(eig.values(j), 0.0));

  auto picked = successive_projection(embed, num_speakers);
  Eigen::MatrixXd unrect = Eigen::MatrixXd::Zero(J, static_cast<Index>(L));
  for (std::size_t i = 0; i < frames.size(); ++i)
    unrect.col(static_cast<Index>(frames[i])) = embed.row(static_cast<Index>(i)).transpose();
  std::vector<std::size_t> vertices;
  for (std::size_t p : picked) vertices.push_back(frames[p]);

  Diarization out;
  out.global = rectify_with_vertices(unrect, vertices);
  out.binary = binarize_activity(out.global, threshold);
  return out;
}

std::vector<std::size_t> dominant_frames(const BinaryActivity& act, std::size_t j) {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < act.num_frames(); ++l)
    if (act.active(j, l) && act.active_count(l) == 1) out.push_back(l);
  return out;
}

SpeakerTemplate speaker_template_from_support(const WrtfField& field,
                                              std::span<const std::size_t> support) {
  if (support.empty()) throw ValidationError("speaker template needs a non-empty support");
  const std::size_t D = field.dims();
  const std::size_t F = field.num_bins();
  SpeakerTemplate tpl;
  tpl.dims = D;
  tpl.values.assign(F * D, cplx{});
  tpl.degenerate.assign(F, false);
  tpl.support.assign(support.begin(), support.end());
  std::vector<cplx> acc(D);
  for (std::size_t f = 0; f < F; ++f) {
    std::fill(acc.begin(), acc.end(), cplx{});
    for (std::size_t l : support) {
      if (l >= field.num_frames()) throw ValidationError("template support frame out of range");
      auto r = field.raw(l, f);
      for (std::size_t m = 0; m < D; ++m) acc[m] += r[m];
    }
    auto w = whiten_bin_feature(acc);
    std::copy(w.values.begin(), w.values.end(), tpl.values.begin() + static_cast<long>(f * D));
    tpl.degenerate[f] = w.any_degenerate();
  }
  return tpl;
}

SpeakerTemplate speaker_template(const WrtfField& field, const BinaryActivity& act,
                                 std::size_t j) {
  if (j >= act.num_speakers()) throw ValidationError("speaker index out of range");
  if (act.num_frames() != field.num_frames())
    throw ValidationError("activity frames do not match the feature field");
  const auto support = dominant_frames(act, j);
  if (support.empty())
    throw NoDominantFrames(j, "speaker " + std::to_string(j) + " has no solo frames");
  return speaker_template_from_support(field, support);
}

SpeakerTemplate speaker_template(const StftTensor& spec, const BinaryActivity& act,
                                 std::size_t j, std::size_t d_half) {
  return speaker_template(WrtfField::compute(spec, d_half), act, j);
}

LocalActivity local_activity(const WrtfField& field,
                             std::span<const SpeakerTemplate> templates,
                             std::size_t first_bin, std::optional<std::size_t> last_bin) {
  const std::size_t L = field.num_frames(), F = field.num_bins(), D = field.dims();
  const std::size_t last = last_bin ? *last_bin : F - 1;
  if (first_bin > last || last >= F) throw ValidationError("local activity bin range invalid");
  LocalActivity out(templates.size(), L, F);
  const double scale = 1.0 / static_cast<double>(D);
  for (std::size_t j = 0; j < templates.size(); ++j) {
    const auto& tpl = templates[j];
    if (tpl.num_bins() != F || tpl.dims != D)
      throw ValidationError("template shape does not match the feature field");
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t f = first_bin; f <= last; ++f) {
        if (field.degenerate(l, f) || tpl.degenerate[f]) {
          out.set_flagged(j, l, f);
          continue;
        }
        auto r = field.whitened(l, f);
        auto t = tpl.bin(f);
        double acc = 0.0;
        for (std::size_t m = 0; m < D; ++m)
          acc += t[m].real() * r[m].real() + t[m].imag() * r[m].imag();
        out(j, l, f) = acc * scale;
      }
    }
  }
  return out;
}

Eigen::MatrixXd global_activity_unrectified(const LocalActivity& local,
                                            std::span<const std::size_t> band) {
  if (band.empty()) throw ValidationError("global activity: empty band");
  const auto J = static_cast<Index>(local.num_speakers());
  const auto L = static_cast<Index>(local.num_frames());
  Eigen::MatrixXd out(J, L);
  const double inv = 1.0 / static_cast<double>(band.size());
  for (Index j = 0; j < J; ++j) {
    for (Index l = 0; l < L; ++l) {
      double acc = 0.0;
      for (std::size_t f : band) {
        if (f >= local.num_bins()) throw ValidationError("global activity: band bin out of range");
        acc += local(static_cast<std::size_t>(j), static_cast<std::size_t>(l), f);
      }
      out(j, l) = acc * inv;
    }
  }
  return out;
}

GlobalActivity rectify_with_vertices(const Eigen::MatrixXd& unrectified,
                                     std::vector<std::size_t> vertex_frames,
                                     double max_condition) {
  const Index J = unrectified.rows();
  if (J < 1) throw ValidationError("rectification needs at least one speaker");
  if (static_cast<Index>(vertex_frames.size()) != J)
    throw ValidationError("one vertex frame per speaker required");
  for (std::size_t a = 0; a < vertex_frames.size(); ++a) {
    if (vertex_frames[a] >= static_cast<std::size_t>(unrectified.cols()))
      throw ValidationError("vertex frame out of range");
    for (std::size_t b = 0; b < a; ++b)
      if (vertex_frames[a] == vertex_frames[b])
        throw VertexDegeneracy(std::numeric_limits<double>::infinity(),
                               "speakers " + std::to_string(b) + " and " + std::to_string(a) +
                                   " share vertex frame " + std::to_string(vertex_frames[a]));
  }

  GlobalActivity g;
  g.unrectified = unrectified;
  g.vertex_frames = std::move(vertex_frames);
  g.transform.resize(J, J);
  for (Index j = 0; j < J; ++j)
    g.transform.col(j) = unrectified.col(static_cast<Index>(g.vertex_frames[static_cast<std::size_t>(j)]));
  g.condition_number = linalg::condition_number_1(g.transform);
  if (!(g.condition_number <= max_condition))
    throw VertexDegeneracy(g.condition_number,
                           "vertex matrix condition number " + std::to_string(g.condition_number) +
                               " exceeds " + std::to_string(max_condition));
  g.rectified = g.transform.partialPivLu().solve(unrectified);
  return g;
}

GlobalActivity rectify_global_activity(const Eigen::MatrixXd& unrectified, double max_condition) {
  std::vector<std::size_t> vertices;
  for (Index j = 0; j < unrectified.rows(); ++j) {
    Index best = 0;
    for (Index l = 1; l < unrectified.cols(); ++l)
      if (unrectified(j, l) > unrectified(j, best)) best = l;
    vertices.push_back(static_cast<std::size_t>(best));
  }
  return rectify_with_vertices(unrectified, std::move(vertices), max_condition);
}

BinaryActivity binarize_activity(const GlobalActivity& global, double threshold) {
  BinaryActivity out(global.num_speakers(), global.num_frames());
  out.matrix = (global.rectified.array() > threshold).cast<int>().matrix();
  return out;
}

std::vector<SpeakerTemplate> seed_templates(const WrtfField& field, const BinaryActivity& seed,
                                            const GlobalActivity* seed_global) {
  if (seed.num_frames() != field.num_frames())
    throw ValidationError("seed activity has " + std::to_string(seed.num_frames()) +
                          " frames, features have " + std::to_string(field.num_frames()));
  const std::size_t J = seed.num_speakers();
  std::vector<SpeakerTemplate> out;
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<std::size_t> support = dominant_frames(seed, j);
    if (support.empty()) {
      if (seed_global && seed_global->num_speakers() == J &&
          seed_global->num_frames() == seed.num_frames()) {
        Index best = 0;
        const auto row = seed_global->rectified.row(static_cast<Index>(j));
        for (Index l = 1; l < row.size(); ++l)
          if (row(l) > row(best)) best = l;
        support = {static_cast<std::size_t>(best)};
      } else {
        std::size_t least = std::numeric_limits<std::size_t>::max();
        for (std::size_t l = 0; l < seed.num_frames(); ++l)
          if (seed.active(j, l)) least = std::min(least, seed.active_count(l));
        for (std::size_t l = 0; l < seed.num_frames(); ++l)
          if (seed.active(j, l) && seed.active_count(l) == least) support.push_back(l);
      }
      if (support.empty())
        throw NoDominantFrames(j, "speaker " + std::to_string(j) + " is never active in the seed");
      log_warning("speaker " + std::to_string(j) + " has no solo frames; template from " +
                  std::to_string(support.size()) + " fallback frame(s)");
    }
    out.push_back(speaker_template_from_support(field, support));
  }
  return out;
}

SciResult sci_lt_pipeline(const WrtfField& field, const BinaryActivity& seed,
                          const SciOptions& options, const GlobalActivity* seed_global) {
  if (seed.num_speakers() < 1) throw ValidationError("seed activity has no speakers");
  const StftParams& params = field.params();
  SciResult out;
  out.templates = seed_templates(field, seed, seed_global);

  const auto local_bins = band_bins(params, options.local_lo_hz,
                                    options.local_hi_hz.value_or(params.sample_rate / 2.0));
  const auto band = band_bins(params, options.band_lo_hz, options.band_hi_hz);
  if (local_bins.empty() || band.empty()) throw ValidationError("empty frequency band");
  if (band.front() < local_bins.front() || band.back() > local_bins.back())
    throw ValidationError("global-activity band must lie inside the local-activity range");

  out.local = local_activity(field, out.templates, local_bins.front(), local_bins.back());
  const Eigen::MatrixXd unrect = global_activity_unrectified(out.local, band);
  if (options.rectify) {
    out.global = rectify_global_activity(unrect, options.max_condition);
  } else {
    out.global.unrectified = unrect;
    out.global.rectified = unrect;
    out.global.transform = Eigen::MatrixXd::Identity(unrect.rows(), unrect.rows());
    for (Index j = 0; j < unrect.rows(); ++j) {
      Index best = 0;
      for (Index l = 1; l < unrect.cols(); ++l)
        if (unrect(j, l) > unrect(j, best)) best = l;
      out.global.vertex_frames.push_back(static_cast<std::size_t>(best));
    }
  }
  out.binary = binarize_activity(out.global, options.threshold);
  return out;
}

}  // namespace spatialdiar
