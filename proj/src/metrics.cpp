#include "spatialdiar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <functional>
#include <limits>
#include <sstream>

#include "spatialdiar/errors.hpp"
#include "spatialdiar/json_fields.hpp"

namespace spatialdiar {

double DerComponents::der() const {
  if (total == 0) return 0.0;
  return static_cast<double>(false_alarm + missed + confusion) / static_cast<double>(total);
}

namespace {

std::vector<bool> collar_mask(const BinaryActivity& ref, std::size_t collar) {
  const std::size_t L = ref.num_frames();
  std::vector<bool> skip(L, false);
  if (collar == 0) return skip;
  for (std::size_t j = 0; j < ref.num_speakers(); ++j)
    for (std::size_t l = 1; l < L; ++l)
      if (ref.active(j, l) != ref.active(j, l - 1)) {
        // change point between l-1 and l
        const std::size_t lo = l >= collar ? l - collar : 0;
        const std::size_t hi = std::min(L, l + collar);
        for (std::size_t k = lo; k < hi; ++k) skip[k] = true;
      }
  return skip;
}

}  // namespace

DerComponents der_components(const BinaryActivity& est, const BinaryActivity& ref,
                             const SpeakerMapping& mapping, std::size_t collar) {
  if (est.num_frames() != ref.num_frames())
    throw ValidationError("der: estimate has " + std::to_string(est.num_frames()) +
                          " frames, reference has " + std::to_string(ref.num_frames()));
  if (mapping.size() != est.num_speakers())
    throw ValidationError("der: mapping size does not match estimated speakers");
  const auto skip = collar_mask(ref, collar);
  DerComponents c;
  for (std::size_t l = 0; l < ref.num_frames(); ++l) {
    if (skip[l]) continue;
    ++c.total;
    const std::size_t n_ref = ref.active_count(l);
    const std::size_t n_sys = est.active_count(l);
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < mapping.size(); ++i)
      if (mapping[i] >= 0 && est.active(i, l) &&
          ref.active(static_cast<std::size_t>(mapping[i]), l))
        ++n_correct;
    if (n_ref > n_sys) c.missed += n_ref - n_sys;
    if (n_sys > n_ref) c.false_alarm += n_sys - n_ref;
    c.confusion += std::min(n_ref, n_sys) - n_correct;
  }
  return c;
}

namespace {

// Enumerates est->ref assignments with exactly min(Je, Jr) matched speakers in
// lexicographic order (-1 sorts first).
void enumerate(std::size_t i, std::size_t je, std::size_t jr, std::size_t need,
               std::size_t matched, std::vector<bool>& used, SpeakerMapping& cur,
               const std::function<void(const SpeakerMapping&)>& visit) {
  if (i == je) {
    if (matched == need) visit(cur);
    return;
  }
  if (need - matched < je - i) {
    cur[i] = -1;
    enumerate(i + 1, je, jr, need, matched, used, cur, visit);
  }
  for (std::size_t r = 0; r < jr; ++r) {
    if (used[r]) continue;
    used[r] = true;
    cur[i] = static_cast<int>(r);
    enumerate(i + 1, je, jr, need, matched + 1, used, cur, visit);
    used[r] = false;
  }
}

}  // namespace

SpeakerMapping align_permutation(const BinaryActivity& est, const BinaryActivity& ref,
                                 std::size_t collar) {
  const std::size_t je = est.num_speakers(), jr = ref.num_speakers();
  if (je > 8 || jr > 8) throw ValidationError("align_permutation: too many speakers");
  SpeakerMapping best, cur(je, -1);
  std::size_t best_err = std::numeric_limits<std::size_t>::max();
  std::vector<bool> used(jr, false);
  enumerate(0, je, jr, std::min(je, jr), 0, used, cur, [&](const SpeakerMapping& m) {
    const std::size_t e = der_components(est, ref, m, collar).errors();
    if (e < best_err) {
      best_err = e;
      best = m;
    }
  });
  return best;
}

DerResult der(const BinaryActivity& est, const BinaryActivity& ref, std::size_t collar) {
  if (est.num_frames() != ref.num_frames())
    throw ValidationError("der: estimate has " + std::to_string(est.num_frames()) +
                          " frames, reference has " + std::to_string(ref.num_frames()));
  DerResult r;
  r.mapping = align_permutation(est, ref, collar);
  r.components = der_components(est, ref, r.mapping, collar);
  return r;
}

double counting_f1(const std::vector<std::size_t>& estimates,
                   const std::vector<std::size_t>& refs) {
  if (refs.empty()) throw ValidationError("counting_f1: empty input");
  if (estimates.size() != refs.size())
    throw ValidationError("counting_f1: estimate and reference lists differ in length");
  const std::set<std::size_t> classes(refs.begin(), refs.end());
  double sum = 0.0;
  for (std::size_t c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const bool e = estimates[i] == c, r = refs[i] == c;
      tp += e && r;
      fp += e && !r;
      fn += !e && r;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    sum += denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  return sum / static_cast<double>(classes.size());
}

double si_sdr(std::span<const double> ref, std::span<const double> est) {
  if (ref.size() != est.size())
    throw ValidationError("si_sdr: lengths differ (" + std::to_string(ref.size()) + " vs " +
                          std::to_string(est.size()) + ")");
  double rr = 0.0, re = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    rr += ref[n] * ref[n];
    re += ref[n] * est[n];
  }
  if (!(rr > 0.0)) throw ValidationError("si_sdr: silent reference");
  const double a = re / rr;
  double target = 0.0, resid = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    const double t = a * ref[n];
    const double e = est[n] - t;
    target += t * t;
    resid += e * e;
  }
  if (!(target > 0.0)) return -kSiSdrCapDb;
  if (!(resid > 0.0)) return kSiSdrCapDb;
  return std::clamp(10.0 * std::log10(target / resid), -kSiSdrCapDb, kSiSdrCapDb);
}

double si_sdr(const WaveBuffer& ref, const WaveBuffer& est) {
  if (ref.num_channels() != 1 || est.num_channels() != 1)
    throw ValidationError("si_sdr: expects mono buffers");
  return si_sdr(ref.channel(0), est.channel(0));
}

std::optional<double> MetricsReport::mean_si_sdr_improvement() const {
  if (si_sdr_db.empty() || si_sdr_db.size() != si_sdr_mixture_db.size()) return std::nullopt;
  double s = 0.0;
  for (std::size_t j = 0; j < si_sdr_db.size(); ++j) s += si_sdr_db[j] - si_sdr_mixture_db[j];
  return s / static_cast<double>(si_sdr_db.size());
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["clip_id"] = r.clip_id;
  j["num_speakers_ref"] = r.num_speakers_ref;
  j["num_speakers_est"] = r.num_speakers_est;
  if (r.diarization) {
    const auto& c = r.diarization->components;
    j["der"] = r.diarization->der();
    j["der_components"] = {{"false_alarm", c.false_alarm},
                           {"missed", c.missed},
                           {"confusion", c.confusion},
                           {"total", c.total}};
    j["permutation"] = r.diarization->mapping;
  }
  if (r.counting_f1) j["counting_f1"] = *r.counting_f1;
  if (!r.si_sdr_db.empty()) {
    j["si_sdr_db"] = r.si_sdr_db;
    j["si_sdr_mixture_db"] = r.si_sdr_mixture_db;
    j["separation_mapping"] = r.separation_mapping;
    if (auto imp = r.mean_si_sdr_improvement()) j["si_sdr_improvement_db"] = *imp;
    j["separation_metric_note"] =
        "SI-SDR is reported in place of PESQ and WER, which are not implemented";
  }
  return j;
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.clip_id = json_fields::field_or<std::string>(j, "clip_id", "", std::string{});
  r.num_speakers_ref = json_fields::field_or<std::size_t>(j, "num_speakers_ref", "", 0);
  r.num_speakers_est = json_fields::field_or<std::size_t>(j, "num_speakers_est", "", 0);
  if (j.contains("der_components")) {
    DerResult d;
    const auto& c = j.at("der_components");
    d.components.false_alarm = c.at("false_alarm").get<std::size_t>();
    d.components.missed = c.at("missed").get<std::size_t>();
    d.components.confusion = c.at("confusion").get<std::size_t>();
    d.components.total = c.at("total").get<std::size_t>();
    d.mapping = j.at("permutation").get<SpeakerMapping>();
    r.diarization = d;
  }
  if (j.contains("counting_f1")) r.counting_f1 = j.at("counting_f1").get<double>();
  if (j.contains("si_sdr_db")) {
    r.si_sdr_db = j.at("si_sdr_db").get<std::vector<double>>();
    r.si_sdr_mixture_db = j.at("si_sdr_mixture_db").get<std::vector<double>>();
    r.separation_mapping = j.at("separation_mapping").get<std::vector<int>>();
  }
  return r;
}

void write_batch_csv(const std::filesystem::path& path, std::vector<MetricsReport> reports,
                     const std::vector<nlohmann::json>& scene_params) {
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return reports[a].clip_id < reports[b].clip_id;
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(10);
  out << "clip_id,t60,overlap_ratio,snr_db,j_ref,j_est,der,false_alarm,missed,confusion,"
         "total,si_sdr_mean,si_sdr_min,si_sdr_max,si_sdr_improvement\n";
  auto param = [&](std::size_t i, const char* key) -> std::string {
    if (i >= scene_params.size() || !scene_params[i].contains(key) ||
        scene_params[i].at(key).is_null())
      return "";
    std::ostringstream os;
    os << std::setprecision(10) << scene_params[i].at(key).get<double>();
    return os.str();
  };
  for (std::size_t i : order) {
    const auto& r = reports[i];
    out << r.clip_id << ',' << param(i, "t60") << ',' << param(i, "overlap_ratio") << ','
        << param(i, "snr_db") << ',' << r.num_speakers_ref << ',' << r.num_speakers_est << ',';
    if (r.diarization) {
      const auto& c = r.diarization->components;
      out << r.diarization->der() << ',' << c.false_alarm << ',' << c.missed << ','
          << c.confusion << ',' << c.total << ',';
    } else {
      out << ",,,,,";
    }
    if (!r.si_sdr_db.empty()) {
      const auto [mn, mx] = std::minmax_element(r.si_sdr_db.begin(), r.si_sdr_db.end());
      const double mean = std::accumulate(r.si_sdr_db.begin(), r.si_sdr_db.end(), 0.0) /
                          static_cast<double>(r.si_sdr_db.size());
      out << mean << ',' << *mn << ',' << *mx << ',';
      if (auto imp = r.mean_si_sdr_improvement()) out << *imp;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spatialdiar
