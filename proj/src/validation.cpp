#include "dbsloc/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "dbsloc/error.hpp"
#include "text_format.hpp"

namespace dbs {

namespace {

double infer_spacing(const std::vector<GroundTruthEntry>& entries) {
  std::vector<double> z;
  for (const auto& e : entries) z.push_back(e.position.z());
  std::sort(z.begin(), z.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[i - 1]) gaps.push_back(z[i] - z[i - 1]);
  }
  if (gaps.empty()) return 1.0;
  std::sort(gaps.begin(), gaps.end());
  return gaps[gaps.size() / 2];
}

double spacing_for(const std::vector<GroundTruthEntry>& entries, const MatchOptions& options) {
  return options.slice_spacing_mm > 0.0 ? options.slice_spacing_mm : infer_spacing(entries);
}

}  // namespace

void GroundTruth::validate() const {
  std::set<std::pair<std::int64_t, ElectrodeLabel>> seen;
  for (const auto& e : entries) {
    if (!seen.insert({e.slice_index, e.label}).second) {
      throw Error(ErrorKind::GroundTruth, "duplicate ground-truth entry for slice " + std::to_string(e.slice_index) +
                                              " (" + std::string(to_string(e.label)) + ")");
    }
  }
}

std::vector<GroundTruthEntry> GroundTruth::for_label(ElectrodeLabel label) const {
  std::vector<GroundTruthEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const GroundTruthEntry& e) { return e.label == label; });
  return out;
}

std::vector<ElectrodeLabel> GroundTruth::labels() const {
  std::vector<ElectrodeLabel> out;
  for (auto l : {ElectrodeLabel::Left, ElectrodeLabel::Right}) {
    if (std::any_of(entries.begin(), entries.end(), [&](const GroundTruthEntry& e) { return e.label == l; })) {
      out.push_back(l);
    }
  }
  return out;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open ground-truth file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::GroundTruth, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "slice_index,label,x_mm,y_mm,z_mm") {
    throw Error(ErrorKind::GroundTruth, path.string() + ":1: expected header slice_index,label,x_mm,y_mm,z_mm");
  }
  GroundTruth gt;
  std::set<std::pair<std::int64_t, ElectrodeLabel>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw Error(ErrorKind::GroundTruth, where + ": expected 5 fields");
    GroundTruthEntry e;
    try {
      std::size_t used = 0;
      e.slice_index = std::stoll(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("slice");
      double xyz[3];
      for (int a = 0; a < 3; ++a) {
        xyz[a] = std::stod(fields[static_cast<std::size_t>(2 + a)], &used);
        if (used != fields[static_cast<std::size_t>(2 + a)].size() || !std::isfinite(xyz[a])) {
          throw std::invalid_argument("coord");
        }
      }
      e.position = Point3(xyz[0], xyz[1], xyz[2]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::GroundTruth, where + ": malformed number");
    }
    const auto label = parse_label(fields[1]);
    if (!label || *label == ElectrodeLabel::Unassigned) {
      throw Error(ErrorKind::GroundTruth, where + ": label must be left or right");
    }
    e.label = *label;
    if (!seen.insert({e.slice_index, e.label}).second) {
      throw Error(ErrorKind::GroundTruth, where + ": duplicate entry for slice " + std::to_string(e.slice_index) +
                                              " (" + fields[1] + ")");
    }
    gt.entries.push_back(e);
  }
  return gt;
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write ground-truth file " + path.string());
  out << "slice_index,label,x_mm,y_mm,z_mm\n";
  out.precision(17);
  for (const auto& e : gt.entries) {
    out << e.slice_index << ',' << to_string(e.label) << ',' << e.position.x() << ',' << e.position.y() << ','
        << e.position.z() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

DistanceMatch euclidean_distances(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options) {
  const auto entries = gt.for_label(t.label);
  DistanceMatch out;
  if (entries.empty() || t.points.empty()) {
    for (const auto& e : entries) out.missed.push_back(e.slice_index);
    return out;
  }
  const double tol = 0.5 * spacing_for(entries, options);
  const double z_lo = t.points.front().z();
  const double z_hi = t.points.back().z();
  for (const auto& e : entries) {
    const double z = e.position.z();
    if (z < z_lo - tol || z > z_hi + tol) {
      out.missed.push_back(e.slice_index);
      continue;
    }
    const auto q = point_at_axial(t, std::clamp(z, z_lo, z_hi));
    out.matched.push_back({e.slice_index, (*q - e.position).norm()});
  }
  return out;
}

double mse(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options) {
  const auto m = euclidean_distances(t, gt, options);
  if (m.matched.empty()) throw Error(ErrorKind::GroundTruth, "no ground-truth slice matches the trajectory");
  double ss = 0.0;
  for (const auto& d : m.matched) ss += d.ed_mm * d.ed_mm;
  return ss / static_cast<double>(m.matched.size());
}

std::int64_t spurious_slices(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options) {
  const auto entries = gt.for_label(t.label);
  if (entries.empty() || t.points.empty()) {
    return entries.empty() ? static_cast<std::int64_t>(t.points.size()) : 0;
  }
  const double dz = spacing_for(entries, options);
  const double z0 = entries.front().position.z();
  std::set<std::int64_t> gt_steps;
  for (const auto& e : entries) gt_steps.insert(std::llround((e.position.z() - z0) / dz));
  const auto first = static_cast<std::int64_t>(std::ceil((t.points.front().z() - z0) / dz - 1e-9));
  const auto last = static_cast<std::int64_t>(std::floor((t.points.back().z() - z0) / dz + 1e-9));
  std::int64_t count = 0;
  for (std::int64_t n = first; n <= last; ++n) {
    if (!gt_steps.contains(n)) ++count;
  }
  return count;
}

ElectrodeRun score_trajectory(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options) {
  const auto m = euclidean_distances(t, gt, options);
  return {t.label, m.matched, static_cast<std::int64_t>(m.missed.size()), spurious_slices(t, gt, options)};
}

ValidationReport make_report(std::span<const ElectrodeRun> runs, double k, double runtime_seconds) {
  ValidationReport r;
  r.k_used = k;
  r.runtime_seconds = runtime_seconds;
  for (const auto& run : runs) {
    ElectrodeMetrics m;
    m.label = run.label;
    m.matched_slices = static_cast<std::int64_t>(run.distances.size());
    m.missed_slices = run.missed_slices;
    m.spurious_slices = run.spurious_slices;
    double sum = 0.0, ss = 0.0;
    for (const auto& d : run.distances) {
      sum += d.ed_mm;
      ss += d.ed_mm * d.ed_mm;
      m.max_ed_mm = std::max(m.max_ed_mm, d.ed_mm);
    }
    if (!run.distances.empty()) {
      const double n = static_cast<double>(run.distances.size());
      m.mean_ed_mm = sum / n;
      m.mse_mm = ss / n;
    }
    r.per_electrode.push_back(m);
  }
  return r;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json j;
  j["schema"] = 1;
  j["k_used"] = report.k_used;
  j["runtime_seconds"] = report.runtime_seconds;
  auto& arr = j["per_electrode"] = nlohmann::json::array();
  for (const auto& m : report.per_electrode) {
    arr.push_back({{"label", std::string(to_string(m.label))},
                   {"mean_ed_mm", m.mean_ed_mm},
                   {"max_ed_mm", m.max_ed_mm},
                   {"mse_mm", m.mse_mm},
                   {"matched_slices", m.matched_slices},
                   {"missed_slices", m.missed_slices},
                   {"spurious_slices", m.spurious_slices}});
  }
  return j;
}

ValidationReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<int>() != 1) throw Error(ErrorKind::Format, "unsupported report schema");
    ValidationReport r;
    r.k_used = j.at("k_used").get<double>();
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
    for (const auto& m : j.at("per_electrode")) {
      const auto label = parse_label(m.at("label").get<std::string>());
      if (!label) throw Error(ErrorKind::Format, "report has an unknown electrode label");
      r.per_electrode.push_back({*label, m.at("mean_ed_mm").get<double>(), m.at("max_ed_mm").get<double>(),
                                 m.at("mse_mm").get<double>(), m.at("matched_slices").get<std::int64_t>(),
                                 m.at("missed_slices").get<std::int64_t>(),
                                 m.at("spurious_slices").get<std::int64_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed report JSON: ") + e.what());
  }
}

}  // namespace dbs
