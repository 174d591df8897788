#include "dbsloc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dbsloc/error.hpp"
#include "text_format.hpp"

namespace dbs {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// One outlier pass: fit, then keep points within max(min_residual, factor * median).
std::vector<Point3> reject_outliers(const std::vector<Point3>& pts, const OutlierRule& rule) {
  if (pts.size() < 3) return pts;
  const LineFit line = fit_line(pts);
  std::vector<double> res(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) res[i] = distance_to_line(line, pts[i]);
  const double limit = std::max(rule.min_residual_mm, rule.median_factor * median_of(res));
  std::vector<Point3> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (res[i] <= limit) kept.push_back(pts[i]);
  }
  return kept;
}

}  // namespace

void Trajectory::validate() const {
  if (points.size() < 2) throw Error(ErrorKind::InvalidArgument, "trajectory needs at least two points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].z() > points[i - 1].z())) {
      throw Error(ErrorKind::InvalidArgument, "trajectory points must be strictly ascending in z");
    }
  }
}

double Trajectory::arc_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) len += (points[i] - points[i - 1]).norm();
  return len;
}

Trajectory build_trajectory(std::span<const CentroidSet> sets, ElectrodeLabel label, const BuildOptions& options) {
  std::vector<Point3> pts;
  for (const auto& s : sets) {
    const Centroid* best = nullptr;
    for (const auto& c : s.centroids) {
      if (c.label != label) continue;
      if (best == nullptr || c.area_voxels > best->area_voxels) best = &c;
    }
    if (best != nullptr) pts.push_back(best->position);
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) { return a.z() < b.z(); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) { return a.z() == b.z(); }),
            pts.end());

  if (pts.size() >= 2) {
    const bool distinct = std::any_of(pts.begin(), pts.end(), [&](const Point3& p) { return p != pts.front(); });
    if (distinct) {
      pts = reject_outliers(pts, options.outliers);
      if (pts.size() >= 2) pts = reject_outliers(pts, options.outliers);
    }
  }
  if (pts.size() < 2) {
    throw Error(ErrorKind::TrajectoryNotFound,
                "trajectory not found for " + std::string(to_string(label)) + " electrode");
  }

  double spacing = options.native_spacing;
  if (spacing <= 0.0) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < pts.size(); ++i) gaps.push_back(pts[i].z() - pts[i - 1].z());
    spacing = median_of(gaps);
  }
  Trajectory t{label, std::move(pts), spacing, options.source_k};
  t.validate();
  return t;
}

TrajectoryExtent extent(const Trajectory& t) {
  t.validate();
  const double start = t.points.front().z();
  const double end = t.points.back().z();
  return {start, end, end - start};
}

Trajectory resample_trajectory(const Trajectory& t, double spacing) {
  t.validate();
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "resampling spacing must be positive");
  const auto& p = t.points;
  std::vector<double> cum(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i) cum[i] = cum[i - 1] + (p[i] - p[i - 1]).norm();
  const double total = cum.back();

  Trajectory out{t.label, {p.front()}, spacing, t.source_k};
  std::size_t seg = 0;
  for (std::size_t n = 1;; ++n) {
    const double s = static_cast<double>(n) * spacing;
    if (s >= total) break;
    while (seg + 1 < p.size() - 1 && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    const Point3 q = p[seg] + f * (p[seg + 1] - p[seg]);
    if (!(q.z() > out.points.back().z()) || !(q.z() < p.back().z())) continue;
    out.points.push_back(q);
  }
  out.points.push_back(p.back());
  return out;
}

std::optional<Point3> point_at_axial(const Trajectory& t, double z) {
  const auto& p = t.points;
  if (p.empty() || z < p.front().z() || z > p.back().z()) return std::nullopt;
  if (p.size() == 1) return p.front();
  const auto it = std::lower_bound(p.begin(), p.end(), z, [](const Point3& a, double v) { return a.z() < v; });
  if (it == p.begin()) return p.front();
  if (it->z() == z) return *it;
  const Point3& b = *it;
  const Point3& a = *(it - 1);
  const double f = (z - a.z()) / (b.z() - a.z());
  return a + f * (b - a);
}

LineFit fit_line(std::span<const Point3> points) {
  if (points.size() < 2) throw Error(ErrorKind::InvalidArgument, "line fit needs at least two points");
  Point3 c = Point3::Zero();
  for (const auto& q : points) c += q;
  c /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double spread = 0.0;
  for (const auto& q : points) {
    const Vector3 d = q - c;
    cov += d * d.transpose();
    spread = std::max(spread, d.norm());
  }
  if (spread < 1e-12) throw Error(ErrorKind::InvalidArgument, "cannot fit a line to coincident points");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Vector3 dir = eig.eigenvectors().col(2).normalized();
  if (dir.z() < 0.0 || (dir.z() == 0.0 && (dir.y() < 0.0 || (dir.y() == 0.0 && dir.x() < 0.0)))) dir = -dir;
  LineFit fit{c, dir, 0.0};
  double ss = 0.0;
  for (const auto& q : points) {
    const double d = distance_to_line(fit, q);
    ss += d * d;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

double distance_to_line(const LineFit& line, const Point3& p) {
  const Vector3 d = p - line.point;
  return (d - d.dot(line.direction) * line.direction).norm();
}

void write_trajectory_csv(std::span<const Trajectory> trajectories, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write trajectory file " + path.string());
  out << "label,point_index,x_mm,y_mm,z_mm\n";
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const auto& q = t.points[i];
      out << to_string(t.label) << ',' << i << ',' << detail::fixed6(q.x()) << ',' << detail::fixed6(q.y()) << ','
          << detail::fixed6(q.z()) << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open trajectory file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label,point_index,x_mm,y_mm,z_mm", 0) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": expected header label,point_index,x_mm,y_mm,z_mm");
  }
  std::map<ElectrodeLabel, Trajectory> by_label;
  std::vector<ElectrodeLabel> order;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string label_s, idx_s, x_s, y_s, z_s;
    std::getline(ss, label_s, ',');
    std::getline(ss, idx_s, ',');
    std::getline(ss, x_s, ',');
    std::getline(ss, y_s, ',');
    std::getline(ss, z_s, ',');
    const auto label = parse_label(label_s);
    Point3 q;
    try {
      std::size_t used = 0;
      q = Point3(std::stod(x_s, &used), std::stod(y_s), std::stod(z_s));
      (void)std::stoll(idx_s);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (!label) throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad label");
    auto [it, inserted] = by_label.try_emplace(*label);
    if (inserted) {
      it->second.label = *label;
      order.push_back(*label);
    }
    it->second.points.push_back(q);
  }
  std::vector<Trajectory> out;
  for (auto l : order) {
    auto& t = by_label[l];
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json j;
  j["label"] = std::string(to_string(t.label));
  j["native_spacing_mm"] = t.native_spacing;
  j["source_k"] = t.source_k;
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& q : t.points) pts.push_back({q.x(), q.y(), q.z()});
  return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  try {
    Trajectory t;
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorKind::Format, "trajectory JSON has an unknown label");
    t.label = *label;
    t.native_spacing = j.at("native_spacing_mm").get<double>();
    t.source_k = j.at("source_k").get<double>();
    for (const auto& q : j.at("points")) {
      t.points.emplace_back(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>());
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed trajectory JSON: ") + e.what());
  }
}

void write_trajectories_json(std::span<const Trajectory> trajectories, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema"] = 1;
  auto& arr = j["trajectories"] = nlohmann::json::array();
  for (const auto& t : trajectories) arr.push_back(to_json(t));
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write trajectory file " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<Trajectory> read_trajectories_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open trajectory file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("schema", 0) != 1 || !j.contains("trajectories")) {
    throw Error(ErrorKind::Format, path.string() + ": expected {\"schema\":1,\"trajectories\":[...]}");
  }
  std::vector<Trajectory> out;
  for (const auto& t : j["trajectories"]) out.push_back(trajectory_from_json(t));
  return out;
}

}  // namespace dbs
