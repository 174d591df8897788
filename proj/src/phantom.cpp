#include "dbsloc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "dbsloc/error.hpp"
#include "dbsloc/reference.hpp"
#include "dbsloc/sampling.hpp"

namespace dbs {

namespace {

constexpr double kMeanTipZ = -24.429;
constexpr double kMeanLeadLength = 73.786;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double segment_distance(const Point3& p, const Point3& a, const Point3& b) {
  const Vector3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double ellipsoid_level(const Point3& p, const Point3& c, const Vector3& r) {
  return ((p - c).array() / r.array()).square().sum();
}

Point3 point_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
nlohmann::json point_json(const Vector3& p) { return nlohmann::json::array({p.x(), p.y(), p.z()}); }

}  // namespace

std::vector<ElectrodeSpec> default_electrodes() {
  const double tip_z = kMeanTipZ;
  const double entry_z = kMeanTipZ + kMeanLeadLength;
  ElectrodeSpec left{Point3(-12.0, -8.0, tip_z), Point3(-28.0, 20.0, entry_z), 0.8, 3000.0f, ElectrodeLabel::Left};
  ElectrodeSpec right = left;
  right.tip.x() = -left.tip.x();
  right.entry.x() = -left.entry.x();
  right.label = ElectrodeLabel::Right;
  return {left, right};
}

GridSpec PhantomSpec::grid() const { return GridSpec::centered(dims, {spacing, spacing, spacing}); }

ElectrodeLabel PhantomSpec::label_of(std::size_t e) const {
  const auto& el = electrodes.at(e);
  if (el.label != ElectrodeLabel::Unassigned) return el.label;
  return el.tip.x() < 0.0 ? ElectrodeLabel::Left : ElectrodeLabel::Right;
}

void PhantomSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, "phantom: " + msg); };
  if (!(spacing > 0.0)) fail("spacing must be positive");
  for (auto d : dims)
    if (d <= 0) fail("dims must be positive");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
  if (supersample < 1 || supersample > 8) fail("supersample must be in [1, 8]");
  if (!(skull.thickness > 0.0) || (skull.radii.array() <= skull.thickness).any()) {
    fail("skull radii must exceed a positive thickness");
  }
  if (!(skull.intensity > brain_intensity && brain_intensity > background)) {
    fail("intensities must satisfy skull > brain > background");
  }
  const GridSpec g = grid();
  const Point3 lo = g.world(0, 0, 0);
  const Point3 hi = g.world(static_cast<double>(dims[0] - 1), static_cast<double>(dims[1] - 1),
                            static_cast<double>(dims[2] - 1));
  auto inside_grid = [&](const Point3& p) { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); };
  const Vector3 inner = skull.radii.array() - skull.thickness;
  std::set<ElectrodeLabel> labels;
  for (std::size_t e = 0; e < electrodes.size(); ++e) {
    const auto& el = electrodes[e];
    if (!(el.intensity > skull.intensity)) fail("electrode intensity must exceed skull intensity");
    if (!(el.radius > 0.0)) fail("electrode radius must be positive");
    if (!inside_grid(el.tip) || !inside_grid(el.entry)) {
      throw Error(ErrorKind::InvalidArgument, "phantom: electrode " + std::to_string(e) + " lies outside the volume");
    }
    if (!(el.entry.z() > el.tip.z())) fail("electrode entry must be superior to its tip");
    if (ellipsoid_level(el.tip, skull.center, inner) > 1.0) fail("electrode tip must lie inside the skull");
    if (!labels.insert(label_of(e)).second) fail("electrode labels must be distinct");
  }
}

float phantom_tissue(const PhantomSpec& spec, const Point3& p) {
  for (const auto& el : spec.electrodes) {
    if (segment_distance(p, el.tip, el.entry) <= el.radius) return el.intensity;
  }
  const auto& s = spec.skull;
  if (ellipsoid_level(p, s.center, s.radii) > 1.0) return spec.background;
  const Vector3 inner = s.radii.array() - s.thickness;
  return ellipsoid_level(p, s.center, inner) > 1.0 ? s.intensity : spec.brain_intensity;
}

double phantom_noise(std::uint64_t seed, std::uint64_t voxel_index) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(voxel_index));
  const std::uint64_t h1 = splitmix64(key);
  const std::uint64_t h2 = splitmix64(key ^ 0xd1b54a32d192ed03ULL);
  const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;         // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

float voxel_value(const PhantomSpec& spec, const GridSpec& g, std::int64_t i, std::int64_t j, std::int64_t k,
                  std::size_t idx) {
  double v;
  if (spec.supersample == 1) {
    v = phantom_tissue(spec, g.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
  } else {
    const int s = spec.supersample;
    double acc = 0.0;
    for (int c = 0; c < s; ++c)
      for (int b = 0; b < s; ++b)
        for (int a = 0; a < s; ++a) {
          const double di = (a + 0.5) / s - 0.5, dj = (b + 0.5) / s - 0.5, dk = (c + 0.5) / s - 0.5;
          acc += phantom_tissue(spec, g.world(static_cast<double>(i) + di, static_cast<double>(j) + dj,
                                              static_cast<double>(k) + dk));
        }
    v = acc / (s * s * s);
  }
  if (spec.noise_sigma > 0.0) v += spec.noise_sigma * phantom_noise(spec.seed, idx);
  if (spec.integer_hu) v = std::nearbyint(v);
  return static_cast<float>(v);
}

}  // namespace

GroundTruth phantom_ground_truth(const PhantomSpec& spec) {
  const GridSpec g = spec.grid();
  GroundTruth gt;
  for (std::size_t e = 0; e < spec.electrodes.size(); ++e) {
    const auto& el = spec.electrodes[e];
    for (std::int64_t k = 0; k < g.dims[2]; ++k) {
      const double z = g.world(0, 0, static_cast<double>(k)).z();
      if (z < el.tip.z() || z > el.entry.z()) continue;
      const double t = (z - el.tip.z()) / (el.entry.z() - el.tip.z());
      Point3 p = el.tip + t * (el.entry - el.tip);
      p.z() = z;
      gt.entries.push_back({k, spec.label_of(e), p});
    }
  }
  std::stable_sort(gt.entries.begin(), gt.entries.end(), [](const GroundTruthEntry& a, const GroundTruthEntry& b) {
    return a.slice_index != b.slice_index ? a.slice_index < b.slice_index : a.label < b.label;
  });
  return gt;
}

Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  const GridSpec g = spec.grid();
  std::vector<float> data(g.voxel_count());
  const auto& d = g.dims;

#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      std::size_t idx = g.index(0, j, k);
      for (std::int64_t i = 0; i < d[0]; ++i, ++idx) data[idx] = voxel_value(spec, g, i, j, k, idx);
    }
  }
  return {Volume(g, std::move(data)), phantom_ground_truth(spec)};
}

namespace reference {
Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const GridSpec g = spec.grid();
  std::vector<float> data(g.voxel_count());
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const auto [i, j, k] = g.ijk(idx);
    data[idx] = voxel_value(spec, g, i, j, k, idx);
  }
  return {Volume(g, std::move(data)), phantom_ground_truth(spec)};
}
}  // namespace reference

Perturbed perturb(const Volume& v, const RigidPerturbation& rigid) {
  const Vector3 rad = rigid.rotation_deg * (std::numbers::pi / 180.0);
  const Eigen::AngleAxisd aa(euler_to_matrix(rad));
  if (aa.angle() > 30.0 * std::numbers::pi / 180.0 + 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "perturbation rotation exceeds 30 degrees");
  }
  const AffineTransform t = AffineTransform::rigid(rad, rigid.translation_mm, v.grid().center_world());
  return {resample(v, t, v.grid(), Interpolation::Trilinear, kAirHu), t};
}

nlohmann::json to_json(const PhantomSpec& spec) {
  nlohmann::json j;
  j["schema"] = 1;
  j["dims"] = spec.dims;
  j["spacing"] = spec.spacing;
  j["skull"] = {{"center", point_json(spec.skull.center)},
                {"radii", point_json(spec.skull.radii)},
                {"thickness", spec.skull.thickness},
                {"intensity", spec.skull.intensity}};
  j["brain_intensity"] = spec.brain_intensity;
  j["background"] = spec.background;
  auto& els = j["electrodes"] = nlohmann::json::array();
  for (const auto& e : spec.electrodes) {
    els.push_back({{"tip", point_json(e.tip)},
                   {"entry", point_json(e.entry)},
                   {"radius", e.radius},
                   {"intensity", e.intensity},
                   {"label", std::string(to_string(e.label))}});
  }
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  j["supersample"] = spec.supersample;
  j["integer_hu"] = spec.integer_hu;
  return j;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", 0) != 1) throw Error(ErrorKind::Format, "phantom spec needs \"schema\": 1");
    PhantomSpec s;
    if (j.contains("dims")) s.dims = j["dims"].get<Dims>();
    s.spacing = j.value("spacing", s.spacing);
    if (j.contains("skull")) {
      const auto& k = j["skull"];
      if (k.contains("center")) s.skull.center = point_from(k["center"]);
      if (k.contains("radii")) s.skull.radii = point_from(k["radii"]);
      s.skull.thickness = k.value("thickness", s.skull.thickness);
      s.skull.intensity = k.value("intensity", s.skull.intensity);
    }
    s.brain_intensity = j.value("brain_intensity", s.brain_intensity);
    s.background = j.value("background", s.background);
    if (j.contains("electrodes")) {
      s.electrodes.clear();
      for (const auto& e : j["electrodes"]) {
        ElectrodeSpec el;
        el.tip = point_from(e.at("tip"));
        el.entry = point_from(e.at("entry"));
        el.radius = e.value("radius", el.radius);
        el.intensity = e.value("intensity", el.intensity);
        const auto label = parse_label(e.value("label", std::string("unassigned")));
        if (!label) throw Error(ErrorKind::Format, "phantom electrode has an unknown label");
        el.label = *label;
        s.electrodes.push_back(el);
      }
    }
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.supersample = j.value("supersample", s.supersample);
    s.integer_hu = j.value("integer_hu", s.integer_hu);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed phantom spec: ") + e.what());
  }
}

PhantomSpec read_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open phantom spec " + path.string());
  try {
    return phantom_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

}  // namespace dbs
