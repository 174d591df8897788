#include "dbsloc/atlas.hpp"

#include <algorithm>
#include <fstream>

#include "dbsloc/error.hpp"
#include "dbsloc/sampling.hpp"

namespace dbs {

namespace {

void check_range(const Range& r, const char* what) {
  if (!(r.lo < r.hi)) throw Error(ErrorKind::InvalidArgument, std::string("atlas ") + what + " range must have lo < hi");
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorKind::Format, std::string("atlas field ") + what + " must be [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void AtlasBoxStack::validate() const {
  check_range(sagittal, "sagittal");
  if (segments.empty()) throw Error(ErrorKind::InvalidArgument, "atlas needs at least one segment");
  for (std::size_t s = 0; s < segments.size(); ++s) {
    check_range(segments[s].axial, "axial");
    check_range(segments[s].coronal, "coronal");
    if (s > 0 && !(segments[s - 1].axial.hi < segments[s].axial.lo)) {
      throw Error(ErrorKind::InvalidArgument, "atlas axial segments must be disjoint and ordered caudal to cranial");
    }
  }
}

bool AtlasBoxStack::contains(const Point3& p) const {
  if (!sagittal.contains(p.x())) return false;
  return std::any_of(segments.begin(), segments.end(),
                     [&](const AtlasSegment& s) { return s.axial.contains(p.z()) && s.coronal.contains(p.y()); });
}

AtlasBoxStack default_atlas() {
  return {
      .sagittal = {-40.0, 40.0},
      .segments =
          {
              {.axial = {-49.0, -39.5}, .coronal = {-30.0, 3.0}},
              {.axial = {-39.0, 1.5}, .coronal = {-30.0, 22.0}},
              {.axial = {2.0, 31.0}, .coronal = {-30.0, 32.0}},
          },
  };
}

nlohmann::json to_json(const AtlasBoxStack& atlas) {
  nlohmann::json j;
  j["schema"] = 1;
  j["sagittal"] = range_json(atlas.sagittal);
  auto& segs = j["segments"] = nlohmann::json::array();
  for (const auto& s : atlas.segments) {
    segs.push_back({{"axial", range_json(s.axial)}, {"coronal", range_json(s.coronal)}});
  }
  return j;
}

AtlasBoxStack atlas_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema", 0) != 1) {
    throw Error(ErrorKind::Format, "atlas JSON must be an object with \"schema\": 1");
  }
  if (!j.contains("sagittal") || !j.contains("segments") || !j["segments"].is_array()) {
    throw Error(ErrorKind::Format, "atlas JSON needs \"sagittal\" and \"segments\"");
  }
  AtlasBoxStack a;
  a.sagittal = range_from(j["sagittal"], "sagittal");
  for (const auto& s : j["segments"]) {
    if (!s.is_object() || !s.contains("axial") || !s.contains("coronal")) {
      throw Error(ErrorKind::Format, "atlas segment needs \"axial\" and \"coronal\"");
    }
    a.segments.push_back({range_from(s["axial"], "axial"), range_from(s["coronal"], "coronal")});
  }
  a.validate();
  return a;
}

AtlasBoxStack read_atlas_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open atlas file " + path.string());
  try {
    return atlas_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_atlas_json(const AtlasBoxStack& atlas, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write atlas file " + path.string());
  out << to_json(atlas).dump(2) << '\n';
}

RoiMask::RoiMask(Volume mask) : mask_(std::move(mask)) {
  for (float v : mask_.data()) {
    if (v == 1.0f) {
      ++count_;
    } else if (v != 0.0f) {
      throw Error(ErrorKind::InvalidArgument, "ROI mask values must be 0 or 1");
    }
  }
  if (count_ == 0) throw Error(ErrorKind::EmptyRoi, "empty ROI");
}

RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid) {
  atlas.validate();
  grid.validate();
  const auto& d = grid.dims;
  std::vector<float> out(grid.voxel_count(), 0.0f);

#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      std::size_t idx = grid.index(0, j, k);
      for (std::int64_t i = 0; i < d[0]; ++i, ++idx) {
        const Point3 p = grid.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
        out[idx] = atlas.contains(p) ? 1.0f : 0.0f;
      }
    }
  }
  return RoiMask(Volume(grid, std::move(out)));
}

RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid, const AffineTransform& grid_to_atlas) {
  if (!grid_to_atlas.is_invertible()) throw Error(ErrorKind::SingularTransform, "atlas transform is singular");
  GridSpec in_atlas = grid;
  in_atlas.voxel_to_world = compose(grid_to_atlas, grid.voxel_to_world);
  const RoiMask warped = rasterize_atlas(atlas, in_atlas);
  const auto data = warped.volume().data();
  return RoiMask(Volume(grid, std::vector<float>(data.begin(), data.end())));
}

MaskedVolume apply_roi(const Volume& y, const RoiMask& z) {
  if (!y.grid().same_geometry(z.grid(), 1e-6)) {
    throw Error(ErrorKind::GridMismatch, "ROI mask grid does not match the CT grid");
  }
  MaskedVolume out{y, std::vector<std::uint8_t>(y.size())};
  const auto mask = z.volume().data();
  for (std::size_t i = 0; i < mask.size(); ++i) out.included[i] = mask[i] != 0.0f ? 1 : 0;
  return out;
}

RoiMask warp_mask(const RoiMask& z, const AffineTransform& t, const GridSpec& target_grid) {
  return RoiMask(resample(z.volume(), t, target_grid, Interpolation::Nearest, 0.0f));
}

}  // namespace dbs
