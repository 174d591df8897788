#include "dbsloc/sampling.hpp"

#include <cmath>

#include "dbsloc/error.hpp"

namespace dbs {

namespace {

constexpr double kSnap = 1e-9;

inline double snap(double c) {
  const double r = std::nearbyint(c);
  return std::abs(c - r) < kSnap ? r : c;
}

}  // namespace

VolumeSampler::VolumeSampler(const Volume& v) : v_(&v), world_to_index_(invert(v.voxel_to_world())) {}

float VolumeSampler::trilinear_index(const Point3& c_in, float outside) const {
  const auto& d = v_->dims();
  double c[3];
  std::int64_t i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = snap(c_in[a]);
    if (!(c[a] >= 0.0) || c[a] > static_cast<double>(d[a] - 1)) return outside;
    i0[a] = static_cast<std::int64_t>(std::floor(c[a]));
    if (i0[a] >= d[a] - 1) i0[a] = d[a] - 1;
    f[a] = c[a] - static_cast<double>(i0[a]);
  }
  const auto data = v_->data();
  const std::int64_t sx = 1, sy = d[0], sz = d[0] * d[1];
  const std::int64_t base = i0[0] + sy * i0[1] + sz * i0[2];
  const std::int64_t dx = f[0] > 0.0 ? sx : 0;
  const std::int64_t dy = f[1] > 0.0 ? sy : 0;
  const std::int64_t dz = f[2] > 0.0 ? sz : 0;
  auto at = [&](std::int64_t off) { return static_cast<double>(data[static_cast<std::size_t>(base + off)]); };
  if (dx == 0 && dy == 0 && dz == 0) return data[static_cast<std::size_t>(base)];
  const double c00 = at(0) * (1 - f[0]) + at(dx) * f[0];
  const double c10 = at(dy) * (1 - f[0]) + at(dy + dx) * f[0];
  const double c01 = at(dz) * (1 - f[0]) + at(dz + dx) * f[0];
  const double c11 = at(dz + dy) * (1 - f[0]) + at(dz + dy + dx) * f[0];
  const double c0 = c00 * (1 - f[1]) + c10 * f[1];
  const double c1 = c01 * (1 - f[1]) + c11 * f[1];
  return static_cast<float>(c0 * (1 - f[2]) + c1 * f[2]);
}

float VolumeSampler::nearest_index(const Point3& c, float outside) const {
  const auto& d = v_->dims();
  std::int64_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const double r = std::floor(c[a] + 0.5);
    if (!(r >= 0.0) || r > static_cast<double>(d[a] - 1)) return outside;
    idx[a] = static_cast<std::int64_t>(r);
  }
  return v_->at(idx[0], idx[1], idx[2]);
}

float trilinear_sample(const Volume& v, const Point3& world_point, float outside_value) {
  return VolumeSampler(v).trilinear_world(world_point, outside_value);
}

Volume resample(const Volume& v, const AffineTransform& t, const GridSpec& target, Interpolation interpolation,
                float outside_value) {
  target.validate();
  const VolumeSampler sampler(v);
  // target index -> target world -> source world -> source index, folded into one map.
  const AffineTransform index_map =
      compose(sampler.world_to_index(), compose(invert(t), target.voxel_to_world));
  const Eigen::Matrix3d lin = index_map.linear();
  const Vector3 off = index_map.offset();
  const auto& d = target.dims;
  std::vector<float> out(target.voxel_count());

#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      const Vector3 row = lin.col(1) * static_cast<double>(j) + lin.col(2) * static_cast<double>(k) + off;
      std::size_t idx = target.index(0, j, k);
      for (std::int64_t i = 0; i < d[0]; ++i, ++idx) {
        const Point3 c = row + lin.col(0) * static_cast<double>(i);
        out[idx] = interpolation == Interpolation::Trilinear ? sampler.trilinear_index(c, outside_value)
                                                             : sampler.nearest_index(c, outside_value);
      }
    }
  }
  return {target, std::move(out)};
}

}  // namespace dbs
