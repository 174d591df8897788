#include "dbsloc/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbsloc/error.hpp"

namespace dbs {

GridSpec GridSpec::axis_aligned(const Dims& dims, const Spacing& spacing, const Point3& origin) {
  GridSpec g;
  g.dims = dims;
  g.spacing = spacing;
  g.voxel_to_world = AffineTransform(Vector3(spacing[0], spacing[1], spacing[2]).asDiagonal().toDenseMatrix(),
                                     origin);
  g.validate();
  return g;
}

GridSpec GridSpec::centered(const Dims& dims, const Spacing& spacing) {
  Point3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = -0.5 * static_cast<double>(dims[a] - 1) * spacing[a];
  return axis_aligned(dims, spacing, origin);
}

GridSpec GridSpec::from_affine(const Dims& dims, const AffineTransform& voxel_to_world) {
  GridSpec g;
  g.dims = dims;
  const Eigen::Matrix3d lin = voxel_to_world.linear();
  for (int a = 0; a < 3; ++a) g.spacing[a] = lin.col(a).norm();
  g.voxel_to_world = voxel_to_world;
  g.validate();
  return g;
}

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw Error(ErrorKind::InvalidArgument, "grid dims must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive and finite");
    }
  }
  if (!voxel_to_world.is_invertible()) {
    throw Error(ErrorKind::SingularTransform, "grid voxel-to-world affine is singular");
  }
}

std::array<std::int64_t, 3> GridSpec::ijk(std::size_t index) const {
  const auto idx = static_cast<std::int64_t>(index);
  const std::int64_t plane = dims[0] * dims[1];
  const std::int64_t k = idx / plane;
  const std::int64_t rem = idx - k * plane;
  return {rem % dims[0], rem / dims[0], k};
}

Point3 GridSpec::center_world() const {
  return world(0.5 * static_cast<double>(dims[0] - 1), 0.5 * static_cast<double>(dims[1] - 1),
               0.5 * static_cast<double>(dims[2] - 1));
}

bool GridSpec::same_geometry(const GridSpec& other, double tol) const {
  return dims == other.dims && voxel_to_world.approx_equal(other.voxel_to_world, tol);
}

Volume::Volume(GridSpec grid, std::vector<float> data,
               std::optional<std::pair<float, float>> intensity_range_hint)
    : grid_(std::move(grid)), data_(std::move(data)), range_hint_(intensity_range_hint) {
  grid_.validate();
  if (data_.size() != grid_.voxel_count()) {
    throw Error(ErrorKind::InvalidArgument, "volume data length does not match grid dims");
  }
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); })) {
    throw Error(ErrorKind::InvalidArgument, "volume contains non-finite intensities");
  }
}

Volume::Volume(GridSpec grid, float fill) : grid_(std::move(grid)) {
  grid_.validate();
  if (!std::isfinite(fill)) throw Error(ErrorKind::InvalidArgument, "non-finite fill value");
  data_.assign(grid_.voxel_count(), fill);
}

std::size_t MaskedVolume::included_count() const {
  return static_cast<std::size_t>(std::count(included.begin(), included.end(), std::uint8_t{1}));
}

}  // namespace dbs
