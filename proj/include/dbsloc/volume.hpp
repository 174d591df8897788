#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dbsloc/affine.hpp"

namespace dbs {

/// Air, and the default fill for samples falling outside a grid.
inline constexpr float kAirHu = -1024.0f;

using Dims = std::array<std::int64_t, 3>;
using Spacing = std::array<double, 3>;

/// Voxel lattice geometry. Voxel (i,j,k) has its centre at
/// voxel_to_world * (i,j,k,1). The k axis is the axial (slice) axis.
struct GridSpec {
  Dims dims{1, 1, 1};
  Spacing spacing{1.0, 1.0, 1.0};
  AffineTransform voxel_to_world;

  /// Axis-aligned grid with voxel (0,0,0) at `origin`.
  static GridSpec axis_aligned(const Dims& dims, const Spacing& spacing, const Point3& origin);
  /// Axis-aligned grid whose centre sits at the world origin.
  static GridSpec centered(const Dims& dims, const Spacing& spacing);
  /// Spacing derived from the column norms of the affine's linear part.
  static GridSpec from_affine(const Dims& dims, const AffineTransform& voxel_to_world);

  /// Throws InvalidArgument / SingularTransform when the invariants fail.
  void validate() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t slice_size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  }
  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(i + dims[0] * (j + dims[1] * k));
  }
  std::array<std::int64_t, 3> ijk(std::size_t index) const;

  Point3 world(double i, double j, double k) const { return voxel_to_world.apply(Point3(i, j, k)); }
  Point3 center_world() const;

  /// Same dims and affine entries within tol.
  bool same_geometry(const GridSpec& other, double tol = 1e-6) const;
};

/// Dense scalar volume in Hounsfield units. Immutable after construction.
class Volume {
 public:
  Volume() = default;
  /// Throws if data.size() != voxel count or any value is non-finite.
  Volume(GridSpec grid, std::vector<float> data,
         std::optional<std::pair<float, float>> intensity_range_hint = std::nullopt);
  Volume(GridSpec grid, float fill);

  const GridSpec& grid() const noexcept { return grid_; }
  const Dims& dims() const noexcept { return grid_.dims; }
  const Spacing& spacing() const noexcept { return grid_.spacing; }
  const AffineTransform& voxel_to_world() const noexcept { return grid_.voxel_to_world; }
  std::span<const float> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  const std::optional<std::pair<float, float>>& intensity_range_hint() const noexcept {
    return range_hint_;
  }

  float at(std::int64_t i, std::int64_t j, std::int64_t k) const { return data_[grid_.index(i, j, k)]; }
  float operator[](std::size_t idx) const { return data_[idx]; }

  /// Moves the voxel buffer out; the volume is left empty.
  std::vector<float> release() && { return std::move(data_); }

 private:
  GridSpec grid_;
  std::vector<float> data_;
  std::optional<std::pair<float, float>> range_hint_;
};

/// Intensities plus an explicit inclusion flag per voxel. Excluded voxels
/// keep their stored value but are ignored by every statistic.
struct MaskedVolume {
  Volume volume;
  std::vector<std::uint8_t> included;

  const GridSpec& grid() const noexcept { return volume.grid(); }
  std::size_t included_count() const;
};

}  // namespace dbs
