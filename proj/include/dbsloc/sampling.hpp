#pragma once

#include "dbsloc/affine.hpp"
#include "dbsloc/volume.hpp"

namespace dbs {

enum class Interpolation { Trilinear, Nearest };

/// Precomputes the world->index map of a volume for repeated sampling.
class VolumeSampler {
 public:
  explicit VolumeSampler(const Volume& v);

  /// Continuous voxel index of a world point.
  Point3 to_index(const Point3& world) const { return world_to_index_.apply(world); }

  float trilinear_world(const Point3& world, float outside) const { return trilinear_index(to_index(world), outside); }
  float nearest_world(const Point3& world, float outside) const { return nearest_index(to_index(world), outside); }

  /// Index-space sampling. Coordinates within 1e-9 of an integer snap to it,
  /// so voxel centres reproduce stored values exactly.
  float trilinear_index(const Point3& c, float outside) const;
  float nearest_index(const Point3& c, float outside) const;

  const Volume& volume() const noexcept { return *v_; }
  const AffineTransform& world_to_index() const noexcept { return world_to_index_; }

 private:
  const Volume* v_;
  AffineTransform world_to_index_;
};

/// Trilinear interpolation at a world point; `outside_value` beyond the grid.
float trilinear_sample(const Volume& v, const Point3& world_point, float outside_value = kAirHu);

/// Output voxel at world point p takes the source value at invert(t)(p).
/// Throws SingularTransform when t is not invertible.
Volume resample(const Volume& v, const AffineTransform& t, const GridSpec& target,
                Interpolation interpolation = Interpolation::Trilinear, float outside_value = kAirHu);

}  // namespace dbs
