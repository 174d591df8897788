#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "dbsloc/affine.hpp"
#include "dbsloc/volume.hpp"

namespace dbs {

/// Closed interval [lo, hi] in mm.
struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
  bool operator==(const Range&) const = default;
};

struct AtlasSegment {
  Range axial;    ///< z, inferior -> superior
  Range coronal;  ///< y, posterior -> anterior
  bool operator==(const AtlasSegment&) const = default;
};

/// Piecewise box ROI in MNI space: one sagittal (x) range shared by a stack
/// of axial segments, each with its own coronal extent.
struct AtlasBoxStack {
  Range sagittal;
  std::vector<AtlasSegment> segments;  ///< caudal -> cranial, disjoint in z

  /// Throws InvalidArgument if any range is empty or segments overlap/out of order.
  void validate() const;
  bool contains(const Point3& mni) const;
  bool operator==(const AtlasBoxStack&) const = default;
};

/// The default electrode-corridor atlas: sagittal [-40, 40] mm and three
/// axial segments (caudal, middle, cranial).
AtlasBoxStack default_atlas();

nlohmann::json to_json(const AtlasBoxStack& atlas);
AtlasBoxStack atlas_from_json(const nlohmann::json& j);
AtlasBoxStack read_atlas_json(const std::filesystem::path& path);
void write_atlas_json(const AtlasBoxStack& atlas, const std::filesystem::path& path);

/// Binary mask Z with values in {0, 1} and at least one 1-voxel.
class RoiMask {
 public:
  /// Throws InvalidArgument for values outside {0,1}, EmptyRoi if all zero.
  explicit RoiMask(Volume mask);

  const Volume& volume() const noexcept { return mask_; }
  const GridSpec& grid() const noexcept { return mask_.grid(); }
  bool included(std::size_t idx) const { return mask_[idx] != 0.0f; }
  std::size_t count() const noexcept { return count_; }

 private:
  Volume mask_;
  std::size_t count_ = 0;
};

/// Voxel is 1 iff its world centre lies in the atlas (closed intervals).
/// Throws EmptyRoi when no voxel centre falls inside.
RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid);
/// Same, testing grid_to_atlas(centre) against the atlas; the mask keeps
/// the input grid.
RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid, const AffineTransform& grid_to_atlas);

/// Pairs intensities with the mask's inclusion flags. Throws GridMismatch
/// unless dims match and affines agree within 1e-6.
MaskedVolume apply_roi(const Volume& y, const RoiMask& z);

/// Nearest-neighbour warp of a mask into another grid under t (source world
/// -> target world). Throws EmptyRoi if nothing survives.
RoiMask warp_mask(const RoiMask& z, const AffineTransform& t, const GridSpec& target_grid);

}  // namespace dbs
