#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dbsloc/electrode.hpp"
#include "dbsloc/volume.hpp"

namespace dbs {

/// Per-slice intensity statistics over ROI-included voxels and the adaptive
/// threshold T = k * sigma + mu.
struct SliceStats {
  std::int64_t slice_index = 0;
  double mu = 0.0;
  double sigma = 0.0;  ///< population standard deviation
  double threshold = 0.0;
  std::int64_t included_count = 0;

  /// Same statistics with the threshold recomputed for another k.
  SliceStats with_k(double k) const;
};

double adaptive_threshold(double mu, double sigma, double k);

/// Returns nullopt when the slice has no included voxel.
std::optional<SliceStats> slice_stats(const MaskedVolume& masked, std::int64_t slice_index, double k);

/// Row-major 2-D binary image of one axial slice.
struct SliceMask {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> bits;

  SliceMask() = default;
  SliceMask(std::int64_t w, std::int64_t h) : width(w), height(h), bits(static_cast<std::size_t>(w * h), 0) {}
  bool at(std::int64_t i, std::int64_t j) const { return bits[static_cast<std::size_t>(i + width * j)] != 0; }
  void set(std::int64_t i, std::int64_t j, bool v = true) {
    bits[static_cast<std::size_t>(i + width * j)] = v ? 1 : 0;
  }
};

/// Included voxel -> 1 iff intensity >= threshold; excluded voxels -> 0.
SliceMask binarize_slice(const MaskedVolume& masked, const SliceStats& stats);

enum class Connectivity { Four = 4, Eight = 8 };

/// Pixels (i, j) in raster order. Components are ordered by their first pixel.
struct Component {
  std::vector<std::array<std::int64_t, 2>> pixels;
};

std::vector<Component> connected_components_2d(const SliceMask& mask, Connectivity connectivity = Connectivity::Eight);

struct AreaFilter {
  std::int64_t min_area = 1;
  std::int64_t max_area = std::numeric_limits<std::int64_t>::max();

  /// min 1 voxel; max = voxels covered by a disc of the given diameter at the
  /// grid's in-plane spacing.
  static AreaFilter for_grid(const GridSpec& grid, double disc_diameter_mm = 10.0);
};

struct Centroid {
  Point3 position;  ///< world mm
  std::int64_t area_voxels = 0;
  double mean_intensity = 0.0;
  ElectrodeLabel label = ElectrodeLabel::Unassigned;
};

struct CentroidSet {
  std::int64_t slice_index = 0;
  std::vector<Centroid> centroids;
  bool ambiguous = false;  ///< more than two candidates survived filtering
};

/// Unweighted mean voxel-centre position per component; components outside
/// [min_area, max_area] are dropped.
CentroidSet extract_centroids(const MaskedVolume& masked, std::int64_t slice_index,
                              std::span<const Component> components, const AreaFilter& filter);

struct ClassifyOptions {
  /// Below this gap between left/right cluster means all centroids are
  /// treated as one electrode.
  double min_cluster_separation_mm = 10.0;
};

/// Labels centroids left/right of the median sagittal coordinate. Slices with
/// more than two centroids keep the two largest and are flagged ambiguous.
std::vector<CentroidSet> classify_electrodes(std::vector<CentroidSet> sets, const ClassifyOptions& options = {});

struct SegmentationOptions {
  AreaFilter filter;
  Connectivity connectivity = Connectivity::Eight;
  ClassifyOptions classify;

  static SegmentationOptions for_grid(const GridSpec& grid);
};

/// Threshold, label and classify every axial slice. One CentroidSet per
/// slice, in slice order.
std::vector<CentroidSet> segment_volume(const MaskedVolume& masked, double k, const SegmentationOptions& options);

/// Precomputed per-slice statistics and intensity-sorted included voxels,
/// for evaluating many k values on one volume. Produces exactly the same
/// CentroidSets as segment_volume.
class SegmentationIndex {
 public:
  explicit SegmentationIndex(const MaskedVolume& masked);

  std::vector<CentroidSet> segment(double k, const SegmentationOptions& options) const;
  const std::vector<std::optional<SliceStats>>& stats() const noexcept { return stats_; }
  const MaskedVolume& masked() const noexcept { return *masked_; }

 private:
  const MaskedVolume* masked_;
  std::vector<std::optional<SliceStats>> stats_;
  /// Per slice: in-slice offsets of included voxels, intensity descending.
  std::vector<std::vector<std::uint32_t>> sorted_;
};

/// Centroid CSV: slice_index,x_mm,y_mm,z_mm,area_voxels,mean_hu,label
void write_centroids_csv(std::span<const CentroidSet> sets, const std::filesystem::path& path);

}  // namespace dbs
