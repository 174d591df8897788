#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dbsloc/atlas.hpp"
#include "dbsloc/segmentation.hpp"
#include "dbsloc/trajectory.hpp"
#include "dbsloc/validation.hpp"

namespace dbs {

/// One masked volume with its labelled centroids.
struct CalibrationCase {
  const MaskedVolume* masked = nullptr;
  const GroundTruth* ground_truth = nullptr;
};

/// Inclusive grid lo, lo + step, ... up to hi (a float tolerance of 1e-9
/// steps admits hi itself).
struct KGrid {
  double lo = 0.6;
  double hi = 9.5;
  double step = 0.01;

  /// Throws InvalidArgument unless lo < hi and step > 0.
  void validate() const;
  std::size_t size() const;
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

struct CalibrationPoint {
  double k = 0.0;
  double mean_ed_mm = 0.0;  ///< mean over cases; +inf if any case failed
  double max_ed_mm = 0.0;   ///< worst case
};

struct CalibrationResult {
  std::vector<CalibrationPoint> points;
  /// Longest contiguous run of grid points where every case stays below the
  /// ED threshold. Ties go to the lower k.
  std::optional<Range> plateau;
};

struct CalibrationOptions {
  KGrid grid;
  SegmentationOptions segmentation;
  BuildOptions build;
  double ed_threshold_mm = 1.0;
};

/// Mean per-slice ED of the worse electrode, or +inf when segmentation or
/// trajectory assembly fails.
double case_error(const SegmentationIndex& index, const GroundTruth& gt, double k, const SegmentationOptions& seg,
                  const BuildOptions& build);

/// Sweeps k over the grid on every case. Throws GroundTruth when a case has
/// no entries.
CalibrationResult calibrate_k(std::span<const CalibrationCase> cases, const CalibrationOptions& options);
CalibrationResult calibrate_k(const MaskedVolume& masked, const GroundTruth& gt, const CalibrationOptions& options);

/// k,mean_ed_mm,max_ed_mm with "inf" for failures.
void write_calibration_csv(const CalibrationResult& result, const std::filesystem::path& path);

}  // namespace dbs
