#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbsloc/affine.hpp"
#include "dbsloc/electrode.hpp"
#include "dbsloc/trajectory.hpp"

namespace dbs {

struct GroundTruthEntry {
  std::int64_t slice_index = 0;
  ElectrodeLabel label = ElectrodeLabel::Left;
  Point3 position;
  bool operator==(const GroundTruthEntry&) const = default;
};

/// Labelled per-slice electrode centroids; at most one per (slice, label).
struct GroundTruth {
  std::vector<GroundTruthEntry> entries;

  /// Throws GroundTruth on a duplicate (slice_index, label).
  void validate() const;
  std::vector<GroundTruthEntry> for_label(ElectrodeLabel label) const;
  std::vector<ElectrodeLabel> labels() const;
  bool operator==(const GroundTruth&) const = default;
};

/// CSV with header slice_index,label,x_mm,y_mm,z_mm.
GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

struct SliceDistance {
  std::int64_t slice_index = 0;
  double ed_mm = 0.0;
};

struct DistanceMatch {
  std::vector<SliceDistance> matched;
  std::vector<std::int64_t> missed;  ///< ground-truth slices with no trajectory point
};

struct MatchOptions {
  /// Axial slice spacing of the ground truth; 0 infers the median gap.
  double slice_spacing_mm = 0.0;
};

/// For each ground-truth entry of the trajectory's label, the trajectory is
/// interpolated at that entry's axial position and the full 3-D distance is
/// taken. Entries beyond half a slice spacing of the trajectory span are
/// reported as missed.
DistanceMatch euclidean_distances(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options = {});

/// Mean squared ED over matched slices. Throws GroundTruth when nothing matches.
double mse(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options = {});

/// Slice positions inside the trajectory span that have no ground-truth entry.
std::int64_t spurious_slices(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options = {});

/// Per-electrode inputs to a report.
struct ElectrodeRun {
  ElectrodeLabel label = ElectrodeLabel::Left;
  std::vector<SliceDistance> distances;
  std::int64_t missed_slices = 0;
  std::int64_t spurious_slices = 0;
};

/// Scores one trajectory against the ground truth.
ElectrodeRun score_trajectory(const Trajectory& t, const GroundTruth& gt, const MatchOptions& options = {});

struct ElectrodeMetrics {
  ElectrodeLabel label = ElectrodeLabel::Left;
  double mean_ed_mm = 0.0;
  double max_ed_mm = 0.0;
  double mse_mm = 0.0;
  std::int64_t matched_slices = 0;
  std::int64_t missed_slices = 0;
  std::int64_t spurious_slices = 0;
  bool operator==(const ElectrodeMetrics&) const = default;
};

struct ValidationReport {
  std::vector<ElectrodeMetrics> per_electrode;
  double k_used = 0.0;
  double runtime_seconds = 0.0;
  bool operator==(const ValidationReport&) const = default;
};

ValidationReport make_report(std::span<const ElectrodeRun> runs, double k, double runtime_seconds);

nlohmann::json to_json(const ValidationReport& report);
ValidationReport report_from_json(const nlohmann::json& j);

}  // namespace dbs
