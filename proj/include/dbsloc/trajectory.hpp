#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbsloc/affine.hpp"
#include "dbsloc/electrode.hpp"
#include "dbsloc/segmentation.hpp"

namespace dbs {

/// Electrode path from tip to entry: points strictly ascending in z (mm).
struct Trajectory {
  ElectrodeLabel label = ElectrodeLabel::Unassigned;
  std::vector<Point3> points;
  double native_spacing = 0.0;  ///< mm between source samples
  double source_k = 0.0;

  /// Throws InvalidArgument unless >= 2 points with strictly ascending z.
  void validate() const;
  double arc_length() const;
};

/// Axial span of a trajectory, tip (lowest z) to entry (highest z).
struct TrajectoryExtent {
  double start_mm = 0.0;
  double end_mm = 0.0;
  double absolute_distance_mm = 0.0;
};

struct OutlierRule {
  double min_residual_mm = 2.0;
  double median_factor = 3.0;
};

struct BuildOptions {
  double native_spacing = 0.0;  ///< 0: infer from the median axial gap
  double source_k = 0.0;
  OutlierRule outliers;
};

/// Chains the labelled centroids (one per slice; the largest when a slice has
/// several) into a trajectory and drops points far from a robust line fit.
/// Throws TrajectoryNotFound with fewer than two usable points.
Trajectory build_trajectory(std::span<const CentroidSet> sets, ElectrodeLabel label, const BuildOptions& options = {});

TrajectoryExtent extent(const Trajectory& t);

/// Linear interpolation at uniform arc-length spacing. Endpoints are kept
/// exactly; only the final gap may be shorter than `spacing`.
Trajectory resample_trajectory(const Trajectory& t, double spacing);

/// Point of the polyline at axial coordinate z, or nullopt outside its span.
std::optional<Point3> point_at_axial(const Trajectory& t, double z);

struct LineFit {
  Point3 point;         ///< centroid of the inputs
  Vector3 direction;    ///< unit vector, oriented towards +z
  double rms_residual;  ///< RMS perpendicular distance, mm
};

/// Total-least-squares line. Throws InvalidArgument when fewer than two
/// points are given or all points coincide.
LineFit fit_line(std::span<const Point3> points);
inline LineFit fit_line(const Trajectory& t) { return fit_line(t.points); }
double distance_to_line(const LineFit& line, const Point3& p);

// CSV: label,point_index,x_mm,y_mm,z_mm
void write_trajectory_csv(std::span<const Trajectory> trajectories, const std::filesystem::path& path);
std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& path);

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);
/// {"schema": 1, "trajectories": [...]}
void write_trajectories_json(std::span<const Trajectory> trajectories, const std::filesystem::path& path);
std::vector<Trajectory> read_trajectories_json(const std::filesystem::path& path);

}  // namespace dbs
