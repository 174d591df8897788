#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dbsloc/affine.hpp"
#include "dbsloc/sampling.hpp"
#include "dbsloc/volume.hpp"

namespace dbs {

enum class Metric { Ssd, Ncc };

struct RegistrationConfig {
  Metric metric = Metric::Ncc;
  int pyramid_levels = 3;             ///< downsample factor 2 per level
  int max_iterations_per_level = 100; ///< full coordinate sweeps
  double parameter_tolerance = 1e-3;  ///< mm-equivalent step at which a level stops
  AffineTransform initial_transform;  ///< moving world -> fixed world
  double sample_fraction = 0.25;
  std::uint64_t seed = 0;
  /// Rigid only: also try a principal-axes alignment of the above-mean
  /// foreground and start from whichever scores better.
  bool moments_init = true;

  void validate() const;
};

struct LevelTrace {
  int level = 0;                    ///< 0 is full resolution
  std::vector<double> best_values;  ///< best metric after each sweep
};

struct RegistrationResult {
  AffineTransform transform;  ///< moving world -> fixed world
  double metric_value = 0.0;  ///< on the sampled voxels at full resolution
  bool converged = false;
  std::vector<LevelTrace> trace;
};

/// Lower is better for both metrics. Fixed voxel centres p are compared with
/// the moving image at invert(t)(p); samples outside the moving grid are
/// skipped. SSD is the mean squared difference, NCC the negated normalized
/// cross-correlation. Throws InsufficientOverlap below 100 samples.
double similarity(const Volume& fixed, const Volume& moving, const AffineTransform& t, Metric metric);

/// Evaluates a metric on a fixed subset of fixed-image voxels.
class MetricEvaluator {
 public:
  MetricEvaluator(const Volume& fixed, const Volume& moving, Metric metric, double sample_fraction,
                  std::uint64_t seed);

  /// `fixed_to_moving` maps fixed world to moving world. nullopt when fewer
  /// than 100 samples overlap.
  std::optional<double> evaluate(const AffineTransform& fixed_to_moving) const;
  std::size_t sample_count() const noexcept { return points_.size(); }

  static constexpr std::size_t kMinOverlap = 100;

 private:
  Metric metric_;
  VolumeSampler moving_;
  std::vector<Point3> points_;
  std::vector<float> values_;
  double shift_ = 0.0;
};

/// Deterministic stratified subset of [0, n): one index per stride block.
std::vector<std::size_t> stratified_samples(std::size_t n, double fraction, std::uint64_t seed);

/// Rigid map (moving world -> fixed world) aligning the centroids and
/// principal axes of the voxels brighter than each volume's mean. Axis signs
/// are chosen to keep the rotation closest to `near`. nullopt when either
/// foreground is degenerate.
std::optional<AffineTransform> moments_alignment(const Volume& fixed, const Volume& moving,
                                                 const AffineTransform& near = AffineTransform::identity());

/// 2x2x2 block average; axes of length 1 are kept.
Volume downsample2(const Volume& v);

/// Six parameters: translation (mm) and Euler rotation about the fixed
/// volume centre, optimized coarse to fine.
RegistrationResult register_rigid(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg);

/// Twelve parameters refining `init`. The returned metric is never worse
/// than that of `init` at full resolution.
RegistrationResult register_affine(const Volume& fixed, const Volume& moving, const AffineTransform& init,
                                   const RegistrationConfig& cfg);

}  // namespace dbs
