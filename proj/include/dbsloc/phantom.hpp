#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "dbsloc/affine.hpp"
#include "dbsloc/electrode.hpp"
#include "dbsloc/validation.hpp"
#include "dbsloc/volume.hpp"

namespace dbs {

/// Ellipsoidal skull shell.
struct SkullSpec {
  Point3 center{0.0, 0.0, -10.0};
  Vector3 radii{68.0, 85.0, 75.0};  ///< outer surface, mm
  double thickness = 6.0;
  float intensity = 1500.0f;
};

/// Straight electrode modelled as a capsule around the tip->entry segment.
struct ElectrodeSpec {
  Point3 tip;
  Point3 entry;
  double radius = 0.8;
  float intensity = 3000.0f;
  ElectrodeLabel label = ElectrodeLabel::Unassigned;  ///< Unassigned: side of tip x
};

/// Bilateral pair mirrored about x = 0. Axial span follows the mean lead
/// extent of a sample of implanted leads (tip at z = -24.429 mm, 73.786 mm long).
std::vector<ElectrodeSpec> default_electrodes();

struct PhantomSpec {
  Dims dims{192, 192, 180};
  double spacing = 1.45;  ///< isotropic, mm
  SkullSpec skull;
  float brain_intensity = 40.0f;
  float background = kAirHu;
  std::vector<ElectrodeSpec> electrodes = default_electrodes();
  double noise_sigma = 15.0;
  std::uint64_t seed = 0;
  int supersample = 1;     ///< subsamples per axis for partial-volume blending
  bool integer_hu = true;  ///< round voxels to whole HU after noise

  /// Throws InvalidArgument when intensity ordering or geometry is violated.
  void validate() const;
  GridSpec grid() const;
  ElectrodeLabel label_of(std::size_t electrode) const;
};

nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
PhantomSpec read_phantom_spec(const std::filesystem::path& path);

struct Phantom {
  Volume volume;
  GroundTruth ground_truth;
};

/// Renders the phantom and the analytic line/slice-plane intersection of each
/// electrode for every slice it crosses. Noise is keyed on (seed, voxel
/// index), so output does not depend on thread scheduling.
Phantom generate(const PhantomSpec& spec);

/// Analytic centroids only, without rendering the volume.
GroundTruth phantom_ground_truth(const PhantomSpec& spec);

/// Noise-free tissue value at a world point.
float phantom_tissue(const PhantomSpec& spec, const Point3& p);
/// Zero-mean unit normal deviate for a voxel.
double phantom_noise(std::uint64_t seed, std::uint64_t voxel_index);

struct RigidPerturbation {
  Vector3 translation_mm = Vector3::Zero();
  Vector3 rotation_deg = Vector3::Zero();  ///< Euler x, y, z about the grid centre
};

struct Perturbed {
  Volume volume;
  AffineTransform transform;  ///< maps original world -> perturbed world
};

/// Resamples v under a rigid motion about the grid centre. Rotation angle
/// must not exceed 30 degrees.
Perturbed perturb(const Volume& v, const RigidPerturbation& rigid);

}  // namespace dbs
