#pragma once

#include <filesystem>

#include <Eigen/Dense>

namespace dbs {

/// World-space point or displacement in millimetres, RAS+ axes
/// (x: left->right, y: posterior->anterior, z: inferior->superior).
using Point3 = Eigen::Vector3d;
using Vector3 = Eigen::Vector3d;

/// 4x4 homogeneous map with last row fixed to (0,0,0,1).
class AffineTransform {
 public:
  AffineTransform() : m_(Eigen::Matrix4d::Identity()) {}
  /// Throws InvalidArgument if the last row is not exactly (0,0,0,1).
  explicit AffineTransform(const Eigen::Matrix4d& m);
  AffineTransform(const Eigen::Matrix3d& linear, const Vector3& offset);

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(const Vector3& d);
  static AffineTransform scaling(const Vector3& s);
  /// Rotation R = Rz * Ry * Rx (angles in radians) about `center`, followed
  /// by a translation.
  static AffineTransform rigid(const Vector3& euler_xyz, const Vector3& translation,
                               const Point3& center = Point3::Zero());

  const Eigen::Matrix4d& matrix() const noexcept { return m_; }
  Eigen::Matrix3d linear() const { return m_.topLeftCorner<3, 3>(); }
  Vector3 offset() const { return m_.topRightCorner<3, 1>(); }

  double determinant() const { return linear().determinant(); }
  bool is_invertible() const;

  Point3 apply(const Point3& p) const { return linear() * p + offset(); }

  bool approx_equal(const AffineTransform& other, double tol) const;

 private:
  Eigen::Matrix4d m_;
};

Point3 apply(const AffineTransform& t, const Point3& p);

/// apply(compose(a, b), p) == apply(a, apply(b, p)).
AffineTransform compose(const AffineTransform& a, const AffineTransform& b);

/// Throws SingularTransform when the 3x3 block is not invertible.
AffineTransform invert(const AffineTransform& t);

/// Rotation matrix Rz * Ry * Rx.
Eigen::Matrix3d euler_to_matrix(const Vector3& euler_xyz);
/// Inverse of euler_to_matrix for proper rotations (|ry| < pi/2 branch).
Vector3 matrix_to_euler(const Eigen::Matrix3d& r);

// Transform file: {"schema": 1, "matrix": [16 reals, row-major]}.
AffineTransform read_transform_json(const std::filesystem::path& path);
void write_transform_json(const AffineTransform& t, const std::filesystem::path& path);

}  // namespace dbs
