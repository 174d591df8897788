#include "dbsloc/affine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dbsloc/error.hpp"

namespace dbs {

namespace {
constexpr double kSingularDeterminant = 1e-12;
}

AffineTransform::AffineTransform(const Eigen::Matrix4d& m) : m_(m) {
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
    throw Error(ErrorKind::InvalidArgument, "affine transform last row must be (0,0,0,1)");
  }
}

AffineTransform::AffineTransform(const Eigen::Matrix3d& linear, const Vector3& offset)
    : m_(Eigen::Matrix4d::Identity()) {
  m_.topLeftCorner<3, 3>() = linear;
  m_.topRightCorner<3, 1>() = offset;
}

AffineTransform AffineTransform::translation(const Vector3& d) {
  return {Eigen::Matrix3d::Identity(), d};
}

AffineTransform AffineTransform::scaling(const Vector3& s) {
  return {s.asDiagonal().toDenseMatrix(), Vector3::Zero()};
}

AffineTransform AffineTransform::rigid(const Vector3& euler_xyz, const Vector3& translation,
                                       const Point3& center) {
  const Eigen::Matrix3d r = euler_to_matrix(euler_xyz);
  return {r, center - r * center + translation};
}

bool AffineTransform::is_invertible() const {
  const double det = determinant();
  return std::isfinite(det) && std::abs(det) > kSingularDeterminant;
}

bool AffineTransform::approx_equal(const AffineTransform& other, double tol) const {
  return (m_ - other.m_).cwiseAbs().maxCoeff() <= tol;
}

Point3 apply(const AffineTransform& t, const Point3& p) { return t.apply(p); }

AffineTransform compose(const AffineTransform& a, const AffineTransform& b) {
  Eigen::Matrix4d m = a.matrix() * b.matrix();
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  return AffineTransform(m);
}

AffineTransform invert(const AffineTransform& t) {
  if (!t.is_invertible()) {
    throw Error(ErrorKind::SingularTransform, "cannot invert singular affine transform");
  }
  const Eigen::Matrix3d inv = t.linear().inverse();
  return {inv, -inv * t.offset()};
}

Eigen::Matrix3d euler_to_matrix(const Vector3& e) {
  return (Eigen::AngleAxisd(e.z(), Vector3::UnitZ()) * Eigen::AngleAxisd(e.y(), Vector3::UnitY()) *
          Eigen::AngleAxisd(e.x(), Vector3::UnitX()))
      .toRotationMatrix();
}

Vector3 matrix_to_euler(const Eigen::Matrix3d& r) {
  // r = Rz(c) Ry(b) Rx(a): r(2,0) = -sin b, r(2,1) = cos b sin a, r(1,0) = sin c cos b.
  const double b = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double a = std::atan2(r(2, 1), r(2, 2));
  const double c = std::atan2(r(1, 0), r(0, 0));
  return {a, b, c};
}

AffineTransform read_transform_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open transform file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("schema", 0) != 1 || !j.contains("matrix") ||
      !j["matrix"].is_array() || j["matrix"].size() != 16) {
    throw Error(ErrorKind::Format,
                path.string() + ": expected {\"schema\":1,\"matrix\":[16 numbers]}");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const auto& v = j["matrix"][r * 4 + c];
      if (!v.is_number()) throw Error(ErrorKind::Format, path.string() + ": non-numeric matrix entry");
      m(r, c) = v.get<double>();
    }
  }
  return AffineTransform(m);
}

void write_transform_json(const AffineTransform& t, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema"] = 1;
  auto& arr = j["matrix"] = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) arr.push_back(t.matrix()(r, c));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write transform file " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing transform file " + path.string());
}

}  // namespace dbs
