#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "dbsloc/affine.hpp"
#include "dbsloc/error.hpp"
#include "oracles.hpp"

using namespace dbs;

namespace {

AffineTransform random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::Matrix3d l;
  do {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) l(r, c) = u(rng);
  } while (std::abs(l.determinant()) < 0.1);
  return {l, Vector3(10 * u(rng), 10 * u(rng), 10 * u(rng))};
}

}  // namespace

TEST(Affine, RejectsBadLastRow) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(3, 0) = 1e-3;
  EXPECT_THROW(AffineTransform{m}, Error);
}

TEST(Affine, ComposeIsAssociative) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_affine(rng), b = random_affine(rng), c = random_affine(rng);
    const Point3 p(u(rng), u(rng), u(rng));
    const Point3 left = apply(compose(a, compose(b, c)), p);
    const Point3 right = apply(compose(compose(a, b), c), p);
    EXPECT_LT((left - right).norm(), 1e-9 * std::max(1.0, left.norm()));
    EXPECT_LT((apply(compose(a, b), p) - apply(a, apply(b, p))).norm(), 1e-9 * std::max(1.0, left.norm()));
  }
}

TEST(Affine, InverseRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_affine(rng);
    EXPECT_TRUE(compose(a, invert(a)).approx_equal(AffineTransform::identity(), 1e-9));
  }
}

TEST(Affine, SingularInverseThrows) {
  const AffineTransform s = AffineTransform::scaling(Vector3(1, 0, 1));
  EXPECT_FALSE(s.is_invertible());
  try {
    invert(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularTransform);
  }
}

TEST(Affine, RigidRotatesAboutCentre) {
  const Point3 c(10, -5, 3);
  const auto t = AffineTransform::rigid(Vector3(0.1, -0.2, 0.3), Vector3::Zero(), c);
  EXPECT_LT((t.apply(c) - c).norm(), 1e-12);
  EXPECT_NEAR(t.determinant(), 1.0, 1e-12);
}

TEST(Affine, EulerRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector3 e(u(rng), u(rng), u(rng));
    EXPECT_LT((matrix_to_euler(euler_to_matrix(e)) - e).norm(), 1e-9);
  }
}

TEST(Affine, EulerOrderIsZYX) {
  const Vector3 e(0.3, 0.0, 0.0);
  const Eigen::Matrix3d rx = euler_to_matrix(e);
  // x-rotation leaves the x axis fixed and turns y towards z
  EXPECT_LT((rx * Vector3::UnitX() - Vector3::UnitX()).norm(), 1e-15);
  EXPECT_NEAR((rx * Vector3::UnitY()).z(), std::sin(0.3), 1e-15);
  const Vector3 f(0.2, 0.4, -0.5);
  const Eigen::Matrix3d expect = Eigen::AngleAxisd(f.z(), Vector3::UnitZ()).toRotationMatrix() *
                                 Eigen::AngleAxisd(f.y(), Vector3::UnitY()).toRotationMatrix() *
                                 Eigen::AngleAxisd(f.x(), Vector3::UnitX()).toRotationMatrix();
  EXPECT_LT((euler_to_matrix(f) - expect).norm(), 1e-14);
}

TEST(Affine, JsonRoundTrip) {
  std::mt19937_64 rng(5);
  const auto dir = oracle::temp_dir("affine");
  const auto a = random_affine(rng);
  write_transform_json(a, dir / "t.json");
  EXPECT_EQ(read_transform_json(dir / "t.json").matrix(), a.matrix());
}

TEST(Affine, JsonRejectsWrongShape) {
  const auto dir = oracle::temp_dir("affine-bad");
  {
    std::ofstream(dir / "t.json") << R"({"schema": 1, "matrix": [1, 0, 0]})";
  }
  EXPECT_THROW(read_transform_json(dir / "t.json"), Error);
  EXPECT_THROW(read_transform_json(dir / "missing.json"), Error);
}
