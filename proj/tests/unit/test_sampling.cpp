#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dbsloc/error.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/sampling.hpp"

using namespace dbs;

namespace {

Volume ramp_volume() {
  const auto g = GridSpec::axis_aligned({6, 5, 4}, {1.0, 2.0, 0.5}, Point3(-3, -4, 1));
  std::vector<float> d(g.voxel_count());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto [a, b, c] = g.ijk(i);
    d[i] = static_cast<float>(3 * a - 2 * b + 5 * c + a * b);
  }
  return {g, d};
}

// Direct tri-linear blend written from the eight corner weights.
double blend(const Volume& v, double x, double y, double z) {
  const auto i0 = static_cast<std::int64_t>(std::floor(x));
  const auto j0 = static_cast<std::int64_t>(std::floor(y));
  const auto k0 = static_cast<std::int64_t>(std::floor(z));
  double acc = 0;
  for (int c = 0; c < 8; ++c) {
    const std::int64_t i = i0 + (c & 1), j = j0 + ((c >> 1) & 1), k = k0 + ((c >> 2) & 1);
    const double w = (1 - std::abs(x - static_cast<double>(i))) * (1 - std::abs(y - static_cast<double>(j))) *
                     (1 - std::abs(z - static_cast<double>(k)));
    if (w > 0) acc += w * v.at(i, j, k);
  }
  return acc;
}

}  // namespace

TEST(Sampling, VoxelCentresExact) {
  const Volume v = ramp_volume();
  const auto& g = v.grid();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto [a, b, c] = g.ijk(i);
    const Point3 p = g.world(static_cast<double>(a), static_cast<double>(b), static_cast<double>(c));
    EXPECT_EQ(trilinear_sample(v, p), v[i]);
  }
}

TEST(Sampling, MatchesCornerBlend) {
  const Volume v = ramp_volume();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(0, 5), uy(0, 4), uz(0, 3);
  for (int n = 0; n < 500; ++n) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    const Point3 p = v.grid().world(x, y, z);
    EXPECT_NEAR(trilinear_sample(v, p), blend(v, x, y, z), 1e-3);
  }
}

TEST(Sampling, OutsideValue) {
  const Volume v = ramp_volume();
  EXPECT_EQ(trilinear_sample(v, v.grid().world(-0.6, 1, 1), -7.0f), -7.0f);
  EXPECT_EQ(trilinear_sample(v, v.grid().world(2, 1, 9)), kAirHu);
}

TEST(Sampling, ContinuousOnSmoothPhantom) {
  PhantomSpec spec;
  spec.dims = {64, 64, 60};
  spec.spacing = 4.0;
  spec.noise_sigma = 0;
  spec.supersample = 3;
  spec.integer_hu = false;
  const Volume v = generate(spec).volume;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-100, 100);
  std::normal_distribution<double> dir(0, 1);
  for (int n = 0; n < 2000; ++n) {
    const Point3 p(u(rng), u(rng), u(rng));
    Vector3 d(dir(rng), dir(rng), dir(rng));
    d = d.normalized() * 1e-6;
    EXPECT_LT(std::abs(trilinear_sample(v, p) - trilinear_sample(v, p + d)), 1e-2);
  }
}

TEST(Sampling, ResampleIdentityIsIdentity) {
  const Volume v = ramp_volume();
  const Volume r = resample(v, AffineTransform::identity(), v.grid());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(r[i], v[i]);
  const Volume n = resample(v, AffineTransform::identity(), v.grid(), Interpolation::Nearest);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(n[i], v[i]);
}

TEST(Sampling, ResampleDirection) {
  // Moving the content +1 voxel along x: output(p) = input(p - d).
  const Volume v = ramp_volume();
  const Volume r = resample(v, AffineTransform::translation(Vector3(1.0, 0, 0)), v.grid());
  for (std::int64_t k = 0; k < 4; ++k)
    for (std::int64_t j = 0; j < 5; ++j) {
      EXPECT_EQ(r.at(0, j, k), kAirHu);
      for (std::int64_t i = 1; i < 6; ++i) EXPECT_EQ(r.at(i, j, k), v.at(i - 1, j, k));
    }
}

TEST(Sampling, ResampleOntoOtherGrid) {
  const Volume v = ramp_volume();
  const auto target = GridSpec::axis_aligned({3, 3, 3}, {0.7, 0.9, 0.3}, Point3(-2.2, -3.1, 1.4));
  const Volume r = resample(v, AffineTransform::identity(), target);
  const VolumeSampler s(v);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto [a, b, c] = target.ijk(i);
    const Point3 idx = s.to_index(target.world(static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)));
    EXPECT_NEAR(r[i], blend(v, idx.x(), idx.y(), idx.z()), 1e-3);
  }
}

TEST(Sampling, SingularTransformRejected) {
  const Volume v = ramp_volume();
  try {
    resample(v, AffineTransform::scaling(Vector3(0, 1, 1)), v.grid());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularTransform);
  }
}
