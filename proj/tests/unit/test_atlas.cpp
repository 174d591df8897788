#include <gtest/gtest.h>

#include <random>

#include "dbsloc/atlas.hpp"
#include "dbsloc/error.hpp"
#include "oracles.hpp"

using namespace dbs;

namespace {

GridSpec random_grid(std::mt19937_64& rng, bool oblique) {
  std::uniform_real_distribution<double> sp(1.5, 4.0), off(-60, -20), ang(-0.5, 0.5);
  GridSpec g = GridSpec::axis_aligned({32, 32, 32}, {sp(rng), sp(rng), sp(rng)}, Point3(off(rng), off(rng), off(rng) - 20));
  if (oblique) {
    const Eigen::Matrix3d r = euler_to_matrix(Vector3(ang(rng), ang(rng), ang(rng)));
    g = GridSpec::from_affine(g.dims, AffineTransform(r * g.voxel_to_world.linear(), g.voxel_to_world.offset()));
  }
  return g;
}

AtlasBoxStack random_atlas(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-30, 30), w(5, 30);
  AtlasBoxStack a;
  const double x = u(rng);
  a.sagittal = {x, x + w(rng)};
  double z = -50;
  for (int s = 0; s < 3; ++s) {
    const double y = u(rng);
    const double top = z + w(rng);
    a.segments.push_back({{z, top}, {y, y + w(rng)}});
    z = top + 0.5;
  }
  return a;
}

}  // namespace

TEST(Atlas, DefaultGeometry) {
  const auto a = default_atlas();
  EXPECT_EQ(a.sagittal, (Range{-40, 40}));
  ASSERT_EQ(a.segments.size(), 3u);
  EXPECT_EQ(a.segments[0], (AtlasSegment{{-49, -39.5}, {-30, 3}}));
  EXPECT_EQ(a.segments[1], (AtlasSegment{{-39, 1.5}, {-30, 22}}));
  EXPECT_EQ(a.segments[2], (AtlasSegment{{2, 31}, {-30, 32}}));
  EXPECT_NO_THROW(a.validate());
}

TEST(Atlas, ValidateRejectsOverlapAndEmpty) {
  auto a = default_atlas();
  a.segments[1].axial.hi = 5.0;
  EXPECT_THROW(a.validate(), Error);
  a = default_atlas();
  a.sagittal = {1, -1};
  EXPECT_THROW(a.validate(), Error);
  a = default_atlas();
  a.segments.clear();
  EXPECT_THROW(a.validate(), Error);
}

TEST(Atlas, ContainsClosedIntervals) {
  const auto a = default_atlas();
  EXPECT_TRUE(a.contains(Point3(40, 32, 31)));
  EXPECT_TRUE(a.contains(Point3(-40, -30, -49)));
  EXPECT_FALSE(a.contains(Point3(0, 10, -45)));  // caudal coronal limit is +3
  EXPECT_FALSE(a.contains(Point3(0, 0, 1.75)));  // gap between segments
  EXPECT_FALSE(a.contains(Point3(40.001, 0, 0)));
}

TEST(Atlas, RasterizeMatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto grid = random_grid(rng, trial % 2 == 1);
    const auto atlas = trial % 4 < 2 ? default_atlas() : random_atlas(rng);
    std::vector<std::uint8_t> expect(grid.voxel_count());
    std::size_t count = 0;
    for (std::size_t i = 0; i < expect.size(); ++i) {
      const auto [a, b, c] = grid.ijk(i);
      expect[i] = oracle::in_atlas(atlas, grid.world(static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)));
      count += expect[i];
    }
    if (count == 0) {
      EXPECT_THROW(rasterize_atlas(atlas, grid), Error);
      continue;
    }
    const RoiMask m = rasterize_atlas(atlas, grid);
    EXPECT_EQ(m.count(), count);
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(m.included(i), expect[i] != 0) << "trial " << trial;
  }
}

TEST(Atlas, RasterizeWithTransform) {
  std::mt19937_64 rng(8);
  const auto grid = random_grid(rng, false);
  const auto atlas = default_atlas();
  const auto t = AffineTransform::rigid(Vector3(0.1, 0.05, -0.2), Vector3(3, -2, 5));
  const RoiMask m = rasterize_atlas(atlas, grid, t);
  EXPECT_TRUE(m.grid().same_geometry(grid, 0));
  for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
    const auto [a, b, c] = grid.ijk(i);
    const Point3 p = t.apply(grid.world(static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)));
    ASSERT_EQ(m.included(i), oracle::in_atlas(atlas, p));
  }
}

TEST(Atlas, ResolutionConvergence) {
  const auto atlas = default_atlas();
  double prev = 0;
  for (double s : {2.0, 1.0, 0.5}) {
    const auto n = static_cast<std::int64_t>(std::lround(100 / s));
    const auto g = GridSpec::axis_aligned({n, n, n}, {s, s, s}, Point3(-50 + s / 3, -50 + s / 7, -60 + s / 5));
    const double vol = static_cast<double>(rasterize_atlas(atlas, g).count()) * s * s * s;
    if (prev > 0 && s < 2.0) {
      EXPECT_LT(std::abs(vol - prev) / vol, 0.02) << "spacing " << s;
    }
    prev = vol;
  }
}

TEST(Atlas, EmptyRoiError) {
  const auto g = GridSpec::axis_aligned({4, 4, 4}, {1, 1, 1}, Point3(200, 200, 200));
  try {
    rasterize_atlas(default_atlas(), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyRoi);
  }
}

TEST(Atlas, JsonRoundTrip) {
  std::mt19937_64 rng(4);
  const auto dir = oracle::temp_dir("atlas");
  const auto a = random_atlas(rng);
  write_atlas_json(a, dir / "a.json");
  EXPECT_EQ(read_atlas_json(dir / "a.json"), a);
  EXPECT_EQ(atlas_from_json(to_json(default_atlas())), default_atlas());
}

TEST(Atlas, RoiMaskValidation) {
  const auto g = GridSpec::centered({2, 1, 1}, {1, 1, 1});
  EXPECT_THROW(RoiMask(Volume(g, std::vector<float>{0.0f, 2.0f})), Error);
  try {
    RoiMask(Volume(g, 0.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyRoi);
  }
}

TEST(Atlas, ApplyRoiGridMismatch) {
  const auto g = GridSpec::centered({2, 2, 2}, {1, 1, 1});
  const RoiMask z(Volume(g, 1.0f));
  EXPECT_EQ(apply_roi(Volume(g, 5.0f), z).included_count(), 8u);
  try {
    apply_roi(Volume(GridSpec::centered({2, 2, 2}, {1, 1, 1.01}), 5.0f), z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
  }
}

TEST(Atlas, WarpMaskTranslation) {
  const auto g = GridSpec::axis_aligned({10, 10, 10}, {1, 1, 1}, Point3::Zero());
  std::vector<float> d(g.voxel_count(), 0.0f);
  d[g.index(2, 3, 4)] = 1.0f;
  const RoiMask z(Volume(g, d));
  const RoiMask w = warp_mask(z, AffineTransform::translation(Vector3(3, 1, -2)), g);
  EXPECT_EQ(w.count(), 1u);
  EXPECT_TRUE(w.included(g.index(5, 4, 2)));
  EXPECT_THROW(warp_mask(z, AffineTransform::translation(Vector3(30, 0, 0)), g), Error);
}
