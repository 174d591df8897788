#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "dbsloc/error.hpp"
#include "dbsloc/trajectory.hpp"
#include "oracles.hpp"

using namespace dbs;

namespace {

// Point at arc length s along the polyline, walking segments from the start.
Point3 point_at_arc(const std::vector<Point3>& p, double s) {
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double len = (p[i] - p[i - 1]).norm();
    if (s <= len) return p[i - 1] + (s / len) * (p[i] - p[i - 1]);
    s -= len;
  }
  return p.back();
}

std::vector<CentroidSet> sets_from(const std::vector<Point3>& pts, ElectrodeLabel label) {
  std::vector<CentroidSet> sets;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CentroidSet s{static_cast<std::int64_t>(i), {}, false};
    s.centroids.push_back({pts[i], 3, 3000.0, label});
    sets.push_back(s);
  }
  return sets;
}

}  // namespace

TEST(Trajectory, ResampleUniformArcLength) {
  std::mt19937_64 rng(1000);
  const double h = 0.63;
  for (int trial = 0; trial < 1000; ++trial) {
    const Trajectory t = oracle::random_polyline(rng);
    const Trajectory r = resample_trajectory(t, h);
    ASSERT_NO_THROW(r.validate());
    EXPECT_EQ(r.points.front(), t.points.front());
    EXPECT_EQ(r.points.back(), t.points.back());
    const double total = t.arc_length();
    ASSERT_EQ(r.points.size(), static_cast<std::size_t>(std::ceil(total / h - 1e-12)) + 1) << "trial " << trial;
    for (std::size_t i = 1; i + 1 < r.points.size(); ++i) {
      ASSERT_LT((r.points[i] - point_at_arc(t.points, static_cast<double>(i) * h)).norm(), 1e-9) << trial;
    }
    const double last = total - static_cast<double>(r.points.size() - 2) * h;
    EXPECT_GT(last, 0.0);
    EXPECT_LE(last, h + 1e-9);
    EXPECT_LE(r.arc_length(), total + 1e-9);
    EXPECT_EQ(extent(r).start_mm, extent(t).start_mm);
    EXPECT_EQ(extent(r).end_mm, extent(t).end_mm);
  }
}

TEST(Trajectory, ResampleStraightPreservesLength) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1), len(1, 100), sp(0.1, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector3 d(u(rng), u(rng), 1.0 + std::abs(u(rng)));
    d.normalize();
    Trajectory t;
    const Point3 a(u(rng) * 30, u(rng) * 30, u(rng) * 30);
    const double l = len(rng);
    t.points = {a, a + 0.3 * l * d, a + l * d};
    const double s = sp(rng);
    const Trajectory r = resample_trajectory(t, s);
    EXPECT_NEAR(r.arc_length(), l, 1e-6 * l);
    for (std::size_t i = 1; i + 1 < r.points.size(); ++i) EXPECT_NEAR((r.points[i] - r.points[i - 1]).norm(), s, 1e-9);
  }
}

TEST(Trajectory, ResampleRejectsBadInput) {
  Trajectory t;
  t.points = {Point3(0, 0, 0), Point3(0, 0, 1)};
  EXPECT_THROW(resample_trajectory(t, 0.0), Error);
  EXPECT_THROW(resample_trajectory(t, -1.0), Error);
  t.points = {Point3(0, 0, 0), Point3(0, 0, 0)};
  EXPECT_THROW(resample_trajectory(t, 0.5), Error);
}

TEST(Trajectory, ExtentOfDefaultSpan) {
  Trajectory t;
  t.points = {Point3(10, 0, -24.429), Point3(12, 5, 10), Point3(14, 20, 49.357)};
  const auto e = extent(t);
  EXPECT_DOUBLE_EQ(e.start_mm, -24.429);
  EXPECT_DOUBLE_EQ(e.end_mm, 49.357);
  EXPECT_NEAR(e.absolute_distance_mm, 73.786, 1e-9);
}

TEST(Trajectory, BuildIsSubsequenceAndDropsOutliers) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> jitter(0, 0.2);
  std::vector<Point3> pts;
  for (int i = 0; i < 40; ++i) pts.emplace_back(10 + 0.2 * i + jitter(rng), -5 + 0.5 * i + jitter(rng), -20 + 1.45 * i);
  pts[7].x() += 15;   // stray blob
  pts[30].y() -= 12;  // another
  const auto sets = sets_from(pts, ElectrodeLabel::Right);
  const Trajectory t = build_trajectory(sets, ElectrodeLabel::Right, {0.0, 7.5, {}});
  EXPECT_EQ(t.points.size(), 38u);
  for (const auto& p : t.points) EXPECT_NE(std::find(pts.begin(), pts.end(), p), pts.end());
  EXPECT_EQ(std::find(t.points.begin(), t.points.end(), pts[7]), t.points.end());
  EXPECT_EQ(std::find(t.points.begin(), t.points.end(), pts[30]), t.points.end());
  EXPECT_NEAR(t.native_spacing, 1.45, 1e-9);
  EXPECT_EQ(t.source_k, 7.5);
  EXPECT_EQ(t.label, ElectrodeLabel::Right);
}

TEST(Trajectory, BuildIgnoresOtherLabel) {
  std::vector<Point3> pts = {Point3(0, 0, 0), Point3(0, 0, 1), Point3(0, 0, 2)};
  const auto sets = sets_from(pts, ElectrodeLabel::Left);
  try {
    build_trajectory(sets, ElectrodeLabel::Right);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TrajectoryNotFound);
  }
  EXPECT_EQ(build_trajectory(sets, ElectrodeLabel::Left).points.size(), 3u);
}

TEST(Trajectory, BuildPicksLargestPerSlice) {
  CentroidSet a{0, {{Point3(1, 0, 0), 2, 0, ElectrodeLabel::Left}, {Point3(2, 0, 0), 5, 0, ElectrodeLabel::Left}}, true};
  CentroidSet b{1, {{Point3(2, 0, 1), 3, 0, ElectrodeLabel::Left}}, false};
  const std::vector<CentroidSet> sets{a, b};
  const Trajectory t = build_trajectory(sets, ElectrodeLabel::Left);
  EXPECT_EQ(t.points.front(), Point3(2, 0, 0));
}

TEST(Trajectory, FitLineRecoversDirection) {
  std::vector<Point3> pts;
  const Vector3 d = Vector3(1, 2, 3).normalized();
  for (int i = 0; i < 10; ++i) pts.push_back(Point3(4, 5, 6) - d * i);
  const LineFit f = fit_line(pts);
  EXPECT_LT((f.direction - d).norm(), 1e-12);
  EXPECT_LT(f.rms_residual, 1e-12);
  EXPECT_NEAR(distance_to_line(f, Point3(4, 5, 6) + Vector3(2, -1, 0).normalized() * 3), 3.0, 1e-12);
  const std::vector<Point3> same(3, Point3(1, 1, 1));
  EXPECT_THROW(fit_line(same), Error);
}

TEST(Trajectory, PointAtAxial) {
  Trajectory t;
  t.points = {Point3(0, 0, 0), Point3(2, 4, 2), Point3(2, 4, 6)};
  EXPECT_FALSE(point_at_axial(t, -0.1).has_value());
  EXPECT_FALSE(point_at_axial(t, 6.1).has_value());
  EXPECT_LT((*point_at_axial(t, 1.0) - Point3(1, 2, 1)).norm(), 1e-15);
  EXPECT_LT((*point_at_axial(t, 6.0) - Point3(2, 4, 6)).norm(), 1e-15);
}

TEST(Trajectory, CsvAndJsonRoundTrip) {
  std::mt19937_64 rng(12);
  const auto dir = oracle::temp_dir("traj");
  Trajectory a = oracle::random_polyline(rng), b = oracle::random_polyline(rng);
  a.label = ElectrodeLabel::Left;
  b.label = ElectrodeLabel::Right;
  a.native_spacing = 0.63;
  a.source_k = 7.885;
  const std::vector<Trajectory> both{a, b};
  write_trajectories_json(both, dir / "t.json");
  const auto j = read_trajectories_json(dir / "t.json");
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].points, a.points);
  EXPECT_EQ(j[1].points, b.points);
  EXPECT_EQ(j[0].source_k, 7.885);
  EXPECT_EQ(j[1].label, ElectrodeLabel::Right);

  write_trajectory_csv(both, dir / "t.csv");
  const auto c = read_trajectory_csv(dir / "t.csv");
  ASSERT_EQ(c.size(), 2u);
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_LT((c[0].points[i] - a.points[i]).norm(), 1e-5);
  EXPECT_EQ(c[1].label, ElectrodeLabel::Right);
}

TEST(Trajectory, CsvRejectsGarbage) {
  const auto dir = oracle::temp_dir("traj-bad");
  { std::ofstream(dir / "t.csv") << "label,point_index,x_mm,y_mm,z_mm\nleft,0,1,2,notanumber\n"; }
  EXPECT_THROW(read_trajectory_csv(dir / "t.csv"), Error);
  { std::ofstream(dir / "u.csv") << "a,b\n"; }
  EXPECT_THROW(read_trajectory_csv(dir / "u.csv"), Error);
}
