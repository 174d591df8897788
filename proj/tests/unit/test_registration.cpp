#include <gtest/gtest.h>

#include <numbers>
#include <set>

#include "dbsloc/error.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/registration.hpp"
#include "oracles.hpp"

using namespace dbs;

namespace {

const Volume& coarse_phantom() {
  static const Volume v = [] {
    PhantomSpec spec;
    spec.dims = {48, 48, 45};
    spec.spacing = 5.8;
    return generate(spec).volume;
  }();
  return v;
}

// Mean of each 2x2x2 block, clamped at odd edges.
float block_mean(const Volume& v, std::int64_t i, std::int64_t j, std::int64_t k) {
  double s = 0;
  int n = 0;
  for (int c = 0; c < 8; ++c) {
    const std::int64_t a = 2 * i + (c & 1), b = 2 * j + ((c >> 1) & 1), d = 2 * k + ((c >> 2) & 1);
    if (a >= v.dims()[0] || b >= v.dims()[1] || d >= v.dims()[2]) continue;
    s += v.at(a, b, d);
    ++n;
  }
  return static_cast<float>(s / n);
}

}  // namespace

TEST(Registration, StratifiedSamples) {
  const auto a = stratified_samples(100000, 0.25, 3);
  EXPECT_EQ(a, stratified_samples(100000, 0.25, 3));
  EXPECT_NE(a, stratified_samples(100000, 0.25, 4));
  EXPECT_EQ(a.size(), 25000u);
  for (std::size_t b = 0; b < a.size(); ++b) {
    EXPECT_GE(a[b], 4 * b);
    EXPECT_LT(a[b], 4 * b + 4);
  }
  const auto all = stratified_samples(1000, 1.0, 9);
  ASSERT_EQ(all.size(), 1000u);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Registration, SelfSimilarity) {
  const Volume& v = coarse_phantom();
  EXPECT_NEAR(similarity(v, v, AffineTransform::identity(), Metric::Ncc), -1.0, 1e-9);
  EXPECT_EQ(similarity(v, v, AffineTransform::identity(), Metric::Ssd), 0.0);
  const auto shift = AffineTransform::translation(Vector3(7, 0, 0));
  EXPECT_GT(similarity(v, v, shift, Metric::Ncc), -0.99);
  EXPECT_GT(similarity(v, v, shift, Metric::Ssd), 0.0);
}

TEST(Registration, SsdIsMeanSquaredDifference) {
  const auto g = GridSpec::centered({10, 10, 10}, {1, 1, 1});
  std::vector<float> a(g.voxel_count()), b(g.voxel_count());
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(i % 17);
    b[i] = static_cast<float>((i * 7) % 13);
    ss += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const Volume fa(g, a), fb(g, b);
  EXPECT_NEAR(similarity(fa, fb, AffineTransform::identity(), Metric::Ssd), ss / 1000.0, 1e-9);
}

TEST(Registration, InsufficientOverlap) {
  const Volume& v = coarse_phantom();
  try {
    similarity(v, v, AffineTransform::translation(Vector3(1000, 0, 0)), Metric::Ncc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientOverlap);
  }
  const MetricEvaluator ev(v, v, Metric::Ncc, 0.25, 0);
  EXPECT_FALSE(ev.evaluate(AffineTransform::translation(Vector3(1000, 0, 0))).has_value());
  EXPECT_TRUE(ev.evaluate(AffineTransform::identity()).has_value());
}

TEST(Registration, DownsampleBlockAverage) {
  const Volume& v = coarse_phantom();
  const Volume d = downsample2(v);
  EXPECT_EQ(d.dims(), (Dims{24, 24, 22}));
  for (std::int64_t k = 0; k < 22; k += 3)
    for (std::int64_t j = 0; j < 24; j += 2)
      for (std::int64_t i = 0; i < 24; ++i) ASSERT_NEAR(d.at(i, j, k), block_mean(v, i, j, k), 1e-3);
  // Coarse voxel centre sits at the centre of its block.
  const Point3 expect = v.grid().world(0.5, 0.5, 0.5);
  EXPECT_LT((d.grid().world(0, 0, 0) - expect).norm(), 1e-9);
}

TEST(Registration, ConfigValidation) {
  RegistrationConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.sample_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.pyramid_levels = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.parameter_tolerance = -1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Registration, SelfRegistrationStaysPut) {
  const Volume& v = coarse_phantom();
  RegistrationConfig cfg;
  const auto r = register_rigid(v, v, cfg);
  EXPECT_TRUE(r.transform.approx_equal(AffineTransform::identity(), cfg.parameter_tolerance));
  const auto a = register_affine(v, v, AffineTransform::identity(), cfg);
  EXPECT_TRUE(a.transform.approx_equal(AffineTransform::identity(), cfg.parameter_tolerance));
}

TEST(Registration, TraceNonIncreasingPerLevel) {
  const Volume& v = coarse_phantom();
  const auto p = perturb(v, {Vector3(4, -3, 2), Vector3(3, -4, 5)});
  const auto r = register_rigid(v, p.volume, {});
  ASSERT_EQ(r.trace.size(), 3u);
  for (const auto& level : r.trace) {
    ASSERT_FALSE(level.best_values.empty());
    for (std::size_t i = 1; i < level.best_values.size(); ++i)
      EXPECT_LE(level.best_values[i], level.best_values[i - 1]) << "level " << level.level;
  }
  EXPECT_EQ(r.trace.back().level, 0);
}

TEST(Registration, RecoversModestRigidMotion) {
  const Volume& v = coarse_phantom();
  const auto p = perturb(v, {Vector3(6, -4, 3), Vector3(-5, 4, 6)});
  const auto r = register_rigid(v, p.volume, {});
  const auto residual = compose(r.transform, p.transform);
  const Vector3 rot = matrix_to_euler(residual.linear()) * 180.0 / std::numbers::pi;
  const Point3 c = v.grid().center_world();
  EXPECT_LT(rot.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LT((residual.apply(c) - c).cwiseAbs().maxCoeff(), 1.0);
}

TEST(Registration, AffineNeverWorseThanInit) {
  const Volume& v = coarse_phantom();
  const auto p = perturb(v, {Vector3(2, 1, -1), Vector3(1, 0, 2)});
  RegistrationConfig cfg;
  cfg.max_iterations_per_level = 3;
  cfg.metric = Metric::Ssd;
  cfg.sample_fraction = 1.0;
  for (const auto& init : {AffineTransform::identity(), invert(p.transform),
                           AffineTransform::rigid(Vector3(0.3, -0.2, 0.1), Vector3(10, 5, -8))}) {
    const auto r = register_affine(v, p.volume, init, cfg);
    EXPECT_LE(r.metric_value, similarity(v, p.volume, init, Metric::Ssd) + 1e-9);
    EXPECT_NEAR(r.metric_value, similarity(v, p.volume, r.transform, Metric::Ssd), 1e-6 * std::abs(r.metric_value));
  }
}

TEST(Registration, MomentsAlignmentUndoesRotation) {
  const Volume& v = coarse_phantom();
  const auto p = perturb(v, {Vector3(5, 0, -5), Vector3(10, -10, 10)});
  const auto m = moments_alignment(v, p.volume);
  ASSERT_TRUE(m.has_value());
  const auto residual = compose(*m, p.transform);
  EXPECT_LT(matrix_to_euler(residual.linear()).cwiseAbs().maxCoeff() * 180 / std::numbers::pi, 10.0);
  EXPECT_NEAR(m->determinant(), 1.0, 1e-9);
}
