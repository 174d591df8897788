#include <gtest/gtest.h>

#include <random>

#include "dbsloc/parallel.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/reference.hpp"

using namespace dbs;

namespace {

const Phantom& phantom() {
  static const Phantom ph = [] {
    PhantomSpec spec;
    spec.dims = {96, 96, 90};
    spec.spacing = 2.9;
    return generate(spec);
  }();
  return ph;
}

class ThreadCounts : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { parallel::set_thread_count(GetParam()); }
  void TearDown() override { parallel::set_thread_count(0); }
};

bool identical(const Volume& a, const Volume& b) {
  return a.grid().same_geometry(b.grid(), 0) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(Parallel, BlockedReduceIsOrderIndependent) {
  std::vector<double> v(100000);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (auto& x : v) x = u(rng);
  auto run = [&] {
    return parallel::blocked_reduce(
        v.size(), 0.0,
        [&](std::size_t b, std::size_t e, double& acc) {
          for (std::size_t i = b; i < e; ++i) acc += v[i];
        },
        [](double& acc, double p) { acc += p; });
  };
  parallel::set_thread_count(1);
  const double one = run();
  parallel::set_thread_count(4);
  EXPECT_EQ(run(), one);
  parallel::set_thread_count(0);
}

TEST_P(ThreadCounts, RasterizeMatchesReference) {
  const auto& g = phantom().volume.grid();
  EXPECT_TRUE(identical(rasterize_atlas(default_atlas(), g).volume(), reference::rasterize_atlas(default_atlas(), g).volume()));
}

TEST_P(ThreadCounts, ResampleMatchesReference) {
  const auto& v = phantom().volume;
  const auto t = AffineTransform::rigid(Vector3(0.1, -0.05, 0.2), Vector3(3.3, -1.2, 4.4), v.grid().center_world());
  for (auto interp : {Interpolation::Trilinear, Interpolation::Nearest})
    EXPECT_TRUE(identical(resample(v, t, v.grid(), interp), reference::resample(v, t, v.grid(), interp)));
}

TEST_P(ThreadCounts, SegmentationMatchesReference) {
  const auto& v = phantom().volume;
  const MaskedVolume mv = apply_roi(v, rasterize_atlas(default_atlas(), v.grid()));
  const auto opts = SegmentationOptions::for_grid(v.grid());
  for (double k : {1.0, 7.885}) {
    const auto a = segment_volume(mv, k, opts), b = reference::segment_volume(mv, k, opts);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
      ASSERT_EQ(a[s].centroids.size(), b[s].centroids.size());
      for (std::size_t c = 0; c < a[s].centroids.size(); ++c) {
        EXPECT_EQ(a[s].centroids[c].position, b[s].centroids[c].position);
        EXPECT_EQ(a[s].centroids[c].label, b[s].centroids[c].label);
      }
    }
  }
}

TEST_P(ThreadCounts, SimilarityMatchesReference) {
  const auto& v = phantom().volume;
  const auto t = AffineTransform::rigid(Vector3(0.05, 0.0, -0.1), Vector3(2, 0, -1), v.grid().center_world());
  for (auto m : {Metric::Ssd, Metric::Ncc}) {
    const double a = similarity(v, v, t, m), b = reference::similarity(v, v, t, m);
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(b)));
  }
}

TEST_P(ThreadCounts, SimilarityIndependentOfThreads) {
  const auto& v = phantom().volume;
  const auto t = AffineTransform::translation(Vector3(1.7, 0.3, -0.9));
  parallel::set_thread_count(1);
  const double one = similarity(v, v, t, Metric::Ncc);
  parallel::set_thread_count(GetParam());
  EXPECT_EQ(similarity(v, v, t, Metric::Ncc), one);
}

TEST_P(ThreadCounts, PhantomMatchesReference) {
  PhantomSpec spec;
  spec.dims = {48, 48, 45};
  spec.spacing = 5.8;
  const Phantom a = generate(spec), b = reference::generate_phantom(spec);
  EXPECT_TRUE(identical(a.volume, b.volume));
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCounts, ::testing::Values(1, 2, 4));
