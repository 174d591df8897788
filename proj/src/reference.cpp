#include "dbsloc/reference.hpp"

#include <algorithm>
#include <cmath>

#include "dbsloc/error.hpp"

namespace dbs::reference {

RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid) {
  atlas.validate();
  grid.validate();
  std::vector<float> out(grid.voxel_count(), 0.0f);
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const auto [i, j, k] = grid.ijk(idx);
    const Point3 p = grid.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
    out[idx] = atlas.contains(p) ? 1.0f : 0.0f;
  }
  return RoiMask(Volume(grid, std::move(out)));
}

Volume resample(const Volume& v, const AffineTransform& t, const GridSpec& target, Interpolation interpolation,
                float outside_value) {
  target.validate();
  const VolumeSampler sampler(v);
  const AffineTransform inv = invert(t);
  std::vector<float> out(target.voxel_count());
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const auto [i, j, k] = target.ijk(idx);
    const Point3 src = inv.apply(target.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
    out[idx] = interpolation == Interpolation::Trilinear ? sampler.trilinear_world(src, outside_value)
                                                         : sampler.nearest_world(src, outside_value);
  }
  return {target, std::move(out)};
}

std::vector<CentroidSet> segment_volume(const MaskedVolume& masked, double k, const SegmentationOptions& options) {
  if (masked.included_count() == 0) throw Error(ErrorKind::EmptyRoi, "empty ROI");
  const std::int64_t nz = masked.grid().dims[2];
  std::vector<CentroidSet> sets;
  sets.reserve(static_cast<std::size_t>(nz));
  for (std::int64_t z = 0; z < nz; ++z) {
    const auto stats = slice_stats(masked, z, k);
    if (!stats) {
      sets.push_back(CentroidSet{z, {}, false});
      continue;
    }
    const auto components = connected_components_2d(binarize_slice(masked, *stats), options.connectivity);
    sets.push_back(extract_centroids(masked, z, components, options.filter));
  }
  return classify_electrodes(std::move(sets), options.classify);
}

double similarity(const Volume& fixed, const Volume& moving, const AffineTransform& t, Metric metric) {
  const VolumeSampler sampler(moving);
  const AffineTransform inv = invert(t);
  const auto& g = fixed.grid();
  double n = 0, sf = 0, sm = 0, sff = 0, smm = 0, sfm = 0, sdd = 0;
  for (std::size_t idx = 0; idx < fixed.size(); ++idx) {
    const auto [i, j, k] = g.ijk(idx);
    const Point3 p = inv.apply(g.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
    const float m = sampler.trilinear_world(p, std::nanf(""));
    if (std::isnan(m)) continue;
    const double f = fixed[idx];
    n += 1;
    sf += f;
    sm += m;
    sff += f * f;
    smm += double{m} * m;
    sfm += f * m;
    sdd += (f - m) * (f - m);
  }
  if (n < static_cast<double>(MetricEvaluator::kMinOverlap)) {
    throw Error(ErrorKind::InsufficientOverlap, "fewer than 100 overlapping samples");
  }
  if (metric == Metric::Ssd) return sdd / n;
  const double cov = sfm - sf * sm / n;
  const double vf = sff - sf * sf / n;
  const double vm = smm - sm * sm / n;
  if (!(vf > 0.0) || !(vm > 0.0)) return 0.0;
  return -std::clamp(cov / std::sqrt(vf * vm), -1.0, 1.0);
}

}  // namespace dbs::reference
