#pragma once

// Serial implementations of the parallel kernels. They favour the plainest
// possible loop structure and serve as baselines for tests and benchmarks.

#include "dbsloc/atlas.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/registration.hpp"
#include "dbsloc/sampling.hpp"
#include "dbsloc/segmentation.hpp"

namespace dbs::reference {

RoiMask rasterize_atlas(const AtlasBoxStack& atlas, const GridSpec& grid);

Volume resample(const Volume& v, const AffineTransform& t, const GridSpec& target,
                Interpolation interpolation = Interpolation::Trilinear, float outside_value = kAirHu);

std::vector<CentroidSet> segment_volume(const MaskedVolume& masked, double k, const SegmentationOptions& options);

double similarity(const Volume& fixed, const Volume& moving, const AffineTransform& t, Metric metric);

Phantom generate_phantom(const PhantomSpec& spec);

}  // namespace dbs::reference
