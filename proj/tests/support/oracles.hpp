#pragma once

// Independent reference computations for tests. Nothing here calls the
// library routine it is used to check.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dbsloc/atlas.hpp"
#include "dbsloc/segmentation.hpp"
#include "dbsloc/trajectory.hpp"
#include "dbsloc/volume.hpp"

namespace oracle {

using Pixel = std::array<std::int64_t, 2>;
using Partition = std::vector<std::vector<Pixel>>;

/// Breadth-first flood fill. Components ordered by their first pixel in
/// raster order, pixels within a component sorted in raster order.
Partition flood_fill(const dbs::SliceMask& mask, int connectivity);

/// Direct point-in-box test against the atlas ranges.
bool in_atlas(const dbs::AtlasBoxStack& atlas, const dbs::Point3& p);

/// Mean world position of the listed voxel centres on one slice.
dbs::Point3 coordinate_mean(const dbs::GridSpec& grid, const std::vector<Pixel>& pixels, std::int64_t slice);

/// Random polyline with strictly ascending z.
dbs::Trajectory random_polyline(std::mt19937_64& rng, int min_points = 2, int max_points = 30);

/// Default phantom on a coarser grid with asymmetric bright inserts, used as
/// the registration fixture.
dbs::Volume registration_fixture(double spacing = 2.9, std::uint64_t seed = 0);

/// Fresh empty directory under the system temp path.
std::filesystem::path temp_dir(const std::string& tag);

std::string slurp(const std::filesystem::path& path);

/// Runs the command-line tool with the given arguments; returns its exit code.
int run_cli(const std::string& args);

}  // namespace oracle
