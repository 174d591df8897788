#include "oracles.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dbsloc/phantom.hpp"

namespace oracle {

Partition flood_fill(const dbs::SliceMask& mask, int connectivity) {
  const std::int64_t w = mask.width, h = mask.height;
  std::vector<int> seen(static_cast<std::size_t>(w * h), 0);
  Partition out;
  for (std::int64_t j = 0; j < h; ++j) {
    for (std::int64_t i = 0; i < w; ++i) {
      if (!mask.at(i, j) || seen[static_cast<std::size_t>(i + w * j)]) continue;
      std::vector<Pixel> comp;
      std::deque<Pixel> queue{{i, j}};
      seen[static_cast<std::size_t>(i + w * j)] = 1;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        comp.push_back(p);
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            if (connectivity == 4 && di != 0 && dj != 0) continue;
            const std::int64_t ni = p[0] + di, nj = p[1] + dj;
            if (ni < 0 || nj < 0 || ni >= w || nj >= h) continue;
            auto& s = seen[static_cast<std::size_t>(ni + w * nj)];
            if (s || !mask.at(ni, nj)) continue;
            s = 1;
            queue.push_back({ni, nj});
          }
        }
      }
      std::sort(comp.begin(), comp.end(), [](const Pixel& a, const Pixel& b) {
        return a[1] != b[1] ? a[1] < b[1] : a[0] < b[0];
      });
      out.push_back(std::move(comp));
    }
  }
  return out;
}

bool in_atlas(const dbs::AtlasBoxStack& atlas, const dbs::Point3& p) {
  if (p.x() < atlas.sagittal.lo || p.x() > atlas.sagittal.hi) return false;
  for (const auto& s : atlas.segments) {
    if (p.z() >= s.axial.lo && p.z() <= s.axial.hi && p.y() >= s.coronal.lo && p.y() <= s.coronal.hi) return true;
  }
  return false;
}

dbs::Point3 coordinate_mean(const dbs::GridSpec& grid, const std::vector<Pixel>& pixels, std::int64_t slice) {
  dbs::Point3 sum = dbs::Point3::Zero();
  for (const auto& [i, j] : pixels) {
    const Eigen::Vector4d h(static_cast<double>(i), static_cast<double>(j), static_cast<double>(slice), 1.0);
    sum += (grid.voxel_to_world.matrix() * h).head<3>();
  }
  return sum / static_cast<double>(pixels.size());
}

dbs::Trajectory random_polyline(std::mt19937_64& rng, int min_points, int max_points) {
  std::uniform_int_distribution<int> count(min_points, max_points);
  std::uniform_real_distribution<double> step(0.05, 4.0), lateral(-3.0, 3.0), start(-50.0, 50.0);
  dbs::Trajectory t;
  t.label = dbs::ElectrodeLabel::Left;
  dbs::Point3 p(start(rng), start(rng), start(rng));
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    t.points.push_back(p);
    p += dbs::Vector3(lateral(rng), lateral(rng), step(rng));
  }
  return t;
}

dbs::Volume registration_fixture(double spacing, std::uint64_t seed) {
  dbs::PhantomSpec spec;
  const double extent = 192 * 1.45;
  const auto n = static_cast<std::int64_t>(std::lround(extent / spacing));
  spec.dims = {n, n, static_cast<std::int64_t>(std::lround(180 * 1.45 / spacing))};
  spec.spacing = spacing;
  spec.seed = seed;
  const dbs::Phantom ph = dbs::generate(spec);
  struct Insert {
    dbs::Point3 c;
    dbs::Vector3 r;
    float value;
  };
  const std::vector<Insert> inserts = {{{25, 30, 10}, {18, 12, 10}, 1500.0f},
                                       {{-28, -35, -30}, {10, 16, 14}, 1200.0f},
                                       {{-8, 45, 35}, {9, 9, 16}, 1800.0f},
                                       {{30, -20, -40}, {12, 8, 8}, 900.0f}};
  const auto& g = ph.volume.grid();
  std::vector<float> data(ph.volume.data().begin(), ph.volume.data().end());
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const auto [i, j, k] = g.ijk(idx);
    const dbs::Point3 p = g.world(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
    for (const auto& ins : inserts) {
      if (((p - ins.c).array() / ins.r.array()).square().sum() <= 1.0) data[idx] = ins.value;
    }
  }
  return {g, std::move(data)};
}

std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dbsloc-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DBSLOC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace oracle
