#include "dbsloc/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "dbsloc/error.hpp"
#include "text_format.hpp"

namespace dbs {

std::string_view to_string(ElectrodeLabel label) noexcept {
  switch (label) {
    case ElectrodeLabel::Left: return "left";
    case ElectrodeLabel::Right: return "right";
    case ElectrodeLabel::Unassigned: return "unassigned";
  }
  return "unassigned";
}

std::optional<ElectrodeLabel> parse_label(std::string_view text) noexcept {
  if (text == "left") return ElectrodeLabel::Left;
  if (text == "right") return ElectrodeLabel::Right;
  if (text == "unassigned") return ElectrodeLabel::Unassigned;
  return std::nullopt;
}

double adaptive_threshold(double mu, double sigma, double k) { return k * sigma + mu; }

SliceStats SliceStats::with_k(double k) const {
  SliceStats s = *this;
  s.threshold = adaptive_threshold(mu, sigma, k);
  return s;
}

std::optional<SliceStats> slice_stats(const MaskedVolume& masked, std::int64_t slice_index, double k) {
  const auto& grid = masked.grid();
  if (slice_index < 0 || slice_index >= grid.dims[2]) {
    throw Error(ErrorKind::InvalidArgument, "slice index out of range");
  }
  const std::size_t n = grid.slice_size();
  const std::size_t base = n * static_cast<std::size_t>(slice_index);
  const auto data = masked.volume.data();
  std::int64_t count = 0;
  double sum = 0.0;
  for (std::size_t i = base; i < base + n; ++i) {
    if (masked.included[i]) {
      sum += data[i];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  const double mu = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = base; i < base + n; ++i) {
    if (masked.included[i]) {
      const double d = data[i] - mu;
      ss += d * d;
    }
  }
  const double sigma = std::sqrt(ss / static_cast<double>(count));
  return SliceStats{slice_index, mu, sigma, adaptive_threshold(mu, sigma, k), count};
}

SliceMask binarize_slice(const MaskedVolume& masked, const SliceStats& stats) {
  const auto& grid = masked.grid();
  SliceMask mask(grid.dims[0], grid.dims[1]);
  const std::size_t n = grid.slice_size();
  const std::size_t base = n * static_cast<std::size_t>(stats.slice_index);
  const auto data = masked.volume.data();
  for (std::size_t i = 0; i < n; ++i) {
    mask.bits[i] = masked.included[base + i] && static_cast<double>(data[base + i]) >= stats.threshold ? 1 : 0;
  }
  return mask;
}

namespace {

class UnionFind {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  std::int32_t unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    return a;
  }

 private:
  std::vector<std::int32_t> parent_;
};

/// Labels active pixels given as raster-ascending in-slice offsets. `scratch`
/// must hold width*height entries set to -1; it is restored before return.
std::vector<Component> label_pixels(std::span<const std::uint32_t> offsets, std::int64_t width,
                                    std::int64_t height, Connectivity connectivity,
                                    std::vector<std::int32_t>& scratch) {
  UnionFind uf;
  const bool eight = connectivity == Connectivity::Eight;
  for (const std::uint32_t off : offsets) {
    const std::int64_t i = off % width;
    const std::int64_t j = off / width;
    std::int32_t label = -1;
    auto visit = [&](std::int64_t ni, std::int64_t nj) {
      if (ni < 0 || ni >= width || nj < 0 || nj >= height) return;
      const std::int32_t l = scratch[static_cast<std::size_t>(ni + nj * width)];
      if (l < 0) return;
      label = label < 0 ? uf.find(l) : uf.unite(label, l);
    };
    visit(i - 1, j);
    visit(i, j - 1);
    if (eight) {
      visit(i - 1, j - 1);
      visit(i + 1, j - 1);
    }
    scratch[off] = label < 0 ? uf.make() : label;
  }

  std::vector<Component> components;
  std::vector<std::int32_t> root_to_component;
  for (const std::uint32_t off : offsets) {
    const auto root = static_cast<std::size_t>(uf.find(scratch[off]));
    if (root >= root_to_component.size()) root_to_component.resize(root + 1, -1);
    if (root_to_component[root] < 0) {
      root_to_component[root] = static_cast<std::int32_t>(components.size());
      components.emplace_back();
    }
    components[static_cast<std::size_t>(root_to_component[root])].pixels.push_back(
        {static_cast<std::int64_t>(off % width), static_cast<std::int64_t>(off / width)});
  }
  for (const std::uint32_t off : offsets) scratch[off] = -1;
  return components;
}

CentroidSet segment_slice(const MaskedVolume& masked, std::int64_t slice, std::span<const std::uint32_t> active,
                          const SegmentationOptions& options, std::vector<std::int32_t>& scratch) {
  const auto& g = masked.grid();
  const auto components = label_pixels(active, g.dims[0], g.dims[1], options.connectivity, scratch);
  return extract_centroids(masked, slice, components, options.filter);
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

std::vector<Component> connected_components_2d(const SliceMask& mask, Connectivity connectivity) {
  std::vector<std::uint32_t> offsets;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) offsets.push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<std::int32_t> scratch(mask.bits.size(), -1);
  return label_pixels(offsets, mask.width, mask.height, connectivity, scratch);
}

AreaFilter AreaFilter::for_grid(const GridSpec& grid, double disc_diameter_mm) {
  const double r = 0.5 * disc_diameter_mm;
  const double pixel_area = grid.spacing[0] * grid.spacing[1];
  AreaFilter f;
  f.min_area = 1;
  f.max_area = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(std::numbers::pi * r * r / pixel_area)));
  return f;
}

SegmentationOptions SegmentationOptions::for_grid(const GridSpec& grid) {
  SegmentationOptions o;
  o.filter = AreaFilter::for_grid(grid);
  return o;
}

CentroidSet extract_centroids(const MaskedVolume& masked, std::int64_t slice_index,
                              std::span<const Component> components, const AreaFilter& filter) {
  const auto& g = masked.grid();
  CentroidSet set{slice_index, {}, false};
  for (const auto& c : components) {
    const auto area = static_cast<std::int64_t>(c.pixels.size());
    if (area < filter.min_area || area > filter.max_area) continue;
    double si = 0.0, sj = 0.0, sv = 0.0;
    for (const auto& [i, j] : c.pixels) {
      si += static_cast<double>(i);
      sj += static_cast<double>(j);
      sv += masked.volume.at(i, j, slice_index);
    }
    const double n = static_cast<double>(area);
    set.centroids.push_back(
        {g.world(si / n, sj / n, static_cast<double>(slice_index)), area, sv / n, ElectrodeLabel::Unassigned});
  }
  return set;
}

std::vector<CentroidSet> classify_electrodes(std::vector<CentroidSet> sets, const ClassifyOptions& options) {
  for (auto& s : sets) {
    if (s.centroids.size() > 2) {
      s.ambiguous = true;
      std::stable_sort(s.centroids.begin(), s.centroids.end(), [](const Centroid& a, const Centroid& b) {
        if (a.area_voxels != b.area_voxels) return a.area_voxels > b.area_voxels;
        return a.mean_intensity > b.mean_intensity;
      });
      s.centroids.resize(2);
    }
  }

  std::vector<double> xs;
  for (const auto& s : sets)
    for (const auto& c : s.centroids) xs.push_back(c.position.x());
  if (xs.empty()) return sets;

  const double midline = median(xs);
  double sum_l = 0.0, sum_r = 0.0;
  std::size_t n_l = 0, n_r = 0;
  for (double x : xs) {
    if (x < midline) {
      sum_l += x;
      ++n_l;
    } else if (x > midline) {
      sum_r += x;
      ++n_r;
    }
  }
  const double mean_all = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const bool single_cluster =
      n_l == 0 || n_r == 0 ||
      (sum_r / static_cast<double>(n_r)) - (sum_l / static_cast<double>(n_l)) < options.min_cluster_separation_mm;

  if (single_cluster) {
    const ElectrodeLabel side = mean_all < 0.0 ? ElectrodeLabel::Left : ElectrodeLabel::Right;
    for (auto& s : sets)
      for (auto& c : s.centroids) c.label = side;
    return sets;
  }

  const double mean_l = sum_l / static_cast<double>(n_l);
  const double mean_r = sum_r / static_cast<double>(n_r);
  for (auto& s : sets) {
    for (auto& c : s.centroids) {
      const double x = c.position.x();
      if (x < midline) {
        c.label = ElectrodeLabel::Left;
      } else if (x > midline) {
        c.label = ElectrodeLabel::Right;
      } else {
        c.label = std::abs(x - mean_l) <= std::abs(x - mean_r) ? ElectrodeLabel::Left : ElectrodeLabel::Right;
      }
    }
    if (s.centroids.size() == 2 && s.centroids[0].label == s.centroids[1].label) {
      const bool first_is_left = s.centroids[0].position.x() <= s.centroids[1].position.x();
      s.centroids[0].label = first_is_left ? ElectrodeLabel::Left : ElectrodeLabel::Right;
      s.centroids[1].label = first_is_left ? ElectrodeLabel::Right : ElectrodeLabel::Left;
    }
  }
  return sets;
}

std::vector<CentroidSet> segment_volume(const MaskedVolume& masked, double k, const SegmentationOptions& options) {
  const auto& g = masked.grid();
  if (masked.included_count() == 0) throw Error(ErrorKind::EmptyRoi, "empty ROI");
  const std::int64_t nz = g.dims[2];
  std::vector<CentroidSet> sets(static_cast<std::size_t>(nz));

#pragma omp parallel
  {
    std::vector<std::int32_t> scratch(g.slice_size(), -1);
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t z = 0; z < nz; ++z) {
      const auto stats = slice_stats(masked, z, k);
      if (!stats) {
        sets[static_cast<std::size_t>(z)] = CentroidSet{z, {}, false};
        continue;
      }
      const SliceMask mask = binarize_slice(masked, *stats);
      std::vector<std::uint32_t> active;
      for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i]) active.push_back(static_cast<std::uint32_t>(i));
      }
      sets[static_cast<std::size_t>(z)] = segment_slice(masked, z, active, options, scratch);
    }
  }
  return classify_electrodes(std::move(sets), options.classify);
}

SegmentationIndex::SegmentationIndex(const MaskedVolume& masked) : masked_(&masked) {
  const auto& g = masked.grid();
  const std::int64_t nz = g.dims[2];
  stats_.resize(static_cast<std::size_t>(nz));
  sorted_.resize(static_cast<std::size_t>(nz));
  const std::size_t n = g.slice_size();
  const auto data = masked.volume.data();

#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t z = 0; z < nz; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    stats_[zi] = slice_stats(masked, z, 0.0);
    const std::size_t base = n * zi;
    auto& list = sorted_[zi];
    for (std::size_t i = 0; i < n; ++i) {
      if (masked.included[base + i]) list.push_back(static_cast<std::uint32_t>(i));
    }
    std::stable_sort(list.begin(), list.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return data[base + a] > data[base + b]; });
  }
}

std::vector<CentroidSet> SegmentationIndex::segment(double k, const SegmentationOptions& options) const {
  const auto& g = masked_->grid();
  const std::int64_t nz = g.dims[2];
  const std::size_t n = g.slice_size();
  const auto data = masked_->volume.data();
  std::vector<CentroidSet> sets(static_cast<std::size_t>(nz));
  std::vector<std::int32_t> scratch(n, -1);
  std::vector<std::uint32_t> active;
  for (std::int64_t z = 0; z < nz; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    if (!stats_[zi]) {
      sets[zi] = CentroidSet{z, {}, false};
      continue;
    }
    const double t = adaptive_threshold(stats_[zi]->mu, stats_[zi]->sigma, k);
    const std::size_t base = n * zi;
    const auto& list = sorted_[zi];
    const auto end = std::partition_point(list.begin(), list.end(), [&](std::uint32_t off) {
      return static_cast<double>(data[base + off]) >= t;
    });
    active.assign(list.begin(), end);
    std::sort(active.begin(), active.end());
    sets[zi] = segment_slice(*masked_, z, active, options, scratch);
  }
  return classify_electrodes(std::move(sets), options.classify);
}

void write_centroids_csv(std::span<const CentroidSet> sets, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write centroid file " + path.string());
  out << "slice_index,x_mm,y_mm,z_mm,area_voxels,mean_hu,label\n";
  for (const auto& s : sets) {
    for (const auto& c : s.centroids) {
      out << s.slice_index << ',' << detail::fixed6(c.position.x()) << ',' << detail::fixed6(c.position.y()) << ','
          << detail::fixed6(c.position.z()) << ',' << c.area_voxels << ',' << detail::fixed6(c.mean_intensity) << ','
          << to_string(c.label) << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace dbs
