#include "dbsloc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>

#include "dbsloc/error.hpp"
#include "text_format.hpp"

namespace dbs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void KGrid::validate() const {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw Error(ErrorKind::InvalidArgument, "k grid needs lo < hi");
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorKind::InvalidArgument, "k grid step must be positive");
}

std::size_t KGrid::size() const {
  validate();
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

double case_error(const SegmentationIndex& index, const GroundTruth& gt, double k, const SegmentationOptions& seg,
                  const BuildOptions& build) {
  const auto sets = index.segment(k, seg);
  BuildOptions opts = build;
  opts.source_k = k;
  double worst = 0.0;
  for (const ElectrodeLabel label : gt.labels()) {
    try {
      const Trajectory t = build_trajectory(sets, label, opts);
      const DistanceMatch m = euclidean_distances(t, gt);
      if (m.matched.empty()) return kInf;
      double sum = 0.0;
      for (const auto& d : m.matched) sum += d.ed_mm;
      worst = std::max(worst, sum / static_cast<double>(m.matched.size()));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::TrajectoryNotFound || e.kind() == ErrorKind::InvalidArgument) return kInf;
      throw;
    }
  }
  return worst;
}

CalibrationResult calibrate_k(std::span<const CalibrationCase> cases, const CalibrationOptions& options) {
  const std::size_t n = options.grid.size();
  if (cases.empty()) throw Error(ErrorKind::InvalidArgument, "calibration needs at least one case");
  std::vector<SegmentationIndex> indices;
  indices.reserve(cases.size());
  for (const auto& c : cases) {
    if (c.masked == nullptr || c.ground_truth == nullptr) {
      throw Error(ErrorKind::InvalidArgument, "calibration case is missing data");
    }
    if (c.ground_truth->entries.empty()) throw Error(ErrorKind::GroundTruth, "calibration ground truth is empty");
    indices.emplace_back(*c.masked);
  }

  CalibrationResult result;
  result.points.resize(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    try {
      const double k = options.grid.at(static_cast<std::size_t>(i));
      double sum = 0.0;
      double worst = 0.0;
      for (std::size_t c = 0; c < cases.size(); ++c) {
        const double ed = case_error(indices[c], *cases[c].ground_truth, k, options.segmentation, options.build);
        sum += ed;
        worst = std::max(worst, ed);
      }
      result.points[static_cast<std::size_t>(i)] = {k, sum / static_cast<double>(cases.size()), worst};
    } catch (...) {
#pragma omp critical(dbsloc_calibration_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t best_begin = 0, best_len = 0;
  for (std::size_t i = 0; i < n;) {
    if (!(result.points[i].max_ed_mm < options.ed_threshold_mm)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && result.points[j].max_ed_mm < options.ed_threshold_mm) ++j;
    if (j - i > best_len) {
      best_begin = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len > 0) result.plateau = Range{result.points[best_begin].k, result.points[best_begin + best_len - 1].k};
  return result;
}

CalibrationResult calibrate_k(const MaskedVolume& masked, const GroundTruth& gt, const CalibrationOptions& options) {
  const CalibrationCase c{&masked, &gt};
  return calibrate_k(std::span<const CalibrationCase>(&c, 1), options);
}

void write_calibration_csv(const CalibrationResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  auto num = [](double v) { return std::isfinite(v) ? detail::fixed6(v) : std::string("inf"); };
  out << "k,mean_ed_mm,max_ed_mm\n";
  for (const auto& p : result.points) out << detail::fixed6(p.k) << ',' << num(p.mean_ed_mm) << ',' << num(p.max_ed_mm) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace dbs
