#include "dbsloc/registration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "dbsloc/error.hpp"
#include "dbsloc/parallel.hpp"

namespace dbs {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Moments {
  double n = 0, sf = 0, sm = 0, sff = 0, smm = 0, sfm = 0, sdd = 0;

  void add(double f, double m) {
    n += 1;
    sf += f;
    sm += m;
    sff += f * f;
    smm += m * m;
    sfm += f * m;
    sdd += (f - m) * (f - m);
  }
  void merge(const Moments& o) {
    n += o.n;
    sf += o.sf;
    sm += o.sm;
    sff += o.sff;
    smm += o.smm;
    sfm += o.sfm;
    sdd += o.sdd;
  }
};

double finish(const Moments& a, Metric metric) {
  if (metric == Metric::Ssd) return a.sdd / a.n;
  const double cov = a.sfm - a.sf * a.sm / a.n;
  const double vf = a.sff - a.sf * a.sf / a.n;
  const double vm = a.smm - a.sm * a.sm / a.n;
  if (!(vf > 0.0) || !(vm > 0.0)) return 0.0;
  return -std::clamp(cov / std::sqrt(vf * vm), -1.0, 1.0);
}

/// Parameter vector in mm-equivalent units mapped to an affine acting in
/// fixed space.
struct Parameterization {
  bool affine = false;
  Point3 center;
  double radius = 1.0;  ///< converts angles and matrix entries to mm at the volume rim

  std::size_t size() const { return affine ? 12 : 6; }

  AffineTransform to_transform(const std::vector<double>& p) const {
    const Vector3 t(p[0], p[1], p[2]);
    if (!affine) return AffineTransform::rigid(Vector3(p[3], p[4], p[5]) / radius, t, center);
    // L = R(euler) * diag(scale) * upper unit-triangular shear.
    const Eigen::Matrix3d rot = euler_to_matrix(Vector3(p[3], p[4], p[5]) / radius);
    const Eigen::Vector3d scale(1.0 + p[6] / radius, 1.0 + p[7] / radius, 1.0 + p[8] / radius);
    Eigen::Matrix3d shear = Eigen::Matrix3d::Identity();
    shear(0, 1) = p[9] / radius;
    shear(0, 2) = p[10] / radius;
    shear(1, 2) = p[11] / radius;
    const Eigen::Matrix3d l = rot * scale.asDiagonal() * shear;
    return {l, center - l * center + t};
  }
};

constexpr int kMaxRestarts = 2;

struct LevelOutcome {
  std::vector<double> params;
  double value;
  bool converged;
  LevelTrace trace;
};

LevelOutcome coordinate_descent(const std::function<double(const std::vector<double>&)>& cost,
                                std::vector<double> params, double initial_step, double tolerance, int max_sweeps,
                                int level) {
  std::vector<double> steps(params.size(), initial_step);
  double best = cost(params);
  LevelTrace trace{level, {best}};
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const std::vector<double> base = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (steps[i] < tolerance) continue;
      bool improved = false;
      for (double dir : {1.0, -1.0}) {
        std::vector<double> trial = params;
        trial[i] += dir * steps[i];
        const double v = cost(trial);
        if (v < best) {
          best = v;
          params = std::move(trial);
          improved = true;
          break;
        }
      }
      if (!improved) steps[i] *= 0.5;
    }
    // Pattern move: keep extrapolating along the net displacement of the sweep.
    std::vector<double> delta(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) delta[i] = params[i] - base[i];
    if (std::any_of(delta.begin(), delta.end(), [](double d) { return d != 0.0; })) {
      for (int n = 0; n < 8; ++n) {
        std::vector<double> trial = params;
        for (std::size_t i = 0; i < params.size(); ++i) trial[i] += delta[i];
        const double v = cost(trial);
        if (!(v < best)) break;
        best = v;
        params = std::move(trial);
      }
    }
    trace.best_values.push_back(best);
    if (std::all_of(steps.begin(), steps.end(), [&](double s) { return s < tolerance; })) {
      converged = true;
      break;
    }
  }
  return {std::move(params), best, converged, std::move(trace)};
}

std::vector<Volume> pyramid(const Volume& v, int levels) {
  std::vector<Volume> out;
  out.push_back(v);
  for (int l = 1; l < levels; ++l) out.push_back(downsample2(out.back()));
  return out;
}

struct Moments3 {
  double n = 0.0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
};

std::optional<std::pair<Point3, Eigen::Matrix3d>> principal_axes(const Volume& v) {
  const auto data = v.data();
  double total = 0.0;
  for (const float x : data) total += x;
  const double mean = total / static_cast<double>(data.size());
  const auto& g = v.grid();
  const Moments3 m = parallel::blocked_reduce(
      data.size(), Moments3{},
      [&](std::size_t begin, std::size_t end, Moments3& part) {
        for (std::size_t i = begin; i < end; ++i) {
          if (!(data[i] > mean)) continue;
          const auto [x, y, z] = g.ijk(i);
          const Point3 p = g.world(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
          part.n += 1.0;
          part.sum += p;
          part.outer += p * p.transpose();
        }
      },
      [](Moments3& a, const Moments3& b) {
        a.n += b.n;
        a.sum += b.sum;
        a.outer += b.outer;
      });
  if (m.n < 4.0) return std::nullopt;
  const Point3 c = m.sum / m.n;
  const Eigen::Matrix3d cov = m.outer / m.n - c * c.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const auto& ev = es.eigenvalues();
  // Nearly equal eigenvalues leave the axes undetermined.
  if (!(ev[0] > 0.0) || ev[1] - ev[0] < 1e-3 * ev[2] || ev[2] - ev[1] < 1e-3 * ev[2]) return std::nullopt;
  return std::make_pair(c, es.eigenvectors());
}

double characteristic_radius(const GridSpec& g) {
  double r = 0.0;
  for (int a = 0; a < 3; ++a) r += 0.5 * static_cast<double>(g.dims[a] - 1) * g.spacing[a];
  return std::max(1.0, r / 3.0);
}

RegistrationResult run(const Volume& fixed, const Volume& moving, const AffineTransform& init, bool affine,
                       const RegistrationConfig& cfg) {
  cfg.validate();
  AffineTransform base = invert(init);  // fixed world -> moving world at the starting point
  Parameterization param{affine, fixed.grid().center_world(), characteristic_radius(fixed.grid())};

  const auto fixed_levels = pyramid(fixed, cfg.pyramid_levels);
  const auto moving_levels = pyramid(moving, cfg.pyramid_levels);

  if (!affine && cfg.moments_init) {
    if (const auto aligned = moments_alignment(fixed, moving, init)) {
      const auto top = static_cast<std::size_t>(cfg.pyramid_levels - 1);
      const MetricEvaluator eval(fixed_levels[top], moving_levels[top], cfg.metric, cfg.sample_fraction, cfg.seed);
      const AffineTransform candidate = invert(*aligned);
      const auto v_candidate = eval.evaluate(candidate);
      const auto v_base = eval.evaluate(base);
      if (v_candidate && (!v_base || *v_candidate < *v_base)) base = candidate;
    }
  }

  std::vector<double> params(param.size(), 0.0);
  RegistrationResult result;
  bool converged = false;
  for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
    const auto li = static_cast<std::size_t>(level);
    const MetricEvaluator eval(fixed_levels[li], moving_levels[li], cfg.metric, cfg.sample_fraction,
                               cfg.seed + static_cast<std::uint64_t>(level));
    auto cost = [&](const std::vector<double>& p) {
      const auto v = eval.evaluate(compose(base, param.to_transform(p)));
      return v ? *v : std::numeric_limits<double>::infinity();
    };
    if (!eval.evaluate(compose(base, param.to_transform(params)))) {
      throw Error(ErrorKind::InsufficientOverlap,
                  "registration: fixed and moving volumes do not overlap at pyramid level " + std::to_string(level));
    }
    const auto& sp = fixed_levels[li].spacing();
    const double step = *std::max_element(sp.begin(), sp.end());
    const double tol = cfg.parameter_tolerance * std::ldexp(1.0, level);
    // Restart with full-size steps until a pass no longer improves, which
    // lets the search climb out of shallow pockets left by step halving.
    LevelTrace trace{level, {}};
    int sweeps_left = cfg.max_iterations_per_level;
    for (int pass = 0; pass < kMaxRestarts && sweeps_left > 0; ++pass) {
      auto outcome = coordinate_descent(cost, params, step, tol, sweeps_left, level);
      const double start = outcome.trace.best_values.front();
      sweeps_left -= static_cast<int>(outcome.trace.best_values.size()) - 1;
      trace.best_values.insert(trace.best_values.end(), outcome.trace.best_values.begin() + (pass == 0 ? 0 : 1),
                               outcome.trace.best_values.end());
      params = std::move(outcome.params);
      converged = outcome.converged;
      if (!(outcome.value < start)) break;
    }
    result.trace.push_back(std::move(trace));
  }

  // Keep whichever of the start point and the optimum scores better at full resolution.
  const MetricEvaluator full(fixed, moving, cfg.metric, cfg.sample_fraction, cfg.seed);
  const AffineTransform found = compose(base, param.to_transform(params));
  const auto v_found = full.evaluate(found);
  const auto v_init = full.evaluate(base);
  if (v_found && (!v_init || *v_found <= *v_init)) {
    result.transform = invert(found);
    result.metric_value = *v_found;
  } else {
    result.transform = init;
    result.metric_value = v_init ? *v_init : std::numeric_limits<double>::infinity();
  }
  result.converged = converged;
  return result;
}

}  // namespace

void RegistrationConfig::validate() const {
  if (pyramid_levels < 1) throw Error(ErrorKind::InvalidArgument, "pyramid_levels must be >= 1");
  if (max_iterations_per_level < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations_per_level must be >= 1");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "sample_fraction must be in (0, 1]");
  }
  if (!(parameter_tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "parameter_tolerance must be positive");
  if (!initial_transform.is_invertible()) {
    throw Error(ErrorKind::SingularTransform, "initial transform is singular");
  }
}

std::vector<std::size_t> stratified_samples(std::size_t n, double fraction, std::uint64_t seed) {
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / fraction)));
  std::vector<std::size_t> out;
  out.reserve(n / stride + 1);
  for (std::size_t block = 0; block * stride < n; ++block) {
    const std::size_t begin = block * stride;
    const std::size_t len = std::min(stride, n - begin);
    out.push_back(begin + (stride == 1 ? 0 : mix(seed ^ mix(block)) % len));
  }
  return out;
}

MetricEvaluator::MetricEvaluator(const Volume& fixed, const Volume& moving, Metric metric, double sample_fraction,
                                 std::uint64_t seed)
    : metric_(metric), moving_(moving) {
  const auto& g = fixed.grid();
  const auto idx = stratified_samples(fixed.size(), sample_fraction, seed);
  points_.reserve(idx.size());
  values_.reserve(idx.size());
  double sum = 0.0;
  for (const std::size_t i : idx) {
    const auto [x, y, z] = g.ijk(i);
    points_.push_back(g.world(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)));
    values_.push_back(fixed[i]);
    sum += fixed[i];
  }
  shift_ = idx.empty() ? 0.0 : sum / static_cast<double>(idx.size());
}

std::optional<double> MetricEvaluator::evaluate(const AffineTransform& fixed_to_moving) const {
  const AffineTransform to_index = compose(moving_.world_to_index(), fixed_to_moving);
  const Eigen::Matrix3d lin = to_index.linear();
  const Vector3 off = to_index.offset();
  const float outside = std::numeric_limits<float>::quiet_NaN();
  const Moments acc = parallel::blocked_reduce(
      points_.size(), Moments{},
      [&](std::size_t begin, std::size_t end, Moments& part) {
        for (std::size_t s = begin; s < end; ++s) {
          const float m = moving_.trilinear_index(lin * points_[s] + off, outside);
          if (std::isnan(m)) continue;
          part.add(values_[s] - shift_, m - shift_);
        }
      },
      [](Moments& a, const Moments& b) { a.merge(b); });
  if (acc.n < static_cast<double>(kMinOverlap)) return std::nullopt;
  return finish(acc, metric_);
}

double similarity(const Volume& fixed, const Volume& moving, const AffineTransform& t, Metric metric) {
  if (fixed.size() == 0 || moving.size() == 0) throw Error(ErrorKind::InvalidArgument, "similarity of empty volume");
  const MetricEvaluator eval(fixed, moving, metric, 1.0, 0);
  const auto v = eval.evaluate(invert(t));
  if (!v) throw Error(ErrorKind::InsufficientOverlap, "fewer than 100 overlapping samples");
  return *v;
}

std::optional<AffineTransform> moments_alignment(const Volume& fixed, const Volume& moving,
                                                 const AffineTransform& near) {
  const auto f = principal_axes(fixed);
  const auto m = principal_axes(moving);
  if (!f || !m) return std::nullopt;
  const Eigen::Matrix3d target = near.linear();
  Eigen::Matrix3d best_r = Eigen::Matrix3d::Identity();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int flips = 0; flips < 8; ++flips) {
    Eigen::Vector3d s;
    for (int a = 0; a < 3; ++a) s[a] = (flips >> a) & 1 ? -1.0 : 1.0;
    const Eigen::Matrix3d r = f->second * s.asDiagonal() * m->second.transpose();
    if (r.determinant() < 0.0) continue;
    const double score = (r.transpose() * target).trace();
    if (score > best_score) {
      best_score = score;
      best_r = r;
    }
  }
  return AffineTransform(best_r, f->first - best_r * m->first);
}

Volume downsample2(const Volume& v) {
  const auto& g = v.grid();
  Dims nd;
  Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
  Vector3 shift = Vector3::Zero();
  std::array<int, 3> factor{};
  for (int a = 0; a < 3; ++a) {
    factor[a] = g.dims[a] >= 2 ? 2 : 1;
    nd[a] = g.dims[a] / factor[a];
    scale(a, a) = factor[a];
    shift[a] = 0.5 * (factor[a] - 1);
  }
  const AffineTransform affine = compose(g.voxel_to_world, AffineTransform(scale, shift));
  const GridSpec ng = GridSpec::from_affine(nd, affine);
  std::vector<float> out(ng.voxel_count());

#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < nd[2]; ++k) {
    for (std::int64_t j = 0; j < nd[1]; ++j) {
      for (std::int64_t i = 0; i < nd[0]; ++i) {
        double acc = 0.0;
        int n = 0;
        for (int c = 0; c < factor[2]; ++c)
          for (int b = 0; b < factor[1]; ++b)
            for (int a = 0; a < factor[0]; ++a) {
              acc += v.at(i * factor[0] + a, j * factor[1] + b, k * factor[2] + c);
              ++n;
            }
        out[ng.index(i, j, k)] = static_cast<float>(acc / n);
      }
    }
  }
  return {ng, std::move(out)};
}

RegistrationResult register_rigid(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg) {
  return run(fixed, moving, cfg.initial_transform, false, cfg);
}

RegistrationResult register_affine(const Volume& fixed, const Volume& moving, const AffineTransform& init,
                                   const RegistrationConfig& cfg) {
  return run(fixed, moving, init, true, cfg);
}

}  // namespace dbs
