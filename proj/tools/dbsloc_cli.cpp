// dbsloc: command-line front end for electrode trajectory localization.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbsloc/atlas.hpp"
#include "dbsloc/calibration.hpp"
#include "dbsloc/error.hpp"
#include "dbsloc/mesh.hpp"
#include "dbsloc/parallel.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/registration.hpp"
#include "dbsloc/segmentation.hpp"
#include "dbsloc/trajectory.hpp"
#include "dbsloc/validation.hpp"
#include "dbsloc/volume_io.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace dbs;

constexpr double kDefaultK = 7.885;
constexpr double kDefaultResolution = 0.63;

void note(const std::string& msg) { std::cerr << "dbsloc: " << msg << '\n'; }

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

/// Collects outputs in a hidden staging directory next to each destination
/// and moves them into place only once every writer succeeded.
class Outputs {
 public:
  ~Outputs() {
    std::error_code ec;
    for (const auto& dir : staging_) fs::remove_all(dir, ec);
  }

  /// Schedules `write(staged_path)` for the destination path.
  void add(const fs::path& dest, std::function<void(const fs::path&)> write) {
    entries_.push_back({dest, std::move(write)});
  }

  void commit() {
    std::vector<std::pair<fs::path, fs::path>> moves;  // staged file -> destination
    for (const auto& e : entries_) {
      const fs::path parent = e.dest.has_parent_path() ? e.dest.parent_path() : fs::path(".");
      const fs::path stage = parent / (".dbsloc-staging-" + std::to_string(::getpid()));
      std::error_code ec;
      fs::create_directories(stage, ec);
      if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + parent.string() + ": " + ec.message());
      if (std::find(staging_.begin(), staging_.end(), stage) == staging_.end()) staging_.push_back(stage);
      e.write(stage / e.dest.filename());
    }
    for (const auto& stage : staging_) {
      for (const auto& f : fs::directory_iterator(stage)) {
        moves.emplace_back(f.path(), stage.parent_path() / f.path().filename());
      }
    }
    for (const auto& [from, to] : moves) {
      std::error_code ec;
      fs::rename(from, to, ec);
      if (ec) throw Error(ErrorKind::Io, "cannot move output into place at " + to.string() + ": " + ec.message());
    }
  }

 private:
  struct Entry {
    fs::path dest;
    std::function<void(const fs::path&)> write;
  };
  std::vector<Entry> entries_;
  std::vector<fs::path> staging_;
};

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

json matrix_json(const AffineTransform& t) {
  json m = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(t.matrix()(r, c));
  return m;
}

json point_json(const Vector3& p) { return json::array({p.x(), p.y(), p.z()}); }

AtlasBoxStack load_atlas(const std::string& spec) {
  return spec == "default" ? default_atlas() : read_atlas_json(spec);
}

std::optional<Metric> parse_metric(const std::string& s) {
  if (s == "ncc") return Metric::Ncc;
  if (s == "ssd") return Metric::Ssd;
  return std::nullopt;
}

std::vector<Trajectory> load_trajectories(const fs::path& path) {
  return path.extension() == ".csv" ? read_trajectory_csv(path) : read_trajectories_json(path);
}

/// CT world -> atlas world, by bypass file, registration, or identity.
struct Alignment {
  AffineTransform ct_to_atlas;
  std::string source;  ///< "transform", "template" or "identity"
};

struct RegistrationFlags {
  std::string metric = "ncc";
  int levels = 3;
  double sample_fraction = 0.25;
  int max_iterations = 100;
};

RegistrationConfig make_registration_config(const RegistrationFlags& f, std::uint64_t seed) {
  RegistrationConfig cfg;
  const auto metric = parse_metric(f.metric);
  if (!metric) throw Error(ErrorKind::InvalidArgument, "unknown metric '" + f.metric + "' (expected ncc or ssd)");
  cfg.metric = *metric;
  cfg.pyramid_levels = f.levels;
  cfg.sample_fraction = f.sample_fraction;
  cfg.max_iterations_per_level = f.max_iterations;
  cfg.seed = seed;
  return cfg;
}

/// Rigid then affine; fixed is the reference space, moving the subject.
RegistrationResult rigid_then_affine(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg) {
  const RegistrationResult rigid = register_rigid(fixed, moving, cfg);
  RegistrationResult affine = register_affine(fixed, moving, rigid.transform, cfg);
  affine.trace.insert(affine.trace.begin(), rigid.trace.begin(), rigid.trace.end());
  return affine;
}

// ---------------------------------------------------------------------------

struct GlobalFlags {
  int threads = 0;
  std::uint64_t seed = 0;
};

struct SegmentFlags {
  std::string ct;
  std::string atlas = "default";
  double k = kDefaultK;
  std::string out;
  std::string transform;
  std::string templ;
  double resolution = kDefaultResolution;
  bool mesh = false;
  double sphere_radius = 1.0;
  RegistrationFlags reg;
};

int cmd_segment(const SegmentFlags& f, const GlobalFlags& g) {
  Stopwatch clock;
  std::map<std::string, double> stages;

  const Volume ct = read_volume(f.ct);
  stages["read"] = clock.lap();

  Alignment align{AffineTransform::identity(), "identity"};
  if (!f.transform.empty()) {
    align = {read_transform_json(f.transform), "transform"};
    note("registration skipped; using transform from " + f.transform);
  } else if (!f.templ.empty()) {
    const Volume templ = read_volume(f.templ);
    const RegistrationResult r = rigid_then_affine(templ, ct, make_registration_config(f.reg, g.seed));
    align = {r.transform, "template"};
    if (!r.converged) note("registration stopped at the iteration limit");
  } else {
    note("no transform or template given; assuming the CT is already in atlas space");
  }
  stages["register"] = clock.lap();

  const AtlasBoxStack atlas = load_atlas(f.atlas);
  const MaskedVolume masked = apply_roi(ct, rasterize_atlas(atlas, ct.grid(), align.ct_to_atlas));
  stages["mask"] = clock.lap();

  const auto sets = segment_volume(masked, f.k, SegmentationOptions::for_grid(ct.grid()));
  stages["segment"] = clock.lap();

  BuildOptions build;
  build.source_k = f.k;
  std::vector<Trajectory> native;
  for (const ElectrodeLabel label : {ElectrodeLabel::Left, ElectrodeLabel::Right}) {
    try {
      native.push_back(build_trajectory(sets, label, build));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TrajectoryNotFound) throw;
      note(std::string(to_string(label)) + " electrode not found: " + e.what());
    }
  }
  if (native.empty()) throw Error(ErrorKind::TrajectoryNotFound, "no electrode trajectory found");
  std::vector<Trajectory> resampled;
  for (const auto& t : native) resampled.push_back(resample_trajectory(t, f.resolution));
  stages["trajectory"] = clock.lap();

  std::int64_t with_centroids = 0, ambiguous = 0;
  for (const auto& s : sets) {
    with_centroids += s.centroids.empty() ? 0 : 1;
    ambiguous += s.ambiguous ? 1 : 0;
  }
  json report;
  report["schema"] = 1;
  report["input"] = fs::path(f.ct).filename().string();
  report["k"] = f.k;
  report["atlas"] = f.atlas;
  report["alignment"] = align.source;
  report["ct_to_atlas"] = matrix_json(align.ct_to_atlas);
  report["roi_voxels"] = masked.included_count();
  report["slices_with_centroids"] = with_centroids;
  report["ambiguous_slices"] = ambiguous;
  report["resolution_mm"] = f.resolution;
  json electrodes = json::array();
  for (std::size_t i = 0; i < native.size(); ++i) {
    const auto& t = native[i];
    const TrajectoryExtent ext = extent(t);
    const LineFit line = fit_line(t);
    electrodes.push_back({{"label", std::string(to_string(t.label))},
                          {"native_points", t.points.size()},
                          {"resampled_points", resampled[i].points.size()},
                          {"native_spacing_mm", t.native_spacing},
                          {"start_mm", ext.start_mm},
                          {"end_mm", ext.end_mm},
                          {"absolute_distance_mm", ext.absolute_distance_mm},
                          {"arc_length_mm", t.arc_length()},
                          {"line_direction", point_json(line.direction)},
                          {"line_rms_mm", line.rms_residual}});
  }
  report["electrodes"] = electrodes;

  const fs::path out(f.out);
  Outputs outputs;
  for (const auto& t : resampled) {
    outputs.add(out / (std::string(to_string(t.label)) + ".csv"),
                [&t](const fs::path& p) { write_trajectory_csv(std::span<const Trajectory>(&t, 1), p); });
  }
  outputs.add(out / "trajectory.json", [&](const fs::path& p) { write_trajectories_json(native, p); });
  outputs.add(out / "centroids.csv", [&](const fs::path& p) { write_centroids_csv(sets, p); });
  outputs.add(out / "report.json", [&](const fs::path& p) { write_json_file(report, p); });
  if (f.mesh) {
    outputs.add(out / "trajectory.ply", [&](const fs::path& p) {
      std::vector<Mesh> parts;
      for (const auto& t : resampled) {
        const Rgb color = t.label == ElectrodeLabel::Left ? Rgb{220, 60, 60} : Rgb{60, 90, 220};
        parts.push_back(trajectory_to_mesh(t, f.sphere_radius, color));
      }
      write_ply(merge(parts), p);
    });
  }
  // Timings live in their own file so the data outputs stay reproducible.
  json timing;
  outputs.add(out / "timing.json", [&](const fs::path& p) {
    stages["write"] = clock.lap();
    double total = 0.0;
    for (const auto& [name, s] : stages) total += s;
    timing = {{"schema", 1}, {"stages_seconds", stages}, {"total_seconds", total},
              {"segmentation_seconds", total - stages["register"]}, {"threads", parallel::thread_count()}};
    write_json_file(timing, p);
  });
  outputs.commit();
  for (const auto& t : native) {
    const TrajectoryExtent ext = extent(t);
    std::printf("%s: %zu points, z %.2f..%.2f mm\n", std::string(to_string(t.label)).c_str(), t.points.size(),
                ext.start_mm, ext.end_mm);
  }
  return 0;
}

struct RegisterFlags {
  std::string fixed;
  std::string moving;
  std::string out;
  std::string mode = "affine";
  std::string init;
  std::string resampled;
  std::string report;
  RegistrationFlags reg;
};

int cmd_register(const RegisterFlags& f, const GlobalFlags& g) {
  if (f.mode != "rigid" && f.mode != "affine") {
    throw Error(ErrorKind::InvalidArgument, "unknown mode '" + f.mode + "' (expected rigid or affine)");
  }
  const Volume fixed = read_volume(f.fixed);
  const Volume moving = read_volume(f.moving);
  RegistrationConfig cfg = make_registration_config(f.reg, g.seed);
  if (!f.init.empty()) cfg.initial_transform = read_transform_json(f.init);
  const RegistrationResult r = f.mode == "rigid" ? register_rigid(fixed, moving, cfg) : rigid_then_affine(fixed, moving, cfg);
  if (!r.converged) note("registration stopped at the iteration limit");

  Outputs outputs;
  outputs.add(f.out, [&](const fs::path& p) { write_transform_json(r.transform, p); });
  if (!f.resampled.empty()) {
    outputs.add(f.resampled, [&](const fs::path& p) { write_volume(resample(moving, r.transform, fixed.grid()), p); });
  }
  if (!f.report.empty()) {
    json trace = json::array();
    for (const auto& t : r.trace) trace.push_back({{"level", t.level}, {"best_values", t.best_values}});
    json report = {{"schema", 1}, {"mode", f.mode},       {"metric", f.reg.metric},
                   {"metric_value", r.metric_value}, {"converged", r.converged}, {"trace", trace}};
    outputs.add(f.report, [report = std::move(report)](const fs::path& p) { write_json_file(report, p); });
  }
  outputs.commit();
  std::printf("metric %.6f, converged %s\n", r.metric_value, r.converged ? "yes" : "no");
  return 0;
}

struct CalibrateFlags {
  std::vector<std::string> cts;
  std::vector<std::string> ground_truths;
  std::string atlas = "default";
  std::string transform;
  double k_lo = 0.6;
  double k_hi = 9.5;
  double k_step = 0.01;
  double threshold = 1.0;
  std::string out;
  std::string summary;
};

int cmd_calibrate(const CalibrateFlags& f, const GlobalFlags&) {
  if (f.cts.size() != f.ground_truths.size()) {
    throw Error(ErrorKind::InvalidArgument, "each --ct needs a matching --ground-truth");
  }
  const AtlasBoxStack atlas = load_atlas(f.atlas);
  const AffineTransform t = f.transform.empty() ? AffineTransform::identity() : read_transform_json(f.transform);
  std::vector<MaskedVolume> masked;
  std::vector<GroundTruth> truths;
  for (std::size_t i = 0; i < f.cts.size(); ++i) {
    const Volume ct = read_volume(f.cts[i]);
    masked.push_back(apply_roi(ct, rasterize_atlas(atlas, ct.grid(), t)));
    truths.push_back(read_ground_truth(f.ground_truths[i]));
  }
  std::vector<CalibrationCase> cases;
  for (std::size_t i = 0; i < masked.size(); ++i) cases.push_back({&masked[i], &truths[i]});
  CalibrationOptions opts;
  opts.grid = {f.k_lo, f.k_hi, f.k_step};
  opts.segmentation = SegmentationOptions::for_grid(masked.front().grid());
  opts.ed_threshold_mm = f.threshold;
  const CalibrationResult result = calibrate_k(cases, opts);

  Outputs outputs;
  outputs.add(f.out, [&](const fs::path& p) { write_calibration_csv(result, p); });
  if (!f.summary.empty()) {
    json summary = {{"schema", 1}, {"cases", f.cts.size()}, {"k_lo", f.k_lo}, {"k_hi", f.k_hi},
                    {"k_step", f.k_step}, {"ed_threshold_mm", f.threshold}, {"evaluations", result.points.size()}};
    summary["plateau"] = result.plateau ? json{{"lo", result.plateau->lo}, {"hi", result.plateau->hi}} : json(nullptr);
    outputs.add(f.summary, [summary = std::move(summary)](const fs::path& p) { write_json_file(summary, p); });
  }
  outputs.commit();
  if (result.plateau) {
    std::printf("plateau k in [%.2f, %.2f]\n", result.plateau->lo, result.plateau->hi);
  } else {
    std::printf("no k keeps ED below %.3f mm\n", f.threshold);
  }
  return 0;
}

struct ValidateFlags {
  std::string trajectory;
  std::string ground_truth;
  std::string out;
  std::string timing;
  std::optional<double> k;
};

int cmd_validate(const ValidateFlags& f, const GlobalFlags&) {
  const auto trajectories = load_trajectories(f.trajectory);
  const GroundTruth gt = read_ground_truth(f.ground_truth);
  double runtime = 0.0;
  if (!f.timing.empty()) {
    std::ifstream in(f.timing);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + f.timing);
    try {
      const json j = json::parse(in);
      runtime = j.at("segmentation_seconds").get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, f.timing + ": " + e.what());
    }
  }
  std::vector<ElectrodeRun> runs;
  for (const ElectrodeLabel label : gt.labels()) {
    const auto it = std::find_if(trajectories.begin(), trajectories.end(),
                                 [&](const Trajectory& t) { return t.label == label; });
    if (it == trajectories.end()) {
      throw Error(ErrorKind::TrajectoryNotFound, "no " + std::string(to_string(label)) + " trajectory to validate");
    }
    runs.push_back(score_trajectory(*it, gt));
    if (runs.back().distances.empty()) {
      throw Error(ErrorKind::GroundTruth, "no ground-truth slice matches the " + std::string(to_string(label)) + " trajectory");
    }
  }
  const double k = f.k ? *f.k : (trajectories.empty() ? 0.0 : trajectories.front().source_k);
  const ValidationReport report = make_report(runs, k, runtime);
  Outputs outputs;
  outputs.add(f.out, [&](const fs::path& p) { write_json_file(to_json(report), p); });
  outputs.commit();
  for (const auto& m : report.per_electrode) {
    std::printf("%s: mean ED %.3f mm, max %.3f mm, MSE %.3f, %lld matched / %lld missed\n",
                std::string(to_string(m.label)).c_str(), m.mean_ed_mm, m.max_ed_mm, m.mse_mm,
                static_cast<long long>(m.matched_slices), static_cast<long long>(m.missed_slices));
  }
  return 0;
}

struct PhantomFlags {
  std::string spec;
  std::string out;
  std::string ground_truth;
  std::string spec_out;
  std::optional<double> noise_sigma;
  std::optional<int> supersample;
};

int cmd_phantom(const PhantomFlags& f, const GlobalFlags& g, bool seed_given) {
  PhantomSpec spec = f.spec.empty() ? PhantomSpec{} : read_phantom_spec(f.spec);
  if (seed_given || f.spec.empty()) spec.seed = g.seed;
  if (f.noise_sigma) spec.noise_sigma = *f.noise_sigma;
  if (f.supersample) spec.supersample = *f.supersample;
  const Phantom ph = generate(spec);
  Outputs outputs;
  outputs.add(f.out, [&](const fs::path& p) { write_volume(ph.volume, p); });
  if (!f.ground_truth.empty()) {
    outputs.add(f.ground_truth, [&](const fs::path& p) { write_ground_truth(ph.ground_truth, p); });
  }
  if (!f.spec_out.empty()) outputs.add(f.spec_out, [&](const fs::path& p) { write_json_file(to_json(spec), p); });
  outputs.commit();
  std::printf("phantom %lldx%lldx%lld, %zu ground-truth centroids\n", static_cast<long long>(spec.dims[0]),
              static_cast<long long>(spec.dims[1]), static_cast<long long>(spec.dims[2]),
              ph.ground_truth.entries.size());
  return 0;
}

struct MeshFlags {
  std::string trajectory;
  std::string out;
  double radius = 1.0;
  std::optional<double> resolution;
};

int cmd_export_mesh(const MeshFlags& f, const GlobalFlags&) {
  const auto trajectories = load_trajectories(f.trajectory);
  std::vector<Mesh> parts;
  for (const auto& t : trajectories) {
    const Rgb color = t.label == ElectrodeLabel::Left ? Rgb{220, 60, 60} : Rgb{60, 90, 220};
    parts.push_back(trajectory_to_mesh(f.resolution ? resample_trajectory(t, *f.resolution) : t, f.radius, color));
  }
  const Mesh mesh = merge(parts);
  Outputs outputs;
  outputs.add(f.out, [&](const fs::path& p) { write_ply(mesh, p); });
  outputs.commit();
  std::printf("%zu vertices, %zu faces\n", mesh.vertices.size(), mesh.faces.size());
  return 0;
}

void add_registration_flags(CLI::App* app, RegistrationFlags& r) {
  app->add_option("--metric", r.metric, "Similarity metric: ncc or ssd")->capture_default_str();
  app->add_option("--levels", r.levels, "Pyramid levels")->capture_default_str()->check(CLI::Range(1, 8));
  app->add_option("--sample-fraction", r.sample_fraction, "Fraction of fixed voxels sampled")
      ->capture_default_str()
      ->check(CLI::Range(1e-6, 1.0));
  app->add_option("--max-iterations", r.max_iterations, "Coordinate sweeps per pyramid level")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electrode trajectory localization in CT volumes", "dbsloc"};
  app.config_formatter(std::make_shared<dbs::cli::JsonConfig>());
  app.set_config("--config", "", "JSON config file (schema 1); command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags global;
  app.add_option("--threads", global.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  CLI::Option* seed_opt = app.add_option("--seed", global.seed, "Seed for phantom noise and registration sampling");

  SegmentFlags seg;
  auto* segment = app.add_subcommand("segment", "Mask, threshold and chain electrode centroids from a CT");
  segment->add_option("--ct", seg.ct, "Input CT volume (.nii, .nii.gz, .mha, .mhd)")->required();
  segment->add_option("--atlas", seg.atlas, "'default' or an atlas JSON file")->capture_default_str();
  segment->add_option("--k", seg.k, "Threshold factor in T = k*sigma + mu")->capture_default_str();
  segment->add_option("--out", seg.out, "Output directory")->required();
  auto* seg_transform = segment->add_option("--transform", seg.transform, "CT-to-atlas transform JSON; skips registration");
  segment->add_option("--template", seg.templ, "Atlas-space template volume to register the CT to")
      ->excludes(seg_transform);
  segment->add_option("--resolution", seg.resolution, "Output trajectory spacing in mm")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  segment->add_flag("--mesh", seg.mesh, "Also write trajectory.ply");
  segment->add_option("--sphere-radius", seg.sphere_radius, "Mesh sphere radius in mm")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_registration_flags(segment, seg.reg);

  RegisterFlags reg;
  auto* registration = app.add_subcommand("register", "Register a moving volume onto a fixed volume");
  registration->add_option("--fixed", reg.fixed, "Fixed (reference) volume")->required();
  registration->add_option("--moving", reg.moving, "Moving volume")->required();
  registration->add_option("--out", reg.out, "Output transform JSON (moving world -> fixed world)")->required();
  registration->add_option("--mode", reg.mode, "rigid or affine (affine runs rigid first)")->capture_default_str();
  registration->add_option("--init", reg.init, "Initial transform JSON");
  registration->add_option("--resampled", reg.resampled, "Write the moving volume resampled onto the fixed grid");
  registration->add_option("--report", reg.report, "Write metric value and per-level trace as JSON");
  add_registration_flags(registration, reg.reg);

  CalibrateFlags cal;
  auto* calibrate = app.add_subcommand("calibrate", "Sweep k against labelled volumes");
  calibrate->add_option("--ct", cal.cts, "Atlas-space CT volume (repeatable)")->required();
  calibrate->add_option("--ground-truth", cal.ground_truths, "Ground-truth CSV, one per --ct")->required();
  calibrate->add_option("--atlas", cal.atlas, "'default' or an atlas JSON file")->capture_default_str();
  calibrate->add_option("--transform", cal.transform, "CT-to-atlas transform applied to every case");
  calibrate->add_option("--k-lo", cal.k_lo, "First k")->capture_default_str();
  calibrate->add_option("--k-hi", cal.k_hi, "Last k")->capture_default_str();
  calibrate->add_option("--k-step", cal.k_step, "k increment")->capture_default_str()->check(CLI::PositiveNumber);
  calibrate->add_option("--threshold", cal.threshold, "ED bound in mm defining the plateau")->capture_default_str();
  calibrate->add_option("--out", cal.out, "Output CSV: k,mean_ed_mm,max_ed_mm")->required();
  calibrate->add_option("--summary", cal.summary, "Write the plateau as JSON");

  ValidateFlags val;
  auto* validate = app.add_subcommand("validate", "Score trajectories against ground-truth centroids");
  validate->add_option("--trajectory", val.trajectory, "trajectory.json or a trajectory CSV")->required();
  validate->add_option("--ground-truth", val.ground_truth, "Ground-truth CSV")->required();
  validate->add_option("--out", val.out, "Output report JSON")->required();
  validate->add_option("--timing", val.timing, "timing.json whose segmentation time is reported");
  validate->add_option("--k", val.k, "k to report (default: taken from the trajectory)");

  PhantomFlags ph;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic CT with known electrodes");
  phantom->add_option("--spec", ph.spec, "Phantom spec JSON (defaults otherwise)");
  phantom->add_option("--out", ph.out, "Output volume")->required();
  phantom->add_option("--ground-truth", ph.ground_truth, "Output ground-truth CSV");
  phantom->add_option("--spec-out", ph.spec_out, "Write the effective spec as JSON");
  phantom->add_option("--noise-sigma", ph.noise_sigma, "Noise standard deviation in HU")->check(CLI::NonNegativeNumber);
  phantom->add_option("--supersample", ph.supersample, "Subsamples per axis")->check(CLI::Range(1, 8));

  MeshFlags mesh;
  auto* export_mesh = app.add_subcommand("export-mesh", "Write trajectories as sphere chains in PLY");
  export_mesh->add_option("--trajectory", mesh.trajectory, "trajectory.json or a trajectory CSV")->required();
  export_mesh->add_option("--out", mesh.out, "Output PLY")->required();
  export_mesh->add_option("--radius", mesh.radius, "Sphere radius in mm")->capture_default_str()->check(CLI::PositiveNumber);
  export_mesh->add_option("--resolution", mesh.resolution, "Resample to this spacing first")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    dbs::parallel::set_thread_count(global.threads);
    if (segment->parsed()) return cmd_segment(seg, global);
    if (registration->parsed()) return cmd_register(reg, global);
    if (calibrate->parsed()) return cmd_calibrate(cal, global);
    if (validate->parsed()) return cmd_validate(val, global);
    if (phantom->parsed()) return cmd_phantom(ph, global, seed_opt->count() > 0);
    if (export_mesh->parsed()) return cmd_export_mesh(mesh, global);
  } catch (const dbs::Error& e) {
    std::cerr << "dbsloc: error [" << dbs::to_string(e.kind()) << "]: " << e.what() << '\n';
    return dbs::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dbsloc: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
