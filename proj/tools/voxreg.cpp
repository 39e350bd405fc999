// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

// voxreg command-line tool.
//
// Exit codes: 0 ok, 1 internal error, 2 bad input (missing file, malformed
// JSON, bad flag), 3 grid/extent mismatch, 4 non-finite loss during a fit,
// 5 gradient check over threshold.

#include "voxreg/config.hpp"
#include "voxreg/error.hpp"
#include "voxreg/gradcheck.hpp"
#include "voxreg/io.hpp"
#include "voxreg/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace voxreg;
namespace fs = std::filesystem;
using config::json;

enum ExitCode { kOk = 0, kInternal = 1, kBadInput = 2, kMismatch = 3, kNonFinite = 4, kGradCheck = 5 };

struct GradCheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a command needs from a run config.
struct Run {
  config::RunConfig rc;
  SceneSpec scene;
  config::CameraRig rig;
  int threads = 1;

  SupervisionSpec supervision_spec() const {
    SupervisionSpec s;
    s.grid = rc.grid;
    s.bins = rig.bins;
    s.stride = rc.stride;
    s.bev_nx = rc.bev_nx;
    s.bev_ny = rc.bev_ny;
    s.lidar_rate = rc.lidar_rate;
    s.seed = rc.seed;
    return s;
  }

  FitProblem problem(const GroundTruthBundle& bundle) const {
    return FitProblem::build(rc.grid, scene.classes, scene.free_class, rig.bins, rc.stride, rig.training_models(),
                             bundle);
  }

  const CameraModel& heldout() const {
    return rig.heldout.empty() ? rig.cameras.front().camera : rig.heldout.front().camera;
  }
};

struct RunFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

Run load_run(const RunFlags& flags) {
  Run run;
  run.rc = config::load_run_config(flags.config);
  if (flags.seed) {
    run.rc.seed = *flags.seed;
    run.rc.fit.seed = *flags.seed;
  }
  if (flags.out) run.rc.output_dir = *flags.out;
  run.threads = resolve_threads(flags.threads);
  run.rc.fit.threads = run.threads;
  run.rc.validate();
  run.scene = config::scene_from_json(config::load_json(run.rc.scene_path));
  run.rig = config::rig_from_json(config::load_json(run.rc.rig_path));
  return run;
}

void add_run_flags(CLI::App* cmd, RunFlags& flags, bool with_out = true) {
  cmd->add_option("config", flags.config, "Run config JSON")->required();
  if (with_out) cmd->add_option("-o,--out", flags.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", flags.seed, "Seed (overrides the config)");
  cmd->add_option("--threads", flags.threads, "Worker threads (default: VOXREG_THREADS or 1)");
}

void write_view_supervision(const fs::path& dir, const ViewSupervision& sup) {
  const auto mask = sup.mask();
  std::vector<double> depth(sup.pixels(), 0.0);
  for (std::size_t i = 0; i < sup.pixels(); ++i) {
    if (mask[i]) depth[i] = sup.depth[i];
  }
  io::write_pfm(dir / "depth.pfm", sup.width, sup.height, depth);
  io::write_label_png(dir / "labels.png", sup.width, sup.height, sup.labels);
  io::write_palette_png(dir / "labels_vis.png", sup.width, sup.height, sup.labels);
}

// Depth PNGs only hold positive millimeters; BEV heights may be negative.
void write_camera_supervision(const fs::path& dir, const ViewSupervision& sup) {
  write_view_supervision(dir, sup);
  io::write_depth_png_mm(dir / "depth_mm.png", sup.width, sup.height, sup.depth, sup.mask());
}

VoxelGrid occupancy_codes(const OccupancyGrid& occ) {
  VoxelGrid g(occ.spec, 1);
  for (std::size_t i = 0; i < occ.labels.size(); ++i) g.data()[i] = occ.labels[i];
  return g;
}

OccupancyGrid occupancy_from_codes(const VoxelGrid& g, int classes) {
  if (g.channels() != 1) throw ShapeError("occupancy grids have one channel");
  OccupancyGrid occ(g.spec(), classes);
  for (std::size_t i = 0; i < occ.labels.size(); ++i) {
    const double v = g.data()[i];
    if (v != std::floor(v) || v < 0 || v >= classes) throw InputError("occupancy code out of range");
    occ.labels[i] = int(v);
  }
  return occ;
}

void write_points_csv(const fs::path& path, const PointQuerySet& points) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "x,y,z,label\n";
  for (std::size_t i = 0; i < points.points.size(); ++i) {
    const Vec3& p = points.points[i];
    out << p.x() << ',' << p.y() << ',' << p.z() << ',' << points.labels[i] << '\n';
  }
}

int cmd_gen_scene(const RunFlags& flags) {
  const Run run = load_run(flags);
  const fs::path out = run.rc.output_dir;
  const GroundTruthBundle bundle = make_supervision(run.scene, run.rig.training_models(), run.supervision_spec());
  json manifest = {{"schema", "voxreg.bundle/1"}, {"seed", run.rc.seed}, {"cameras", json::array()}};
  for (std::size_t i = 0; i < bundle.cameras.size(); ++i) {
    const std::string& name = run.rig.cameras[i].name;
    write_camera_supervision(out / "cameras" / name, bundle.cameras[i]);
    manifest["cameras"].push_back({{"name", name},
                                   {"width", bundle.cameras[i].width},
                                   {"height", bundle.cameras[i].height},
                                   {"supervised_pixels", bundle.cameras[i].valid_count()}});
  }
  write_view_supervision(out / "bev", bundle.bev);
  manifest["bev"] = {{"width", bundle.bev.width}, {"height", bundle.bev.height},
                     {"supervised_pixels", bundle.bev.valid_count()}};
  io::write_vxg(out / "occupancy.vxg", occupancy_codes(bundle.occupancy));
  const BakedScene baked = bake_sdf(run.scene, run.rc.grid);
  io::write_vxg(out / "baked_sdf.vxg", baked.sdf);
  io::write_vxg(out / "baked_semantic.vxg", baked.semantic);
  write_points_csv(out / "lidar_points.csv", bundle.lidar);
  manifest["lidar_points"] = bundle.lidar.points.size();
  config::save_json(out / "bundle.json", manifest);
  std::cout << "wrote ground truth for " << bundle.cameras.size() << " cameras to " << out.string() << "\n";
  return kOk;
}

std::vector<int> argmax_labels(const RenderOutput& r) {
  std::vector<int> labels(r.pixels());
  for (std::size_t i = 0; i < r.pixels(); ++i) {
    labels[i] = argmax_class(std::span<const double>(r.semantic.data() + i * r.classes, r.classes));
  }
  return labels;
}

void write_render(const fs::path& dir, const RenderOutput& r) {
  io::write_pfm(dir / "depth.pfm", r.width, r.height, r.depth);
  io::write_pfm(dir / "weight_sum.pfm", r.width, r.height, r.weight_sum);
  const auto labels = argmax_labels(r);
  io::write_label_png(dir / "semantic.png", r.width, r.height, labels);
  io::write_palette_png(dir / "semantic_vis.png", r.width, r.height, labels);
}

struct RenderFlags {
  RunFlags run;
  std::optional<std::string> checkpoint;
  std::optional<std::string> sdf;
  std::optional<std::string> semantic;
  double alpha = 10.0;
  double beta = 0.1;
};

void require_grid(const VoxelGrid& grid, const GridSpec& expected, const std::string& what) {
  if (grid.spec() != expected) throw ShapeError(what + " does not match the configured grid dims/extent");
}

int cmd_render(const RenderFlags& flags) {
  const Run run = load_run(flags.run);
  FitState state = FitState::initial(run.rc.grid, run.scene.classes, LaplaceParams::from_scales(flags.alpha, flags.beta));
  if (flags.checkpoint) {
    state = config::read_checkpoint(*flags.checkpoint);
  } else if (flags.sdf && flags.semantic) {
    state.sdf = io::read_vxg(*flags.sdf);
    state.semantic = io::read_vxg(*flags.semantic);
  } else {
    throw InputError("render needs --checkpoint or both --sdf and --semantic");
  }
  require_grid(state.sdf, run.rc.grid, "SDF grid");
  require_grid(state.semantic, run.rc.grid, "semantic grid");
  if (state.sdf.channels() != 1) throw ShapeError("SDF grid must have one channel");
  if (state.semantic.channels() != run.scene.classes) throw ShapeError("semantic grid channels != scene classes");

  const fs::path out = run.rc.output_dir;
  const VoxelGrid density = density_volume_from_sdf(state.sdf, state.laplace);
  auto render_named = [&](const config::NamedCamera& cam) {
    write_render(out / cam.name, render_camera(density, state.semantic, cam.camera, run.rig.bins, run.rc.stride,
                                               run.threads));
  };
  for (const auto& cam : run.rig.cameras) render_named(cam);
  for (const auto& cam : run.rig.heldout) render_named(cam);
  const int bev_nx = run.rc.bev_nx > 0 ? run.rc.bev_nx : run.rc.grid.dims.nx;
  const int bev_ny = run.rc.bev_ny > 0 ? run.rc.bev_ny : run.rc.grid.dims.ny;
  write_render(out / "bev", render_bev(density, state.semantic, bev_nx, bev_ny, run.rc.grid.dims.nz, run.threads));
  std::cout << "rendered " << run.rig.cameras.size() + run.rig.heldout.size() << " cameras and BEV to "
            << out.string() << "\n";
  return kOk;
}

struct SplatFlags {
  RunFlags run;
  std::vector<std::string> features;
};

int cmd_splat(const SplatFlags& flags) {
  const Run run = load_run(flags.run);
  const fs::path out = run.rc.output_dir;
  const GroundTruthBundle bundle = make_supervision(run.scene, run.rig.training_models(), run.supervision_spec());
  const FitProblem problem = run.problem(bundle);
  std::vector<FeatureImage> images;
  if (flags.features.empty()) {
    images = supervision_features(problem);
    for (std::size_t i = 0; i < images.size(); ++i) {
      io::write_feature_image(out / "features" / (run.rig.cameras[i].name + ".vxf"), images[i]);
    }
  } else {
    if (flags.features.size() != problem.cameras.size()) throw InputError("one --features file per training camera");
    for (const auto& f : flags.features) images.push_back(io::read_feature_image(f));
  }
  std::vector<CameraModel> cameras;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const CameraModel& cam = problem.cameras[i];
    if (cam.width() % images[i].width != 0 || cam.width() / images[i].width != cam.height() / images[i].height ||
        cam.height() % images[i].height != 0) {
      throw ShapeError("feature image size is not an integer downscale of its camera");
    }
    cameras.push_back(cam.strided(cam.width() / images[i].width));
  }
  const VoxelGrid sparse = splat(images, cameras, run.rig.bins, run.rc.grid, run.threads);
  io::write_vxg(out / "sparse.vxg", sparse);
  std::cout << "splatted " << images.size() << " images into " << (out / "sparse.vxg").string() << "\n";
  return kOk;
}

struct DensifyFlags {
  std::string input;
  std::string output;
  int iterations = 8;
  bool coords = false;
};

int cmd_densify(const DensifyFlags& flags) {
  const VoxelGrid sparse = io::read_vxg(flags.input);
  const auto mask = nonzero_mask(sparse);
  const VoxelGrid input = flags.coords ? concat_channels(sparse, coord_volume(sparse.spec())) : sparse;
  const VoxelGrid dense =
      apply_densifier([&](const VoxelGrid& g) { return densify_baseline(g, flags.iterations, mask); }, input);
  io::write_vxg(flags.output, dense);
  std::cout << "densified " << flags.input << " -> " << flags.output << "\n";
  return kOk;
}

struct FitFlags {
  RunFlags run;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<std::string> camera_sup;
  std::optional<std::string> bev_sup;
  std::optional<std::string> depth_loss;
  std::optional<std::string> sem_loss;
  std::string mode = "regulator";
  int log_every = 100;
};

bool on(const std::string& v) { return v == "on"; }

int cmd_fit(const FitFlags& flags) {
  Run run = load_run(flags.run);
  FitConfig& fc = run.rc.fit;
  if (flags.steps) fc.steps = *flags.steps;
  if (flags.lr) fc.adam.lr = *flags.lr;
  if (flags.camera_sup) fc.camera_supervision = on(*flags.camera_sup);
  if (flags.bev_sup) fc.bev_supervision = on(*flags.bev_sup);
  if (flags.depth_loss && !on(*flags.depth_loss)) fc.weights.depth = 0.0;
  if (flags.sem_loss && !on(*flags.sem_loss)) fc.weights.semantic = 0.0;
  if (flags.depth_loss && on(*flags.depth_loss) && fc.weights.depth == 0.0) fc.weights.depth = 1.0;
  if (flags.sem_loss && on(*flags.sem_loss) && fc.weights.semantic == 0.0) fc.weights.semantic = 1.0;
  fc.validate();

  const fs::path out = run.rc.output_dir;
  const GroundTruthBundle bundle = make_supervision(run.scene, run.rig.training_models(), run.supervision_spec());
  const FitProblem problem = run.problem(bundle);
  config::save_json(out / "config.json", config::run_config_to_json(run.rc));

  if (flags.mode == "pipeline") {
    const PipelineResult result = run_splat_pipeline(problem, run.scene, run.rc.densify_iterations, run.threads);
    io::write_vxg(out / "sparse.vxg", result.sparse);
    io::write_vxg(out / "dense.vxg", result.dense);
    io::write_vxg(out / "occupancy.vxg", occupancy_codes(result.occupancy));
    json metrics = config::report_to_json(result.report);
    metrics["schema"] = config::kMetricsSchema;
    config::save_json(out / "metrics.json", metrics);
    std::cout << "pipeline mIoU " << result.report.miou << "\n";
    return kOk;
  }

  const EvalSetup setup{run.scene, run.heldout(), run.rig.bins, run.rc.stride, run.rc.eval_min_abs_sdf, run.threads};
  const FitState init = FitState::initial(run.rc.grid, run.scene.classes, fc.initial_laplace());
  const FitMetrics baseline = evaluate_fit(init, problem, setup);

  FitResult result;
  try {
    result = fit(fc, problem, init, [&](const FitState& s, const LossBreakdown& l) {
      if (flags.log_every > 0 && s.step % flags.log_every == 0) {
        std::fprintf(stderr, "step %ld total %.6f dep_cam %.6f dep_bev %.6f sem_cam %.6f sem_bev %.6f\n", s.step,
                     l.total, l.depth_camera, l.depth_bev, l.semantic_camera, l.semantic_bev);
      }
    });
  } catch (const FitAborted& e) {
    config::write_checkpoint(out / "checkpoint", e.partial().state);
    io::write_loss_csv(out / "loss.csv", e.partial().log);
    std::cerr << "error: " << e.what() << "\nlast good checkpoint (step " << e.partial().state.step << ") in "
              << (out / "checkpoint").string() << "\n";
    return kNonFinite;
  }

  config::write_checkpoint(out / "checkpoint", result.state);
  io::write_loss_csv(out / "loss.csv", result.log);
  const FitMetrics final_metrics = evaluate_fit(result.state, problem, setup);
  json metrics = config::metrics_to_json(final_metrics);
  metrics["steps"] = result.state.step;
  metrics["baseline"] = config::metrics_to_json(baseline);
  metrics["baseline"].erase("schema");
  config::save_json(out / "metrics.json", metrics);
  std::cout << "fit " << result.state.step << " steps: mIoU " << baseline.occupancy.miou << " -> "
            << final_metrics.occupancy.miou << ", held-out depth MAE " << baseline.depth_mae << " -> "
            << final_metrics.depth_mae << " m\n";
  return kOk;
}

struct EvalFlags {
  RunFlags run;
  std::optional<std::string> checkpoint;
  std::optional<std::string> pred;
  std::optional<std::string> report;
};

int cmd_eval_occ(const EvalFlags& flags) {
  const Run run = load_run(flags.run);
  json metrics;
  if (flags.checkpoint) {
    const FitState state = config::read_checkpoint(*flags.checkpoint);
    require_grid(state.sdf, run.rc.grid, "checkpoint grid");
    const GroundTruthBundle bundle = make_supervision(run.scene, run.rig.training_models(), run.supervision_spec());
    const EvalSetup setup{run.scene, run.heldout(), run.rig.bins, run.rc.stride, run.rc.eval_min_abs_sdf, run.threads};
    metrics = config::metrics_to_json(evaluate_fit(state, run.problem(bundle), setup));
  } else if (flags.pred) {
    const VoxelGrid codes = io::read_vxg(*flags.pred);
    require_grid(codes, run.rc.grid, "prediction grid");
    const OccupancyGrid pred = occupancy_from_codes(codes, run.scene.classes);
    const OccupancyGrid gt = occupancy_labels(run.scene, run.rc.grid);
    std::vector<std::uint8_t> mask(gt.labels.size());
    const auto& d = run.rc.grid.dims;
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z) {
      for (int y = 0; y < d.ny; ++y) {
        for (int x = 0; x < d.nx; ++x, ++i) {
          mask[i] = std::abs(scene_sdf(run.scene, run.rc.grid.voxel_center(x, y, z)).distance) > run.rc.eval_min_abs_sdf;
        }
      }
    }
    metrics = config::report_to_json(miou(pred, gt, mask));
    metrics["schema"] = config::kMetricsSchema;
  } else {
    throw InputError("eval-occ needs --checkpoint or --pred");
  }
  if (flags.report) {
    config::save_json(*flags.report, metrics);
  } else {
    std::cout << metrics.dump(2) << "\n";
  }
  return kOk;
}

struct GradFlags {
  gradcheck::Options options;
  std::optional<int> threads;
};

int cmd_grad_check(GradFlags flags) {
  flags.options.threads = resolve_threads(flags.threads);
  if (flags.options.grid < 2 || flags.options.cameras < 1 || flags.options.pixels < 1) {
    throw InputError("grad-check sizes must be positive (grid >= 2)");
  }
  bool ok = true;
  double total = 0.0;
  std::printf("%-12s %14s %10s %8s %8s %9s\n", "suite", "max_rel_err", "threshold", "checks", "kinks", "seconds");
  for (const auto& r : gradcheck::run_all(flags.options)) {
    std::printf("%-12s %14.3e %10.0e %8zu %8zu %9.3f %s\n", r.name.c_str(), r.max_rel_error, r.threshold, r.checks,
                r.skipped, r.seconds, r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
    total += r.seconds;
  }
  std::printf("total %.3f s\n", total);
  if (!ok) throw GradCheckFailed("gradient check exceeded its threshold");
  return kOk;
}

struct BenchFlags {
  RunFlags run;
  int steps = 10;
};

int cmd_bench(const BenchFlags& flags) {
  Run run = load_run(flags.run);
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };

  auto t = clock::now();
  const GroundTruthBundle bundle = make_supervision(run.scene, run.rig.training_models(), run.supervision_spec());
  const double gt_s = seconds_since(t);
  const FitProblem problem = run.problem(bundle);

  FitConfig fc = run.rc.fit;
  FitState state = FitState::initial(run.rc.grid, run.scene.classes, fc.initial_laplace());
  t = clock::now();
  for (int i = 0; i < flags.steps; ++i) fit_step(state, problem, fc);
  const double step_s = seconds_since(t) / std::max(flags.steps, 1);

  t = clock::now();
  const PipelineResult pipe = run_splat_pipeline(problem, run.scene, run.rc.densify_iterations, run.threads);
  const double pipe_s = seconds_since(t);

  const json report = {{"threads", run.threads},
                       {"ground_truth_seconds", gt_s},
                       {"fit_step_seconds", step_s},
                       {"projected_fit_seconds", step_s * run.rc.fit.steps},
                       {"splat_pipeline_seconds", pipe_s},
                       {"pipeline_miou", pipe.report.miou}};
  std::cout << report.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxreg: differentiable voxel rendering as a feature regulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "voxreg 0.1.0");

  RunFlags gen_flags;
  auto* gen = app.add_subcommand("gen-scene", "Write ground-truth supervision, occupancy and baked grids");
  add_run_flags(gen, gen_flags);

  RenderFlags render_flags;
  auto* render = app.add_subcommand("render", "Render depth, semantic and weight maps from grids");
  add_run_flags(render, render_flags.run);
  render->add_option("--checkpoint", render_flags.checkpoint, "Checkpoint directory");
  render->add_option("--sdf", render_flags.sdf, "SDF grid (VXG1)");
  render->add_option("--semantic", render_flags.semantic, "Semantic grid (VXG1)");
  render->add_option("--alpha", render_flags.alpha, "Density scale alpha with --sdf")->capture_default_str();
  render->add_option("--beta", render_flags.beta, "Density sharpness beta with --sdf")->capture_default_str();

  SplatFlags splat_flags;
  auto* splat_cmd = app.add_subcommand("splat", "Lift feature images along depth bins into a voxel grid");
  add_run_flags(splat_cmd, splat_flags.run);
  splat_cmd->add_option("--features", splat_flags.features, "VXF1 image per training camera (default: from ground truth)");

  DensifyFlags densify_flags;
  auto* densify = app.add_subcommand("densify", "Fill empty voxels of a sparse grid");
  densify->add_option("input", densify_flags.input, "Sparse VXG1 grid")->required()->check(CLI::ExistingFile);
  densify->add_option("-o,--out", densify_flags.output, "Dense VXG1 grid")->required();
  densify->add_option("--iterations", densify_flags.iterations, "Fill iterations")->capture_default_str();
  densify->add_flag("--coords", densify_flags.coords, "Append normalized coordinate channels");

  FitFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "Fit SDF and semantic grids to rendered supervision");
  add_run_flags(fit_cmd, fit_flags.run);
  const auto on_off = CLI::IsMember({"on", "off"});
  fit_cmd->add_option("--steps", fit_flags.steps, "Adam steps");
  fit_cmd->add_option("--lr", fit_flags.lr, "Learning rate");
  fit_cmd->add_option("--camera-sup", fit_flags.camera_sup, "Camera supervision on|off")->check(on_off);
  fit_cmd->add_option("--bev-sup", fit_flags.bev_sup, "BEV supervision on|off")->check(on_off);
  fit_cmd->add_option("--depth-loss", fit_flags.depth_loss, "Depth loss on|off")->check(on_off);
  fit_cmd->add_option("--sem-loss", fit_flags.sem_loss, "Semantic loss on|off")->check(on_off);
  fit_cmd->add_option("--mode", fit_flags.mode, "regulator | pipeline")
      ->check(CLI::IsMember({"regulator", "pipeline"}))
      ->capture_default_str();
  fit_cmd->add_option("--log-every", fit_flags.log_every, "Progress line interval (0 = quiet)")->capture_default_str();

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval-occ", "Occupancy mIoU of a checkpoint or a predicted label grid");
  add_run_flags(eval, eval_flags.run, false);
  eval->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint directory");
  eval->add_option("--pred", eval_flags.pred, "Predicted labels (VXG1, C = 1)");
  eval->add_option("--report", eval_flags.report, "Write metrics JSON here instead of stdout");

  GradFlags grad_flags;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suites");
  grad->add_option("--seed", grad_flags.options.seed, "Seed")->capture_default_str();
  grad->add_option("--grid", grad_flags.options.grid, "End-to-end lattice size")->capture_default_str();
  grad->add_option("--cameras", grad_flags.options.cameras, "End-to-end cameras")->capture_default_str();
  grad->add_option("--pixels", grad_flags.options.pixels, "End-to-end image size")->capture_default_str();
  grad->add_option("--threads", grad_flags.threads, "Worker threads");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Time ground truth, fit steps and the splat pipeline");
  add_run_flags(bench, bench_flags.run, false);
  bench->add_option("--steps", bench_flags.steps, "Fit steps to time")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (gen->parsed()) return cmd_gen_scene(gen_flags);
    if (render->parsed()) return cmd_render(render_flags);
    if (splat_cmd->parsed()) return cmd_splat(splat_flags);
    if (densify->parsed()) return cmd_densify(densify_flags);
    if (fit_cmd->parsed()) return cmd_fit(fit_flags);
    if (eval->parsed()) return cmd_eval_occ(eval_flags);
    if (grad->parsed()) return cmd_grad_check(grad_flags);
    if (bench->parsed()) return cmd_bench(bench_flags);
  } catch (const GradCheckFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGradCheck;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonFinite;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
