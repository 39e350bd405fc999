// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks for the toolkit. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include "voxreg/config.hpp"
#include "voxreg/gradcheck.hpp"
#include "voxreg/io.hpp"
#include "voxreg/losses.hpp"
#include "voxreg/optimizer.hpp"
#include "voxreg/render.hpp"
#include "voxreg/scene.hpp"
#include "voxreg/splat.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace voxreg;
namespace fs = std::filesystem;

namespace {

const fs::path kReferenceConfig = fs::path(VOXREG_SOURCE_DIR) / "configs" / "reference.json";

// Occupancy mIoU of the first validated 2000-step reference fit.
constexpr double kPinnedMiou = 0.4054;
constexpr double kPinnedTolerance = 0.02;

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::cout << id << " " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Reference {
  config::RunConfig rc;
  SceneSpec scene;
  config::CameraRig rig;
  GroundTruthBundle bundle;
  FitProblem problem;
};

Reference load_reference() {
  Reference r;
  r.rc = config::load_run_config(kReferenceConfig);
  r.scene = config::scene_from_json(config::load_json(r.rc.scene_path));
  r.rig = config::rig_from_json(config::load_json(r.rc.rig_path));
  SupervisionSpec s;
  s.grid = r.rc.grid;
  s.bins = r.rig.bins;
  s.stride = r.rc.stride;
  s.bev_nx = r.rc.bev_nx;
  s.bev_ny = r.rc.bev_ny;
  s.lidar_rate = r.rc.lidar_rate;
  s.seed = r.rc.seed;
  r.bundle = make_supervision(r.scene, r.rig.training_models(), s);
  r.problem = FitProblem::build(r.rc.grid, r.scene.classes, r.scene.free_class, r.rig.bins, r.rc.stride,
                                r.rig.training_models(), r.bundle);
  return r;
}

void ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  gradcheck::Options o;
  o.threads = 1;
  const auto results = gradcheck::run_all(o);
  const double secs = seconds_since(t0);
  bool pass = secs < 60.0;
  std::ostringstream d;
  for (const auto& r : results) {
    pass = pass && r.passed();
    d << r.name << "=" << r.max_rel_error << " ";
  }
  d << "(" << secs << " s)";
  report("AC1", pass, d.str());
}

void ac2() {
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto r = oracle::random_ray(rng);
    const auto out = composite({r.t, r.sigma, r.logits, {}, r.classes, r.last_delta});
    const auto o = oracle::composite(r.t, r.sigma, r.logits, r.classes, r.last_delta);
    worst = std::max({worst, std::abs(out.depth - o.depth), std::abs(out.weight_sum - o.weight_sum)});
    for (int c = 0; c < r.classes; ++c) worst = std::max(worst, std::abs(out.semantic[c] - o.semantic[c]));
  }
  const std::vector<double> t{0.5, 1.5}, sigma{1.0, 1.0};
  const auto hand = composite({t, sigma, {}, {}, 0, std::nullopt});
  const bool pass = worst < 1e-12 && std::abs(hand.depth - 0.664903) < 1e-6 && std::abs(hand.weight_sum - 0.864665) < 1e-6;
  std::ostringstream d;
  d << "max |diff| " << worst << " over 10000 rays; hand D=" << hand.depth << " W=" << hand.weight_sum;
  report("AC2", pass, d.str());
}

void ac3() {
  std::mt19937_64 rng(3003);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto r = oracle::random_ray(rng);
    const auto out = composite({r.t, r.sigma, r.logits, {}, r.classes, r.last_delta});
    const auto delta = interval_lengths(r.t, r.last_delta);
    double survive = 1.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) survive *= 1.0 - (1.0 - std::exp(-r.sigma[i] * delta[i]));
    worst = std::max(worst, std::abs(out.weight_sum - (1.0 - survive)));
    worst = std::max(worst, out.weight_sum - 1.0);
    for (std::size_t i = 1; i < out.transmittance.size(); ++i)
      worst = std::max(worst, out.transmittance[i] - out.transmittance[i - 1]);
  }
  std::ostringstream d;
  d << "max violation " << worst << " over 10000 rays";
  report("AC3", worst <= 1e-9, d.str());
}

void ac4() {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> u(-1.0, 1.0), up(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 0.3);
  GridSpec spec;
  spec.dims = {8, 7, 6};
  spec.extent.min = Vec3(-2, -2, -1.5);
  spec.extent.max = Vec3(2, 1.5, 1.5);
  const DepthBins bins{2.0, 6.0, 10};
  const auto z = sample_depths(bins);
  auto random_image = [&](int w, int h, int c) {
    FeatureImage img(w, h, c, bins.count);
    for (double& v : img.features) v = u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        for (int k = 0; k < bins.count; ++k) sum += img.prob(k, y, x) = up(rng);
        for (int k = 0; k < bins.count; ++k) img.prob(k, y, x) /= sum;
      }
    return img;
  };
  double adjoint = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<CameraModel> cams;
    std::vector<FeatureImage> images;
    for (int c = 0; c < 2; ++c) {
      const double a = u(rng) * 3.14159;
      cams.push_back(CameraModel::look_at({5, 5, 3, 2.5, 6, 5}, Vec3(4 * std::cos(a), 4 * std::sin(a), n(rng)),
                                          Vec3(n(rng), n(rng), n(rng))));
      images.push_back(random_image(6, 5, 2));
    }
    VoxelGrid g(spec, 2);
    for (double& v : g.data()) v = u(rng);
    const VoxelGrid s = splat(images, cams, bins, spec);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.data().size(); ++i) lhs += s.data()[i] * g.data()[i];
    for (std::size_t c = 0; c < cams.size(); ++c)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
          for (int k = 0; k < bins.count; ++k) {
            const auto v = grid_sample(g, cams[c].back_project(x + 0.5, y + 0.5, z[k]));
            for (int ch = 0; ch < 2; ++ch) rhs += images[c].prob(k, y, x) * images[c].feature(ch, y, x) * v[ch];
          }
    adjoint = std::max(adjoint, std::abs(lhs - rhs));
  }
  // Mass: every lifted point lands well inside a large lattice.
  GridSpec big;
  big.dims = {20, 20, 20};
  big.extent.min = Vec3::Constant(-20.0);
  big.extent.max = Vec3::Constant(20.0);
  const auto cam = CameraModel::look_at({4, 4, 2, 2, 4, 4}, Vec3(1, 2, 0), Vec3(5, 3, 1));
  const FeatureImage img = random_image(4, 4, 3);
  const VoxelGrid s = splat({img}, {cam}, bins, big);
  double mass = 0.0;
  for (int c = 0; c < 3; ++c) {
    double expected = 0.0, got = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int k = 0; k < bins.count; ++k) expected += img.feature(c, y, x) * img.prob(k, y, x);
    for (double v : s.channel(c)) got += v;
    mass = std::max(mass, std::abs(got - expected));
  }
  std::ostringstream d;
  d << "adjoint max |diff| " << adjoint << " over 100 cases; mass |diff| " << mass;
  report("AC4", adjoint < 1e-9 && mass < 1e-9, d.str());
}

void ac5(const Reference& ref) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto baked = bake_sdf(ref.scene, ref.rc.grid);
  const auto density = density_volume_from_sdf(baked.sdf, LaplaceParams::from_scales(10.0, 0.1));
  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < ref.problem.cameras.size(); ++c) {
    const auto out = render_camera(density, baked.semantic, ref.problem.cameras[c], ref.rig.bins, ref.rc.stride);
    const auto& sup = ref.bundle.cameras[c];
    for (std::size_t i = 0; i < out.pixels(); ++i) {
      if (!sup.valid(i)) continue;
      err += std::abs(out.depth[i] - sup.depth[i]);
      ++count;
    }
  }
  const double cam_mae = count ? err / double(count) : INFINITY;
  const auto bev = render_rays(ref.problem.bev_rays, density, baked.semantic);
  err = 0.0;
  std::size_t bev_count = 0;
  for (std::size_t i = 0; i < bev.pixels(); ++i) {
    if (!ref.bundle.bev.valid(i)) continue;
    err += std::abs(bev.depth[i] - ref.bundle.bev.depth[i]);
    ++bev_count;
  }
  const double bev_mae = bev_count ? err / double(bev_count) : INFINITY;
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "camera depth MAE " << cam_mae << " m over " << count << " px; BEV height MAE " << bev_mae << " m over "
    << bev_count << " px (" << secs << " s)";
  report("AC5", cam_mae < 1.0 && bev_mae < 0.4 && secs < 120.0, d.str());
}

struct FitRun {
  FitResult result;
  FitMetrics baseline;
  FitMetrics final_metrics;
  double seconds = 0.0;
};

FitRun run_fit(const Reference& ref, bool camera, bool bev) {
  FitConfig cfg = ref.rc.fit;
  cfg.camera_supervision = camera;
  cfg.bev_supervision = bev;
  const EvalSetup setup{ref.scene, ref.rig.heldout.front().camera, ref.rig.bins, ref.rc.stride, ref.rc.eval_min_abs_sdf,
                        1};
  const auto t0 = std::chrono::steady_clock::now();
  FitRun run;
  const FitState init = FitState::initial(ref.rc.grid, ref.scene.classes, cfg.initial_laplace());
  run.baseline = evaluate_fit(init, ref.problem, setup);
  run.result = fit(cfg, ref.problem, init);
  run.final_metrics = evaluate_fit(run.result.state, ref.problem, setup);
  run.seconds = seconds_since(t0);
  return run;
}

FitRun ac6(const Reference& ref) {
  FitRun run = run_fit(ref, true, true);
  const auto& log = run.result.log;
  // Loss summed over consecutive 200-step windows must fall window to window.
  constexpr std::size_t kWindow = 200;
  bool monotone = log.size() >= 2 * kWindow;
  double prev = INFINITY;
  for (std::size_t w = 0; w + kWindow <= log.size(); w += kWindow) {
    double sum = 0.0;
    for (std::size_t i = w; i < w + kWindow; ++i) sum += log[i].total;
    monotone = monotone && sum < prev;
    prev = sum;
  }
  const double ratio = run.baseline.depth_mae / run.final_metrics.depth_mae;
  const double gain = run.final_metrics.occupancy.miou - run.baseline.occupancy.miou;
  const bool pinned = std::abs(run.final_metrics.occupancy.miou - kPinnedMiou) <= kPinnedTolerance;
  std::ostringstream d;
  d << log.size() << " steps, windowed loss " << (monotone ? "decreasing" : "NOT decreasing") << " ("
    << log.front().total << " -> " << log.back().total << "); held-out depth MAE " << run.baseline.depth_mae << " -> "
    << run.final_metrics.depth_mae << " m (x" << ratio << "); mIoU " << run.baseline.occupancy.miou << " -> "
    << run.final_metrics.occupancy.miou << " (+" << gain << ", pinned " << kPinnedMiou << "); " << run.seconds << " s";
  report("AC6", monotone && ratio >= 5.0 && gain >= 0.3 && pinned && run.seconds < 900.0, d.str());
  return run;
}

void ac7(const Reference& ref, const FitRun& joint) {
  const FitRun cam = run_fit(ref, true, false);
  const FitRun bev = run_fit(ref, false, true);
  const double j = joint.final_metrics.occupancy.miou;
  const double c = cam.final_metrics.occupancy.miou;
  const double b = bev.final_metrics.occupancy.miou;
  std::ostringstream d;
  d << "mIoU joint " << j << ", camera only " << c << ", BEV only " << b;
  report("AC7", j >= std::max(c, b) - 0.02, d.str());
}

void ac8() {
  std::mt19937_64 rng(8008);
  const auto probs = oracle::random_probs(6, 3, rng);
  std::vector<int> labels(6);
  double worst = 0.0;
  for (int code = 0; code < 729; ++code) {
    int r = code;
    for (int i = 0; i < 6; ++i, r /= 3) labels[i] = r % 3;
    worst = std::max(worst, std::abs(lovasz_softmax(probs, labels, 3).loss - oracle::lovasz(probs, labels, 3)));
  }
  std::ostringstream d;
  d << "max |diff| " << worst << " over 729 labelings";
  report("AC8", worst < 1e-12, d.str());
}

void ac9() {
#ifdef VOXREG_CLI
  const fs::path work = fs::temp_directory_path() / "voxreg_acceptance";
  fs::remove_all(work);
  constexpr int kSteps = 200;
  auto run = [&](int threads) {
    const fs::path out = work / ("threads" + std::to_string(threads));
    const std::string cmd = std::string("\"") + VOXREG_CLI + "\" fit \"" + kReferenceConfig.string() + "\" -o \"" +
                            out.string() + "\" --seed 7 --steps " + std::to_string(kSteps) + " --threads " +
                            std::to_string(threads) + " --log-every 0 > /dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) return std::vector<LossBreakdown>{};
    return io::read_loss_csv(out / "loss.csv");
  };
  const auto a = run(1);
  const auto b = run(8);
  double worst = a.empty() || a.size() != b.size() ? INFINITY : 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    worst = std::max({worst, std::abs(a[i].total - b[i].total), std::abs(a[i].depth_camera - b[i].depth_camera),
                      std::abs(a[i].depth_bev - b[i].depth_bev), std::abs(a[i].semantic_camera - b[i].semantic_camera),
                      std::abs(a[i].semantic_bev - b[i].semantic_bev)});
  }
  std::ostringstream d;
  d << "voxreg fit, " << kSteps << " steps, --threads 1 vs 8: max loss-log |diff| " << worst;
  report("AC9", worst <= 1e-9, d.str());
#else
  report("AC9", false, "CLI not built");
#endif
}

}  // namespace

int main() {
  try {
    ac1();
    ac2();
    ac3();
    ac4();
    const Reference ref = load_reference();
    ac5(ref);
    const FitRun joint = ac6(ref);
    ac7(ref, joint);
    ac8();
    ac9();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
