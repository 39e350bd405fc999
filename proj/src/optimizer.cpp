// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/optimizer.hpp"

#include "voxreg/error.hpp"
#include "voxreg/splat.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace voxreg {

namespace {

void adam_update(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
                 const AdamConfig& adam, long step, double weight_decay) {
  const double bias1 = 1.0 - std::pow(adam.beta1, double(step));
  const double bias2 = 1.0 - std::pow(adam.beta2, double(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
    params[i] *= 1.0 - adam.lr * weight_decay;
    params[i] -= adam.lr * (m / bias1) / (std::sqrt(v / bias2) + adam.eps);
  }
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string describe(const LossBreakdown& l) {
  std::ostringstream s;
  s << "L_dep_cam=" << l.depth_camera << " L_dep_bev=" << l.depth_bev << " L_sem_cam=" << l.semantic_camera
    << " L_sem_bev=" << l.semantic_bev << " total=" << l.total;
  return s.str();
}

}  // namespace

void FitConfig::validate() const {
  if (!(adam.lr >= 0.0) || !(adam.weight_decay >= 0.0) || !std::isfinite(adam.lr) || !std::isfinite(adam.weight_decay)) {
    throw InputError("learning rate and weight decay must be finite and >= 0");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw InputError("Adam betas must lie in [0, 1) and eps must be positive");
  }
  if (steps < 0) throw InputError("fit steps must be >= 0");
  if (threads <= 0) throw InputError("thread count must be positive");
  initial_laplace();
}

FitState FitState::initial(const GridSpec& grid, int classes, const LaplaceParams& laplace) {
  FitState s{VoxelGrid(grid, 1, 0.0), VoxelGrid(grid, classes, 0.0), laplace,
             AdamMoments(), AdamMoments(), AdamMoments(2), 0};
  s.sdf_moments = AdamMoments(s.sdf.data().size());
  s.semantic_moments = AdamMoments(s.semantic.data().size());
  return s;
}

void FitState::validate() const {
  if (sdf.channels() != 1 || sdf.spec() != semantic.spec()) throw ShapeError("fit state grids are inconsistent");
  if (sdf_moments.first.size() != sdf.data().size() || sdf_moments.second.size() != sdf.data().size() ||
      semantic_moments.first.size() != semantic.data().size() ||
      semantic_moments.second.size() != semantic.data().size() || laplace_moments.first.size() != 2 ||
      laplace_moments.second.size() != 2) {
    throw ShapeError("Adam moments do not match the parameters");
  }
  if (step < 0) throw InputError("fit step counter must be >= 0");
}

FitProblem FitProblem::build(const GridSpec& grid, int classes, int free_class, const DepthBins& bins, int stride,
                             std::vector<CameraModel> cameras, const GroundTruthBundle& bundle) {
  if (cameras.size() != bundle.cameras.size()) throw ShapeError("one supervision map per camera is required");
  FitProblem p;
  p.grid = grid;
  p.classes = classes;
  p.free_class = free_class;
  p.bins = bins;
  p.stride = stride;
  p.cameras = std::move(cameras);
  for (std::size_t i = 0; i < p.cameras.size(); ++i) {
    p.camera_rays.push_back(camera_ray_set(p.cameras[i], bins, stride));
    const auto& sup = bundle.cameras[i];
    if (sup.width != p.camera_rays.back().width || sup.height != p.camera_rays.back().height) {
      throw ShapeError("camera supervision does not match the render stride");
    }
    sup.validate(classes);
  }
  p.camera_supervision = bundle.cameras;
  p.bev_supervision = bundle.bev;
  p.bev_supervision.validate(classes);
  p.bev_rays = bev_ray_set(grid.extent, bundle.bev.width, bundle.bev.height, grid.dims.nz);
  return p;
}

LossBreakdown regulator_objective(const VoxelGrid& sdf, const VoxelGrid& semantic, const LaplaceParams& laplace,
                                  const FitProblem& problem, const FitConfig& config, ParamGradients* grads) {
  if (sdf.spec() != problem.grid || semantic.spec() != problem.grid || semantic.channels() != problem.classes) {
    throw ShapeError("parameter grids do not match the fit problem");
  }
  const VoxelGrid density = density_volume_from_sdf(sdf, laplace);

  std::vector<RenderOutput> camera_renders;
  std::vector<RenderOutput> bev_renders;
  if (config.camera_supervision) {
    for (const auto& rays : problem.camera_rays) camera_renders.push_back(render_rays(rays, density, semantic, config.threads));
  }
  if (config.bev_supervision) bev_renders.push_back(render_rays(problem.bev_rays, density, semantic, config.threads));

  std::vector<ViewRef> camera_views, bev_views;
  for (std::size_t i = 0; i < camera_renders.size(); ++i) {
    camera_views.push_back({&camera_renders[i], &problem.camera_supervision[i]});
  }
  if (!bev_renders.empty()) bev_views.push_back({&bev_renders[0], &problem.bev_supervision});

  std::vector<ViewGrad> camera_grads, bev_grads;
  const LossBreakdown loss = regulator_loss(camera_views, bev_views, config.weights, camera_grads, bev_grads, config.loss);
  if (!grads) return loss;

  grads->sdf = GridGradient(sdf);
  grads->semantic = GridGradient(semantic);
  GridGradient d_density(density);
  for (std::size_t i = 0; i < camera_renders.size(); ++i) {
    render_rays_adjoint(problem.camera_rays[i], density, semantic, camera_grads[i].upstream(), d_density,
                        grads->semantic, config.threads);
  }
  if (!bev_renders.empty()) {
    render_rays_adjoint(problem.bev_rays, density, semantic, bev_grads[0].upstream(), d_density, grads->semantic,
                        config.threads);
  }
  grads->laplace = density_volume_adjoint(sdf, laplace, d_density, grads->sdf);
  return loss;
}

LossBreakdown fit_step(FitState& state, const FitProblem& problem, const FitConfig& config) {
  state.validate();
  ParamGradients grads;
  const LossBreakdown loss = regulator_objective(state.sdf, state.semantic, state.laplace, problem, config, &grads);
  if (!std::isfinite(loss.total)) throw NumericError("non-finite loss at step " + std::to_string(state.step) + ": " + describe(loss));
  const std::array<double, 2> d_laplace = {grads.laplace.d_log_alpha, grads.laplace.d_log_beta};
  if (!all_finite(grads.sdf.data()) || !all_finite(grads.semantic.data()) || !all_finite(d_laplace)) {
    throw NumericError("non-finite gradient at step " + std::to_string(state.step) + ": " + describe(loss));
  }
  const long t = state.step + 1;
  FitState next = state;
  adam_update(next.sdf.data(), grads.sdf.data(), next.sdf_moments, config.adam, t, config.adam.weight_decay);
  adam_update(next.semantic.data(), grads.semantic.data(), next.semantic_moments, config.adam, t,
              config.adam.weight_decay);
  if (config.learn_laplace) {
    std::array<double, 2> params = {next.laplace.log_alpha, next.laplace.log_beta};
    adam_update(params, d_laplace, next.laplace_moments, config.adam, t, 0.0);
    next.laplace.log_alpha = params[0];
    next.laplace.log_beta = params[1];
  }
  const double alpha = next.laplace.alpha(), beta = next.laplace.beta();
  if (!all_finite(next.sdf.data()) || !all_finite(next.semantic.data()) || !std::isfinite(alpha) ||
      !std::isfinite(beta) || !(alpha > 0.0) || !(beta > 0.0)) {
    throw NumericError("update left non-finite parameters at step " + std::to_string(state.step) + ": " + describe(loss));
  }
  next.step = t;
  state = std::move(next);
  return loss;
}

FitResult fit(const FitConfig& config, const FitProblem& problem, FitState init, const FitObserver& observer) {
  config.validate();
  FitResult result{std::move(init), {}};
  result.log.reserve(config.steps);
  for (int i = 0; i < config.steps; ++i) {
    LossBreakdown loss;
    try {
      loss = fit_step(result.state, problem, config);
    } catch (const NumericError& e) {
      throw FitAborted(e.what(), std::move(result));
    }
    result.log.push_back(loss);
    if (observer) observer(result.state, loss);
  }
  return result;
}

VoxelGrid occupancy_scores(const VoxelGrid& density, const VoxelGrid& semantic, int free_class, double path_length) {
  if (density.channels() != 1 || density.spec() != semantic.spec()) throw ShapeError("occupancy_scores shape mismatch");
  if (free_class < 0 || free_class >= semantic.channels()) throw InputError("free class out of range");
  const int classes = semantic.channels();
  VoxelGrid out(semantic.spec(), classes);
  auto sigma = density.data();
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double optical = sigma[i] * path_length;
    const double log_occupied = std::log(std::max(-std::expm1(-optical), 1e-300));
    double m = -INFINITY;
    for (int c = 0; c < classes; ++c) {
      if (c != free_class) m = std::max(m, semantic.channel(c)[i]);
    }
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      if (c != free_class) sum += std::exp(semantic.channel(c)[i] - m);
    }
    const double log_norm = m + std::log(sum);
    for (int c = 0; c < classes; ++c) {
      out.channel(c)[i] = c == free_class ? -optical : log_occupied + semantic.channel(c)[i] - log_norm;
    }
  }
  return out;
}

FitMetrics evaluate_fit(const FitState& state, const FitProblem& problem, const EvalSetup& setup) {
  FitMetrics metrics;
  const VoxelGrid density = density_volume_from_sdf(state.sdf, state.laplace);

  const Vec3 voxel = problem.grid.voxel_size();
  const VoxelGrid scores = occupancy_scores(density, state.semantic, problem.free_class, voxel.minCoeff());
  const OccupancyGrid pred = predict_occupancy(scores, problem.grid, setup.threads);
  const OccupancyGrid gt = occupancy_labels(setup.scene, problem.grid);
  std::vector<std::uint8_t> mask(gt.labels.size(), 0);
  const auto& d = problem.grid.dims;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const double s = scene_sdf(setup.scene, problem.grid.voxel_center(x, y, z)).distance;
        mask[(std::size_t(z) * d.ny + y) * d.nx + x] = std::abs(s) > setup.min_abs_sdf;
      }
    }
  }
  metrics.occupancy = miou(pred, gt, mask);

  SupervisionSpec sup_spec;
  sup_spec.grid = problem.grid;
  sup_spec.bins = setup.bins;
  sup_spec.stride = setup.stride;
  sup_spec.bev_nx = problem.bev_supervision.width;
  sup_spec.bev_ny = problem.bev_supervision.height;
  sup_spec.lidar_rate = 1.0;
  const GroundTruthBundle truth = make_supervision(setup.scene, {setup.heldout}, sup_spec);

  const RenderOutput held = render_camera(density, state.semantic, setup.heldout, setup.bins, setup.stride, setup.threads);
  double err = 0.0;
  for (std::size_t i = 0; i < held.pixels(); ++i) {
    if (!truth.cameras[0].valid(i)) continue;
    err += std::abs(held.depth[i] - truth.cameras[0].depth[i]);
    ++metrics.depth_pixels;
  }
  metrics.depth_mae = metrics.depth_pixels ? err / double(metrics.depth_pixels) : 0.0;

  const RenderOutput bev = render_rays(problem.bev_rays, density, state.semantic, setup.threads);
  err = 0.0;
  for (std::size_t i = 0; i < bev.pixels(); ++i) {
    if (!truth.bev.valid(i)) continue;
    err += std::abs(bev.depth[i] - truth.bev.depth[i]);
    ++metrics.bev_pixels;
  }
  metrics.bev_height_mae = metrics.bev_pixels ? err / double(metrics.bev_pixels) : 0.0;
  return metrics;
}

std::vector<CameraModel> strided_cameras(const FitProblem& problem) {
  std::vector<CameraModel> out;
  for (const auto& cam : problem.cameras) out.push_back(cam.strided(problem.stride));
  return out;
}

std::vector<FeatureImage> supervision_features(const FitProblem& problem) {
  std::vector<FeatureImage> images;
  for (const auto& sup : problem.camera_supervision) {
    FeatureImage image(sup.width, sup.height, problem.classes, problem.bins.count);
    for (int v = 0; v < sup.height; ++v) {
      for (int u = 0; u < sup.width; ++u) {
        const std::size_t k = std::size_t(v) * sup.width + u;
        if (!sup.valid(k)) {
          for (int b = 0; b < image.bins; ++b) image.prob(b, v, u) = 1.0 / image.bins;
          continue;
        }
        const int bin = std::clamp(int((sup.depth[k] - problem.bins.near) / problem.bins.spacing()), 0, image.bins - 1);
        image.prob(bin, v, u) = 1.0;
        image.feature(sup.labels[k], v, u) = 1.0;
      }
    }
    images.push_back(std::move(image));
  }
  return images;
}

PipelineResult run_splat_pipeline(const FitProblem& problem, const SceneSpec& scene, int densify_iterations,
                                  int threads) {
  const std::vector<FeatureImage> images = supervision_features(problem);
  const std::vector<CameraModel> cameras = strided_cameras(problem);
  PipelineResult out;
  out.sparse = splat(images, cameras, problem.bins, problem.grid, threads);
  // Coordinates are non-zero everywhere, so occupancy comes from the
  // splatted feature channels alone.
  const auto mask = nonzero_mask(out.sparse);
  out.dense = apply_densifier([&](const VoxelGrid& g) { return densify_baseline(g, densify_iterations, mask); },
                              concat_channels(out.sparse, coord_volume(problem.grid)));
  VoxelGrid semantic(problem.grid, problem.classes);
  for (int c = 0; c < problem.classes; ++c) {
    std::copy(out.dense.channel(c).begin(), out.dense.channel(c).end(), semantic.channel(c).begin());
  }
  // Voxels nothing reached stay free.
  for (std::size_t i = 0; i < semantic.voxels(); ++i) {
    bool any = false;
    for (int c = 0; c < problem.classes && !any; ++c) any = semantic.channel(c)[i] != 0.0;
    if (!any) semantic.channel(problem.free_class)[i] = 1.0;
  }
  out.occupancy = predict_occupancy(semantic, problem.grid, threads);
  out.report = miou(out.occupancy, occupancy_labels(scene, problem.grid));
  return out;
}

}  // namespace voxreg
