// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/render.hpp"

#include "voxreg/error.hpp"
#include "voxreg/parallel.hpp"

#include <cmath>
#include <numeric>

namespace voxreg {

namespace {

void check_samples(const RaySamples& s) {
  const std::size_t n = s.t.size();
  if (n == 0) throw InputError("composite needs at least one sample");
  if (s.sigma.size() != n) throw ShapeError("sigma and t lengths differ");
  if (s.classes < 0 || s.logits.size() != n * std::size_t(s.classes)) throw ShapeError("logits size != n * classes");
  if (!s.values.empty() && s.values.size() != n) throw ShapeError("values and t lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(s.t[i])) throw InputError("non-finite sample parameter");
    if (i > 0 && !(s.t[i] > s.t[i - 1])) throw InputError("sample parameters must be strictly increasing");
    if (!std::isfinite(s.sigma[i]) || s.sigma[i] < 0.0) throw InputError("density must be finite and non-negative");
  }
}

// Shared forward kernel; fills weights/transmittance and returns D, W and S.
void composite_kernel(std::span<const double> delta, std::span<const double> sigma, std::span<const double> values,
                      std::span<const double> logits, int classes, double* weights, double* transmittance,
                      double& depth, double& weight_sum, double* semantic) {
  double trans = 1.0;
  depth = 0.0;
  weight_sum = 0.0;
  for (int c = 0; c < classes; ++c) semantic[c] = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double optical = sigma[i] * delta[i];
    const double alpha = -std::expm1(-optical);
    const double w = trans * alpha;
    transmittance[i] = trans;
    weights[i] = w;
    depth += w * values[i];
    weight_sum += w;
    if (w != 0.0) {
      const double* s = logits.data() + i * classes;
      for (int c = 0; c < classes; ++c) semantic[c] += w * s[c];
    }
    trans *= std::exp(-optical);
  }
}

// Reverse kernel given forward weights/transmittance.
void composite_adjoint_kernel(std::span<const double> delta, std::span<const double> sigma,
                              std::span<const double> values, std::span<const double> logits, int classes,
                              const double* weights, const double* transmittance, double d_depth,
                              const double* d_semantic, double d_weight_sum, double* d_sigma, double* d_logits) {
  // suffix = sum_{i>k} g_i w_i, g_i = dL/dw_i
  double suffix = 0.0;
  for (std::size_t k = sigma.size(); k-- > 0;) {
    double g = d_depth * values[k] + d_weight_sum;
    const double* s = logits.data() + k * classes;
    if (d_semantic) {
      for (int c = 0; c < classes; ++c) g += d_semantic[c] * s[c];
      double* dl = d_logits + k * classes;
      for (int c = 0; c < classes; ++c) dl[c] = weights[k] * d_semantic[c];
    }
    d_sigma[k] = delta[k] * (g * transmittance[k] * std::exp(-sigma[k] * delta[k]) - suffix);
    suffix += g * weights[k];
  }
}

}  // namespace

std::vector<double> interval_lengths(std::span<const double> t, std::optional<double> last_delta) {
  const std::size_t n = t.size();
  std::vector<double> delta(n);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  if (n == 0) return delta;
  if (last_delta) {
    if (!(*last_delta > 0.0)) throw InputError("last interval length must be positive");
    delta[n - 1] = *last_delta;
  } else if (n == 1) {
    throw InputError("a single-sample ray needs an explicit interval length");
  } else {
    delta[n - 1] = (t[n - 1] - t[0]) / double(n - 1);
  }
  return delta;
}

PixelRender composite(const RaySamples& samples) {
  check_samples(samples);
  const std::size_t n = samples.t.size();
  const auto delta = interval_lengths(samples.t, samples.last_delta);
  PixelRender out;
  out.weights.resize(n);
  out.transmittance.resize(n);
  out.semantic.resize(samples.classes);
  composite_kernel(delta, samples.sigma, samples.values.empty() ? samples.t : samples.values, samples.logits,
                   samples.classes, out.weights.data(), out.transmittance.data(), out.depth, out.weight_sum,
                   out.semantic.data());
  return out;
}

SampleGradients composite_adjoint(const RaySamples& samples, const CompositeUpstream& upstream) {
  check_samples(samples);
  if (!upstream.d_semantic.empty() && upstream.d_semantic.size() != std::size_t(samples.classes)) {
    throw ShapeError("semantic upstream size != classes");
  }
  const std::size_t n = samples.t.size();
  const auto delta = interval_lengths(samples.t, samples.last_delta);
  const auto values = samples.values.empty() ? samples.t : samples.values;
  std::vector<double> weights(n), trans(n), sem(samples.classes);
  double depth = 0.0, wsum = 0.0;
  composite_kernel(delta, samples.sigma, values, samples.logits, samples.classes, weights.data(), trans.data(), depth,
                   wsum, sem.data());
  SampleGradients g;
  g.d_sigma.resize(n);
  g.d_logits.assign(n * samples.classes, 0.0);
  composite_adjoint_kernel(delta, samples.sigma, values, samples.logits, samples.classes, weights.data(), trans.data(),
                           upstream.d_depth, upstream.d_semantic.empty() ? nullptr : upstream.d_semantic.data(),
                           upstream.d_weight_sum, g.d_sigma.data(), g.d_logits.data());
  return g;
}

RaySet camera_ray_set(const CameraModel& camera, const DepthBins& bins, int stride) {
  if (stride <= 0) throw InputError("render stride must be positive");
  RaySet set;
  set.width = camera.width() / stride;
  set.height = camera.height() / stride;
  if (set.width == 0 || set.height == 0) throw InputError("render stride exceeds the image size");
  set.t = sample_depths(bins);
  set.values = set.t;
  set.samples_per_ray = bins.count;
  set.points.reserve(set.rays() * set.samples_per_ray);
  for (int j = 0; j < set.height; ++j) {
    for (int i = 0; i < set.width; ++i) {
      const double u = (i + 0.5) * stride;
      const double v = (j + 0.5) * stride;
      for (double z : set.t) set.points.push_back(camera.back_project(u, v, z));
    }
  }
  return set;
}

RaySet bev_ray_set(const Extent3& extent, int nx_px, int ny_px, int nz_samples) {
  const BevRayBatch batch = bev_rays(extent, nx_px, ny_px, nz_samples);
  RaySet set;
  set.width = nx_px;
  set.height = ny_px;
  set.samples_per_ray = nz_samples;
  set.t = batch.t;
  set.values = batch.heights;
  set.points.reserve(set.rays() * nz_samples);
  for (const Ray& ray : batch.rays) {
    for (double t : batch.t) set.points.push_back(ray.at(t));
  }
  return set;
}

namespace {

void check_render_inputs(const RaySet& rays, const VoxelGrid& density, const VoxelGrid& semantic) {
  if (density.channels() != 1) throw ShapeError("density grid must have one channel");
  if (density.spec() != semantic.spec()) throw ShapeError("density and semantic grids must share dims and extent");
  if (rays.points.size() != rays.rays() * rays.samples_per_ray || rays.t.size() != std::size_t(rays.samples_per_ray) ||
      rays.values.size() != rays.t.size()) {
    throw ShapeError("malformed ray set");
  }
}

// Per-ray scratch reused across a lane.
struct RayScratch {
  std::vector<TrilinearStencil> stencils;
  std::vector<double> sigma, logits, weights, trans, d_sigma, d_logits;

  RayScratch(int n, int classes)
      : stencils(n), sigma(n), logits(std::size_t(n) * classes), weights(n), trans(n), d_sigma(n),
        d_logits(std::size_t(n) * classes) {}

  void gather(const RaySet& rays, std::size_t r, const VoxelGrid& density, const VoxelGrid& semantic) {
    const int n = rays.samples_per_ray;
    const int classes = semantic.channels();
    for (int k = 0; k < n; ++k) {
      stencils[k] = trilinear_stencil(density.spec(), rays.points[r * n + k]);
      apply_stencil(density, stencils[k], std::span<double>(&sigma[k], 1));
      if (!(sigma[k] >= 0.0)) throw InputError("density grid must be finite and non-negative");
      apply_stencil(semantic, stencils[k], std::span<double>(logits.data() + std::size_t(k) * classes, classes));
    }
  }
};

}  // namespace

RenderOutput render_rays(const RaySet& rays, const VoxelGrid& density, const VoxelGrid& semantic, int threads) {
  check_render_inputs(rays, density, semantic);
  const int n = rays.samples_per_ray;
  const int classes = semantic.channels();
  const auto delta = interval_lengths(rays.t, rays.last_delta);
  RenderOutput out;
  out.width = rays.width;
  out.height = rays.height;
  out.classes = classes;
  out.samples_per_ray = n;
  const std::size_t count = rays.rays();
  out.depth.assign(count, 0.0);
  out.weight_sum.assign(count, 0.0);
  out.semantic.assign(count * classes, 0.0);
  out.weights.assign(count * n, 0.0);
  out.transmittance.assign(count * n, 0.0);
  for_each_lane(threads, [&](std::size_t lane) {
    const LaneRange range = lane_range(count, lane);
    RayScratch scratch(n, classes);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      scratch.gather(rays, r, density, semantic);
      composite_kernel(delta, scratch.sigma, rays.values, scratch.logits, classes, out.weights.data() + r * n,
                       out.transmittance.data() + r * n, out.depth[r], out.weight_sum[r],
                       out.semantic.data() + r * classes);
    }
  });
  return out;
}

void render_rays_adjoint(const RaySet& rays, const VoxelGrid& density, const VoxelGrid& semantic,
                         const RenderUpstream& upstream, GridGradient& d_density, GridGradient& d_semantic,
                         int threads) {
  check_render_inputs(rays, density, semantic);
  if (!d_density.shadows(density) || !d_semantic.shadows(semantic)) throw ShapeError("gradient buffers do not shadow grids");
  const int n = rays.samples_per_ray;
  const int classes = semantic.channels();
  const std::size_t count = rays.rays();
  if (upstream.d_depth.size() != count || upstream.d_semantic.size() != count * classes ||
      (!upstream.d_weight_sum.empty() && upstream.d_weight_sum.size() != count)) {
    throw ShapeError("render upstream sizes do not match the ray set");
  }
  const auto delta = interval_lengths(rays.t, rays.last_delta);

  std::vector<GridGradient> lane_density(kLanes, GridGradient(density));
  std::vector<GridGradient> lane_semantic(kLanes, GridGradient(semantic));
  for_each_lane(threads, [&](std::size_t lane) {
    const LaneRange range = lane_range(count, lane);
    RayScratch scratch(n, classes);
    std::vector<double> sem(classes);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      const double dd = upstream.d_depth[r];
      const double* ds = upstream.d_semantic.data() + r * classes;
      const double dw = upstream.d_weight_sum.empty() ? 0.0 : upstream.d_weight_sum[r];
      bool any = dd != 0.0 || dw != 0.0;
      for (int c = 0; c < classes && !any; ++c) any = ds[c] != 0.0;
      if (!any) continue;
      scratch.gather(rays, r, density, semantic);
      double depth = 0.0, wsum = 0.0;
      composite_kernel(delta, scratch.sigma, rays.values, scratch.logits, classes, scratch.weights.data(),
                       scratch.trans.data(), depth, wsum, sem.data());
      composite_adjoint_kernel(delta, scratch.sigma, rays.values, scratch.logits, classes, scratch.weights.data(),
                               scratch.trans.data(), dd, ds, dw, scratch.d_sigma.data(), scratch.d_logits.data());
      for (int k = 0; k < n; ++k) {
        const auto& st = scratch.stencils[k];
        if (st.count == 0) continue;
        scatter_stencil(lane_density[lane], st, std::span<const double>(&scratch.d_sigma[k], 1));
        scatter_stencil(lane_semantic[lane], st,
                        std::span<const double>(scratch.d_logits.data() + std::size_t(k) * classes, classes));
      }
    }
  });
  for (std::size_t lane = 0; lane < kLanes; ++lane) {
    d_density.merge(lane_density[lane]);
    d_semantic.merge(lane_semantic[lane]);
  }
}

RenderOutput render_camera(const VoxelGrid& density, const VoxelGrid& semantic, const CameraModel& camera,
                           const DepthBins& bins, int stride, int threads) {
  return render_rays(camera_ray_set(camera, bins, stride), density, semantic, threads);
}

RenderOutput render_bev(const VoxelGrid& density, const VoxelGrid& semantic, int nx_px, int ny_px, int nz_samples,
                        int threads) {
  return render_rays(bev_ray_set(density.extent(), nx_px, ny_px, nz_samples), density, semantic, threads);
}

}  // namespace voxreg
