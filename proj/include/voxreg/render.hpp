// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/camera.hpp"
#include "voxreg/grid.hpp"

#include <optional>
#include <span>
#include <vector>

namespace voxreg {

/// Samples along one ray. `values` is the scalar being rendered (depth or
/// height); when empty the sample parameters `t` are rendered.
struct RaySamples {
  std::span<const double> t;
  std::span<const double> sigma;
  std::span<const double> logits;  // n x classes, row-major
  std::span<const double> values;
  int classes = 0;
  /// Length of the last interval. Defaults to the mean of the preceding
  /// spacings; required when there is a single sample.
  std::optional<double> last_delta;
};

struct PixelRender {
  double depth = 0.0;
  double weight_sum = 0.0;
  std::vector<double> semantic;
  std::vector<double> weights;
  std::vector<double> transmittance;
};

/// Piecewise-constant quadrature of the rendering integrals:
///   a_i = 1 - exp(-sigma_i delta_i),  T_i = prod_{j<i} (1 - a_j),  w_i = T_i a_i,
///   D = sum w_i v_i,  S = sum w_i s_i.
/// No normalization by sum(w) and no background term.
PixelRender composite(const RaySamples& samples);

struct CompositeUpstream {
  double d_depth = 0.0;
  std::span<const double> d_semantic;  // classes entries, or empty
  double d_weight_sum = 0.0;
};

struct SampleGradients {
  std::vector<double> d_sigma;
  std::vector<double> d_logits;  // n x classes
};

SampleGradients composite_adjoint(const RaySamples& samples, const CompositeUpstream& upstream);

/// Interval lengths delta_i used by composite.
std::vector<double> interval_lengths(std::span<const double> t, std::optional<double> last_delta);

/// A batch of rays over a width x height image that all share the same
/// sample parameters t and rendered values.
struct RaySet {
  int width = 0;
  int height = 0;
  int samples_per_ray = 0;
  std::vector<double> t;
  std::vector<double> values;
  std::vector<Vec3> points;  // ray-major, rays() * samples_per_ray
  std::optional<double> last_delta;

  std::size_t rays() const { return std::size_t(width) * height; }
};

/// Camera rays at a pixel stride; strided pixel (i, j) is cast through
/// ((i + 0.5) * stride, (j + 0.5) * stride). Samples are placed at camera
/// depths z_i and the rendered value is z_i.
RaySet camera_ray_set(const CameraModel& camera, const DepthBins& bins, int stride);

/// Top-down rays; the rendered value is the sample height.
RaySet bev_ray_set(const Extent3& extent, int nx_px, int ny_px, int nz_samples);

/// Rendered maps for one view. Per-pixel arrays are row-major; `semantic`
/// is pixels x classes; `weights` and `transmittance` are pixels x samples.
struct RenderOutput {
  int width = 0;
  int height = 0;
  int classes = 0;
  int samples_per_ray = 0;
  std::vector<double> depth;
  std::vector<double> semantic;
  std::vector<double> weight_sum;
  std::vector<double> weights;
  std::vector<double> transmittance;

  std::size_t pixels() const { return std::size_t(width) * height; }
};

/// Per-pixel upstream gradients for render_rays_adjoint. `d_weight_sum`
/// may be empty.
struct RenderUpstream {
  std::span<const double> d_depth;
  std::span<const double> d_semantic;
  std::span<const double> d_weight_sum;
};

RenderOutput render_rays(const RaySet& rays, const VoxelGrid& density, const VoxelGrid& semantic, int threads = 1);

/// Accumulates dL/d(density voxel) and dL/d(semantic voxel). Deterministic
/// for any thread count.
void render_rays_adjoint(const RaySet& rays, const VoxelGrid& density, const VoxelGrid& semantic,
                         const RenderUpstream& upstream, GridGradient& d_density, GridGradient& d_semantic,
                         int threads = 1);

RenderOutput render_camera(const VoxelGrid& density, const VoxelGrid& semantic, const CameraModel& camera,
                           const DepthBins& bins, int stride, int threads = 1);

/// BEV render over the grids' own x-y footprint and z range.
RenderOutput render_bev(const VoxelGrid& density, const VoxelGrid& semantic, int nx_px, int ny_px, int nz_samples,
                        int threads = 1);

}  // namespace voxreg
