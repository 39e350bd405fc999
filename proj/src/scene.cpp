// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/scene.hpp"

#include "voxreg/error.hpp"

#include <cmath>
#include <random>

namespace voxreg {

namespace {

// Inside-positive distance and index of the primitive attaining the max.
std::pair<double, int> closest_primitive(const SceneSpec& scene, const Vec3& p) {
  double best = -scene.far_cap;
  int index = -1;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const double d = scene.primitives[i].signed_distance(p);
    if (index < 0 || d > best) {
      best = d;
      index = int(i);
    }
  }
  return {best, index};
}

// Uniform double in [0, 1) from the standard-specified mt19937_64 stream.
double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Primitive Primitive::sphere(const Vec3& center, double radius, int label) {
  Primitive p;
  p.kind = Kind::Sphere;
  p.center = center;
  p.radius = radius;
  p.label = label;
  return p;
}

Primitive Primitive::box(const Vec3& min, const Vec3& max, int label) {
  Primitive p;
  p.kind = Kind::Box;
  p.min = min;
  p.max = max;
  p.label = label;
  return p;
}

Primitive Primitive::ground_plane(double z0, int label) {
  Primitive p;
  p.kind = Kind::Plane;
  p.z0 = z0;
  p.label = label;
  return p;
}

double Primitive::signed_distance(const Vec3& p) const {
  switch (kind) {
    case Kind::Sphere:
      return radius - (p - center).norm();
    case Kind::Box: {
      const Vec3 half = 0.5 * (max - min);
      const Vec3 q = (p - 0.5 * (min + max)).cwiseAbs() - half;
      const double outside = q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
      return -outside;
    }
    case Kind::Plane:
      return z0 - p.z();
  }
  return 0.0;
}

void SceneSpec::validate() const {
  if (classes <= 0 || free_class < 0 || free_class >= classes) throw InputError("scene class settings are invalid");
  if (!(far_cap > 0.0)) throw InputError("scene far cap must be positive");
  for (const auto& p : primitives) {
    if (p.label < 0 || p.label >= classes) throw InputError("primitive label out of range");
    if (p.kind == Primitive::Kind::Sphere && !(p.radius > 0.0)) throw InputError("sphere radius must be positive");
    if (p.kind == Primitive::Kind::Box && !((p.max.array() > p.min.array()).all())) {
      throw InputError("box min must be below max on every axis");
    }
  }
}

SdfSample scene_sdf(const SceneSpec& scene, const Vec3& p) {
  const auto [distance, index] = closest_primitive(scene, p);
  if (index < 0 || distance < 0.0) return {distance, scene.free_class};
  return {distance, scene.primitives[index].label};
}

TraceHit trace_depth(const SceneSpec& scene, const Ray& ray, double t_near, double t_far, const TraceOptions& options) {
  TraceHit out;
  if (scene.primitives.empty()) return out;
  double t = t_near;
  for (int step = 0; step < options.max_steps && t <= t_far; ++step) {
    const Vec3 p = ray.at(t);
    const auto [inside, index] = closest_primitive(scene, p);
    const double distance = -inside;
    if (distance < options.tolerance) {
      out.hit = true;
      out.t = t;
      out.point = p;
      out.label = scene.primitives[index].label;
      return out;
    }
    t += distance;
  }
  return out;
}

std::optional<double> trace_camera_depth(const SceneSpec& scene, const CameraModel& camera, double u, double v,
                                         double far, int* label) {
  const Ray ray = camera.pixel_ray(u, v);
  // Camera depth never exceeds arc length, so marching to the depth cap
  // along the ray reaches every surface within it.
  const double t_far = far / std::max(ray.direction.dot(camera.optical_axis()), 1e-12);
  const TraceHit hit = trace_depth(scene, ray, 0.0, std::min(t_far, scene.far_cap));
  if (!hit.hit) return std::nullopt;
  if (label) *label = hit.label;
  return camera.camera_depth(hit.point);
}

BakedScene bake_sdf(const SceneSpec& scene, const GridSpec& spec, double margin) {
  scene.validate();
  BakedScene baked{VoxelGrid(spec, 1), VoxelGrid(spec, scene.classes, -margin)};
  const auto& d = spec.dims;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const SdfSample s = scene_sdf(scene, spec.voxel_center(x, y, z));
        baked.sdf.at(0, z, y, x) = s.distance;
        baked.semantic.at(s.label, z, y, x) = margin;
      }
    }
  }
  return baked;
}

OccupancyGrid occupancy_labels(const SceneSpec& scene, const GridSpec& target) {
  scene.validate();
  OccupancyGrid occ(target, scene.classes, scene.free_class);
  const auto& d = target.dims;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) occ.at(z, y, x) = scene_sdf(scene, target.voxel_center(x, y, z)).label;
    }
  }
  return occ;
}

GroundTruthBundle make_supervision(const SceneSpec& scene, const std::vector<CameraModel>& cameras,
                                   const SupervisionSpec& spec) {
  scene.validate();
  spec.grid.validate();
  spec.bins.validate();
  if (spec.stride <= 0) throw InputError("supervision stride must be positive");
  if (!(spec.lidar_rate >= 0.0 && spec.lidar_rate <= 1.0)) throw InputError("lidar rate must lie in [0, 1]");

  GroundTruthBundle bundle;
  std::mt19937_64 rng(spec.seed);
  const Extent3& extent = spec.grid.extent;
  for (const auto& camera : cameras) {
    ViewSupervision view(camera.width() / spec.stride, camera.height() / spec.stride);
    if (view.width == 0 || view.height == 0) throw InputError("supervision stride exceeds the image size");
    for (int j = 0; j < view.height; ++j) {
      for (int i = 0; i < view.width; ++i) {
        // Draw for every pixel so the mask pattern does not depend on hits.
        const bool keep = unit_uniform(rng) < spec.lidar_rate;
        int label = 0;
        const auto z = trace_camera_depth(scene, camera, (i + 0.5) * spec.stride, (j + 0.5) * spec.stride,
                                          spec.bins.far, &label);
        if (!keep || !z || *z < spec.bins.near || *z > spec.bins.far) continue;
        const Vec3 point = camera.back_project((i + 0.5) * spec.stride, (j + 0.5) * spec.stride, *z);
        if (!extent.contains(point)) continue;
        const std::size_t k = std::size_t(j) * view.width + i;
        view.depth[k] = *z;
        view.labels[k] = label;
        bundle.lidar.points.push_back(point);
        bundle.lidar.labels.push_back(label);
      }
    }
    bundle.cameras.push_back(std::move(view));
  }

  const int bev_nx = spec.bev_nx > 0 ? spec.bev_nx : spec.grid.dims.nx;
  const int bev_ny = spec.bev_ny > 0 ? spec.bev_ny : spec.grid.dims.ny;
  const BevRayBatch bev = bev_rays(extent, bev_nx, bev_ny, 2);
  bundle.bev = ViewSupervision(bev_nx, bev_ny);
  const double column = extent.size().z();
  for (std::size_t k = 0; k < bev.rays.size(); ++k) {
    const TraceHit hit = trace_depth(scene, bev.rays[k], 0.0, column);
    if (!hit.hit) continue;
    bundle.bev.depth[k] = hit.point.z();
    bundle.bev.labels[k] = hit.label;
  }

  bundle.occupancy = occupancy_labels(scene, spec.grid);
  return bundle;
}

}  // namespace voxreg
