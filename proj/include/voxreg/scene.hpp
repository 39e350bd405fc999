// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/camera.hpp"
#include "voxreg/grid.hpp"
#include "voxreg/heads.hpp"
#include "voxreg/losses.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace voxreg {

/// Analytic solid with an inside-positive signed distance.
struct Primitive {
  enum class Kind { Sphere, Box, Plane };

  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();  // sphere center
  double radius = 1.0;
  Vec3 min = Vec3::Zero();  // box bounds
  Vec3 max = Vec3::Ones();
  double z0 = 0.0;  // plane height; the half-space z <= z0 is solid
  int label = 1;

  static Primitive sphere(const Vec3& center, double radius, int label);
  static Primitive box(const Vec3& min, const Vec3& max, int label);
  static Primitive ground_plane(double z0, int label);

  double signed_distance(const Vec3& p) const;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  int classes = 2;
  int free_class = 0;
  /// Signed distance reported by an empty scene, negated; also the
  /// longest distance a trace will march.
  double far_cap = 100.0;

  void validate() const;
};

struct SdfSample {
  double distance = 0.0;
  int label = 0;
};

/// Union of solids: max over primitives of the inside-positive distance.
/// The label is that primitive's, or the free class when strictly outside
/// all (surface points count as solid).
SdfSample scene_sdf(const SceneSpec& scene, const Vec3& p);

struct TraceHit {
  bool hit = false;
  double t = 0.0;  // ray parameter (arc length for unit directions)
  Vec3 point = Vec3::Zero();
  int label = 0;  // class of the surface that was hit
};

struct TraceOptions {
  double tolerance = 1e-6;
  int max_steps = 256;
};

/// Sphere tracing on the outside-positive distance from t_near up to t_far.
TraceHit trace_depth(const SceneSpec& scene, const Ray& ray, double t_near, double t_far,
                     const TraceOptions& options = {});

/// Camera-frame depth of the first surface seen through pixel (u, v).
std::optional<double> trace_camera_depth(const SceneSpec& scene, const CameraModel& camera, double u, double v,
                                         double far, int* label = nullptr);

struct BakedScene {
  VoxelGrid sdf;       // C = 1
  VoxelGrid semantic;  // C = classes, +margin on the true class, -margin elsewhere
};

BakedScene bake_sdf(const SceneSpec& scene, const GridSpec& spec, double margin = 10.0);

/// Labels by the sign of the scene SDF at the target voxel centers.
OccupancyGrid occupancy_labels(const SceneSpec& scene, const GridSpec& target);

struct SupervisionSpec {
  GridSpec grid;  // modeled volume; also the BEV footprint
  DepthBins bins;
  int stride = 4;
  int bev_nx = 0;  // 0 = one BEV pixel per voxel column
  int bev_ny = 0;
  double lidar_rate = 1.0;
  std::uint64_t seed = 0;
};

struct GroundTruthBundle {
  std::vector<ViewSupervision> cameras;
  ViewSupervision bev;
  OccupancyGrid occupancy;
  PointQuerySet lidar;
};

/// Camera maps at the render stride: a pixel is supervised when its trace
/// hits inside the modeled volume at a camera depth within the bins and it
/// survives the seeded LiDAR-style subsampling. BEV maps record the first
/// (hence highest) surface of each top-down ray.
GroundTruthBundle make_supervision(const SceneSpec& scene, const std::vector<CameraModel>& cameras,
                                   const SupervisionSpec& spec);

}  // namespace voxreg
