// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/grid.hpp"

#include <Eigen/Core>

#include <vector>

namespace voxreg {

using Vec2 = Eigen::Vector2d;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
};

/// Camera-to-world rigid transform.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Pinhole camera, optical axis +z in the camera frame, x right, y down.
class CameraModel {
 public:
  CameraModel(Intrinsics intrinsics, RigidPose pose);

  /// Camera at `eye` whose optical axis points at `target`; image "up" is
  /// the projection of `up`.
  static CameraModel look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target,
                             const Vec3& up = Vec3::UnitZ());

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const RigidPose& pose() const { return pose_; }
  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }
  Vec3 center() const { return pose_.translation; }
  Vec3 optical_axis() const { return pose_.rotation.col(2); }

  /// The same camera at 1/stride resolution: strided pixel i covers full
  /// pixels [i * stride, (i + 1) * stride).
  CameraModel strided(int stride) const;

  Ray pixel_ray(double u, double v) const;
  /// World point of pixel (u, v) at camera-frame depth z > 0.
  Vec3 back_project(double u, double v, double z) const;
  /// Pixel coordinates of a world point; `depth` receives its camera-frame z.
  Vec2 project(const Vec3& world, double* depth = nullptr) const;
  double camera_depth(const Vec3& world) const;

 private:
  Intrinsics intrinsics_;
  RigidPose pose_;
};

/// n bins uniform in depth over [near, far]; samples sit at bin centers.
struct DepthBins {
  double near = 2.0;
  double far = 70.4;
  int count = 86;

  void validate() const;
  double spacing() const { return (far - near) / count; }
};

std::vector<double> sample_depths(const DepthBins& bins);

/// Orthographic top-down rays, one per BEV cell, row-major over (y, x).
struct BevRayBatch {
  int nx_px = 0;
  int ny_px = 0;
  std::vector<Ray> rays;
  std::vector<double> t;        // shared sample parameters along -z
  std::vector<double> heights;  // extent.max.z - t
};

BevRayBatch bev_rays(const Extent3& extent, int nx_px, int ny_px, int nz_samples);

}  // namespace voxreg
