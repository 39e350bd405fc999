// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/camera.hpp"

#include "voxreg/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>

namespace voxreg {

CameraModel::CameraModel(Intrinsics intrinsics, RigidPose pose)
    : intrinsics_(intrinsics), pose_(std::move(pose)) {
  if (!(intrinsics_.fx > 0.0) || !(intrinsics_.fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (intrinsics_.width <= 0 || intrinsics_.height <= 0) throw InputError("camera image size must be positive");
  const Mat3& r = pose_.rotation;
  if (!r.allFinite() || !pose_.translation.allFinite()) throw InputError("camera pose is not finite");
  if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9) {
    throw InputError("camera rotation is not a proper orthonormal matrix");
  }
}

CameraModel CameraModel::look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target,
                                 const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw InputError("look_at: up vector is parallel to the viewing direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidPose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return CameraModel(intrinsics, pose);
}

CameraModel CameraModel::strided(int stride) const {
  if (stride <= 0) throw InputError("stride must be positive");
  Intrinsics k = intrinsics_;
  k.fx /= stride;
  k.fy /= stride;
  k.cx /= stride;
  k.cy /= stride;
  k.width /= stride;
  k.height /= stride;
  if (k.width == 0 || k.height == 0) throw InputError("stride exceeds the image size");
  return CameraModel(k, pose_);
}

Ray CameraModel::pixel_ray(double u, double v) const {
  const Vec3 local((u - intrinsics_.cx) / intrinsics_.fx, (v - intrinsics_.cy) / intrinsics_.fy, 1.0);
  return {center(), (pose_.rotation * local).normalized()};
}

Vec3 CameraModel::back_project(double u, double v, double z) const {
  if (!(z > 0.0)) throw InputError("back_project needs depth z > 0");
  const Vec3 local((u - intrinsics_.cx) / intrinsics_.fx * z, (v - intrinsics_.cy) / intrinsics_.fy * z, z);
  return pose_.rotation * local + pose_.translation;
}

Vec2 CameraModel::project(const Vec3& world, double* depth) const {
  const Vec3 local = pose_.rotation.transpose() * (world - pose_.translation);
  if (depth) *depth = local.z();
  return {intrinsics_.fx * local.x() / local.z() + intrinsics_.cx, intrinsics_.fy * local.y() / local.z() + intrinsics_.cy};
}

double CameraModel::camera_depth(const Vec3& world) const { return optical_axis().dot(world - pose_.translation); }

void DepthBins::validate() const {
  if (!(near > 0.0) || !(far > near)) throw InputError("depth bins need 0 < near < far");
  if (count < 2) throw InputError("depth bins need at least 2 samples");
}

std::vector<double> sample_depths(const DepthBins& bins) {
  bins.validate();
  std::vector<double> z(bins.count);
  const double step = bins.spacing();
  for (int i = 0; i < bins.count; ++i) z[i] = bins.near + (i + 0.5) * step;
  return z;
}

BevRayBatch bev_rays(const Extent3& extent, int nx_px, int ny_px, int nz_samples) {
  extent.validate();
  if (nx_px <= 0 || ny_px <= 0) throw InputError("BEV resolution must be positive");
  if (nz_samples < 2) throw InputError("BEV rays need at least 2 samples");
  BevRayBatch batch;
  batch.nx_px = nx_px;
  batch.ny_px = ny_px;
  const Vec3 size = extent.size();
  const double cell_x = size.x() / nx_px;
  const double cell_y = size.y() / ny_px;
  batch.rays.reserve(std::size_t(nx_px) * ny_px);
  for (int j = 0; j < ny_px; ++j) {
    for (int i = 0; i < nx_px; ++i) {
      const Vec3 origin(extent.min.x() + (i + 0.5) * cell_x, extent.min.y() + (j + 0.5) * cell_y, extent.max.z());
      batch.rays.push_back({origin, -Vec3::UnitZ()});
    }
  }
  const double dz = size.z() / nz_samples;
  batch.t.resize(nz_samples);
  batch.heights.resize(nz_samples);
  for (int k = 0; k < nz_samples; ++k) {
    batch.t[k] = (k + 0.5) * dz;
    batch.heights[k] = extent.max.z() - batch.t[k];
  }
  return batch;
}

}  // namespace voxreg
