// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/reference.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace voxreg::reference {

SceneSpec scene() {
  SceneSpec s;
  s.classes = kClasses;
  s.free_class = kFree;
  s.primitives = {
      Primitive::ground_plane(0.0, kGround),
      Primitive::sphere({4.0, 0.0, 1.0}, 2.0, kSphere),
      Primitive::box({-4.4, -3.2, -0.8}, {-1.2, 0.8, 2.0}, kBox),
  };
  return s;
}

GridSpec grid() { return {{32, 32, 20}, {{-6.4, -6.4, -3.0}, {6.4, 6.4, 5.0}}}; }

Intrinsics intrinsics() { return {48.0, 48.0, 32.0, 24.0, 64, 48}; }

CameraModel ring_camera(double azimuth_deg) {
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  const Vec3 eye(11.0 * std::cos(a), 11.0 * std::sin(a), 8.0);
  return CameraModel::look_at(intrinsics(), eye, Vec3(0.0, 0.0, 0.5));
}

config::CameraRig rig() {
  config::CameraRig r;
  for (int az : {45, 135, 225, 315}) r.cameras.push_back({"ring" + std::to_string(az), ring_camera(az)});
  r.heldout.push_back({"heldout20", ring_camera(20.0)});
  return r;
}

config::RunConfig run_config(const config::fs::path& scene_path, const config::fs::path& rig_path) {
  config::RunConfig rc;
  rc.scene_path = scene_path;
  rc.rig_path = rig_path;
  rc.grid = grid();
  rc.stride = kStride;
  rc.bev_nx = kBevPixels;
  rc.bev_ny = kBevPixels;
  return rc;
}

}  // namespace voxreg::reference
