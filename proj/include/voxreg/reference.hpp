// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/config.hpp"

namespace voxreg::reference {

// Desk-scale test scene: ground plane, a sphere and a box, seen by four
// cameras on a ring plus one held-out camera.
inline constexpr int kClasses = 4;
inline constexpr int kFree = 0;
inline constexpr int kGround = 1;
inline constexpr int kSphere = 2;
inline constexpr int kBox = 3;

SceneSpec scene();

/// 32 x 32 x 20 voxels of 0.4 m over [-6.4, 6.4]^2 x [-3, 5].
GridSpec grid();

/// 64 x 48 px cameras at radius 11 m, 8 m up, looking at (0, 0, 0.5).
Intrinsics intrinsics();
CameraModel ring_camera(double azimuth_deg);
config::CameraRig rig();

inline constexpr int kStride = 2;
inline constexpr int kBevPixels = 32;

config::RunConfig run_config(const config::fs::path& scene_path, const config::fs::path& rig_path);

}  // namespace voxreg::reference
