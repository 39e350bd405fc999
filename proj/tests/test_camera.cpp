// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/camera.hpp"
#include "voxreg/error.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <random>

using namespace voxreg;

namespace {

const Intrinsics kIntr{50.0, 40.0, 32.0, 24.0, 64, 48};

RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return {q.toRotationMatrix(), Vec3(n(rng), n(rng), n(rng)) * 5.0};
}

}  // namespace

TEST(Camera, PrincipalRayIsOpticalAxis) {
  const CameraModel cam(kIntr, RigidPose{});
  const Ray r = cam.pixel_ray(32.0, 24.0);
  EXPECT_NEAR((r.direction - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(r.origin.norm(), 0.0, 1e-15);
  const Ray r2 = cam.pixel_ray(82.0, 24.0);
  EXPECT_NEAR((r2.direction - Vec3(1, 0, 1).normalized()).norm(), 0.0, 1e-15);
}

TEST(Camera, BackProjectPrincipalPoint) {
  const CameraModel cam(kIntr, RigidPose{});
  EXPECT_NEAR((cam.back_project(32.0, 24.0, 7.5) - Vec3(0, 0, 7.5)).norm(), 0.0, 1e-15);
  const RigidPose shifted{Mat3::Identity(), Vec3(1.0, -2.0, 3.0)};
  const CameraModel moved(kIntr, shifted);
  EXPECT_NEAR((moved.back_project(10.0, 5.0, 2.0) - cam.back_project(10.0, 5.0, 2.0) - shifted.translation).norm(),
              0.0, 1e-14);
}

TEST(Camera, ReprojectionRoundTrip) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uu(0.0, 64.0), uv(0.0, 48.0), uz(0.5, 80.0);
  for (int i = 0; i < 1000; ++i) {
    const CameraModel cam(kIntr, random_pose(rng));
    const double u = uu(rng), v = uv(rng), z = uz(rng);
    double depth = 0.0;
    const Vec2 px = cam.project(cam.back_project(u, v, z), &depth);
    EXPECT_NEAR(px.x(), u, 1e-6);
    EXPECT_NEAR(px.y(), v, 1e-6);
    EXPECT_NEAR(depth, z, 1e-6);
  }
}

TEST(Camera, RayPassesThroughBackProjection) {
  std::mt19937_64 rng(9);
  const CameraModel cam(kIntr, random_pose(rng));
  const Ray r = cam.pixel_ray(12.25, 40.5);
  const Vec3 p = cam.back_project(12.25, 40.5, 3.0);
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-15);
  EXPECT_NEAR((r.at((p - r.origin).norm()) - p).norm(), 0.0, 1e-12);
}

TEST(Camera, LookAtPointsAtTarget) {
  const auto cam = CameraModel::look_at(kIntr, Vec3(10, 0, 4), Vec3(0, 0, 0.5));
  const Vec2 px = cam.project(Vec3(0, 0, 0.5));
  EXPECT_NEAR(px.x(), kIntr.cx, 1e-9);
  EXPECT_NEAR(px.y(), kIntr.cy, 1e-9);
  // World up projects toward smaller v.
  EXPECT_LT(cam.project(Vec3(0, 0, 3)).y(), kIntr.cy);
  EXPECT_NEAR((cam.pose().rotation.transpose() * cam.pose().rotation - Mat3::Identity()).norm(), 0.0, 1e-12);
}

TEST(Camera, StridedCameraCoversSameRays) {
  std::mt19937_64 rng(10);
  const CameraModel cam(kIntr, random_pose(rng));
  const CameraModel s = cam.strided(4);
  EXPECT_EQ(s.width(), 16);
  EXPECT_EQ(s.height(), 12);
  const Ray a = s.pixel_ray(2.5, 1.5);
  const Ray b = cam.pixel_ray(10.0, 6.0);
  EXPECT_NEAR((a.direction - b.direction).norm(), 0.0, 1e-12);
}

TEST(Camera, RejectsBadIntrinsics) {
  Intrinsics bad = kIntr;
  bad.fx = 0.0;
  EXPECT_THROW(CameraModel(bad, RigidPose{}), InputError);
  bad = kIntr;
  bad.width = 0;
  EXPECT_THROW(CameraModel(bad, RigidPose{}), InputError);
}

TEST(Camera, DefaultDepthBins) {
  const DepthBins bins;
  const auto z = sample_depths(bins);
  ASSERT_EQ(z.size(), 86u);
  EXPECT_NEAR(bins.spacing(), 68.4 / 86.0, 1e-15);
  EXPECT_NEAR(z.front(), 2.0 + 0.5 * bins.spacing(), 1e-12);
  EXPECT_NEAR(z.back(), 70.4 - 0.5 * bins.spacing(), 1e-12);
  DepthBins bad;
  bad.far = 1.0;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Camera, BevRaysAtCellCenters) {
  Extent3 e;
  e.min = Vec3(-2, -1, -1);
  e.max = Vec3(2, 1, 3);
  const auto b = bev_rays(e, 4, 2, 8);
  ASSERT_EQ(b.rays.size(), 8u);
  EXPECT_NEAR((b.rays[0].origin - Vec3(-1.5, -0.5, 3)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((b.rays[5].origin - Vec3(-0.5, 0.5, 3)).norm(), 0.0, 1e-15);
  EXPECT_EQ(b.rays[0].direction, Vec3(0, 0, -1));
  ASSERT_EQ(b.t.size(), 8u);
  EXPECT_NEAR(b.t[0], 0.25, 1e-15);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(b.heights[k], 3.0 - b.t[k], 1e-15);
}
