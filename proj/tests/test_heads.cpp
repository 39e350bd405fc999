// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/density.hpp"
#include "voxreg/error.hpp"
#include "voxreg/heads.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace voxreg;

namespace {

GridSpec cube(int n) {
  GridSpec s;
  s.dims = {n, n, n};
  s.extent.min = Vec3::Zero();
  s.extent.max = Vec3::Constant(double(n));
  return s;
}

}  // namespace

TEST(Heads, ArgmaxTiesGoLow) {
  const std::vector<double> a{1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(argmax_class(a), 1);
  const std::vector<double> b{0.0, 0.0};
  EXPECT_EQ(argmax_class(b), 0);
}

TEST(Heads, PredictOccupancyOnSameLattice) {
  VoxelGrid sem(cube(3), 3);
  sem.at(2, 1, 1, 1) = 5.0;
  sem.at(1, 0, 2, 0) = 1.0;
  const auto occ = predict_occupancy(sem, cube(3));
  EXPECT_EQ(occ.at(1, 1, 1), 2);
  EXPECT_EQ(occ.at(0, 2, 0), 1);
  EXPECT_EQ(occ.at(2, 2, 2), 0);
}

TEST(Heads, SegmentPointsOutsideGetFreeClass) {
  VoxelGrid sem(cube(2), 2);
  for (double& v : sem.channel(1)) v = 1.0;
  PointQuerySet q;
  q.points = {Vec3(1, 1, 1), Vec3(-5, 1, 1)};
  const auto labels = segment_points(sem, q, 0);
  EXPECT_EQ(labels[0], 1);
  EXPECT_EQ(labels[1], 0);
}

TEST(Heads, BevFeaturesLinearAndOdd) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ud(0.0, 3.0);
  GridSpec s = cube(3);
  s.dims.nz = 2;
  VoxelGrid a(s, 2), b(s, 2), dens(s, 1);
  for (double& v : a.data()) v = u(rng);
  for (double& v : b.data()) v = u(rng);
  for (double& v : dens.data()) v = ud(rng);
  Eigen::MatrixXd proj = Eigen::MatrixXd::Random(4, 3);
  VoxelGrid sum(s, 2), neg(s, 2);
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    sum.data()[i] = 2.0 * a.data()[i] + b.data()[i];
    neg.data()[i] = -a.data()[i];
  }
  const auto fa = bev_features(a, dens, proj), fb = bev_features(b, dens, proj);
  const auto fs = bev_features(sum, dens, proj), fn = bev_features(neg, dens, proj);
  ASSERT_EQ(fa.channels, 3);
  for (std::size_t i = 0; i < fa.data.size(); ++i) {
    EXPECT_NEAR(fs.data[i], 2.0 * fa.data[i] + fb.data[i], 1e-12);
    EXPECT_NEAR(fn.data[i], -fa.data[i], 1e-12);
  }
  // One column by hand.
  double expected = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int z = 0; z < 2; ++z) expected += proj(c * 2 + z, 1) * a.at(c, z, 2, 1) * std::tanh(dens.at(0, z, 2, 1));
  EXPECT_NEAR(fa.at(1, 2, 1), expected, 1e-12);
  EXPECT_THROW(bev_features(a, dens, Eigen::MatrixXd::Random(3, 3)), ShapeError);
}

TEST(Heads, MiouHandExample) {
  GridSpec s;
  s.dims = {6, 1, 1};
  s.extent.min = Vec3::Zero();
  s.extent.max = Vec3(6, 1, 1);
  OccupancyGrid pred(s, 3), gt(s, 3);
  pred.labels = {0, 0, 1, 1, 2, 0};
  gt.labels = {0, 1, 1, 1, 0, 0};
  const auto r = miou(pred, gt);
  // class 0: I=2, U=4; class 1: I=2, U=3; class 2: I=0, U=1.
  ASSERT_TRUE(r.per_class[0].iou && r.per_class[1].iou && r.per_class[2].iou);
  EXPECT_NEAR(*r.per_class[0].iou, 0.5, 1e-15);
  EXPECT_NEAR(*r.per_class[1].iou, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*r.per_class[2].iou, 0.0, 1e-15);
  EXPECT_NEAR(r.miou, (0.5 + 2.0 / 3.0) / 3.0, 1e-15);
  EXPECT_EQ(r.evaluated_voxels, 6u);

  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 0, 1};
  const auto m = miou(pred, gt, mask);
  EXPECT_FALSE(m.per_class[2].iou);
  EXPECT_EQ(m.counted_classes, 2);
  EXPECT_NEAR(m.miou, (2.0 / 3.0 + 2.0 / 3.0) / 2.0, 1e-15);
}

TEST(Heads, MiouShapeMismatchThrows) {
  OccupancyGrid a(cube(2), 2), b(cube(3), 2);
  EXPECT_THROW(miou(a, b), ShapeError);
}
