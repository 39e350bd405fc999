// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/error.hpp"
#include "voxreg/splat.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace voxreg;

namespace {

GridSpec box_spec() {
  GridSpec s;
  s.dims = {8, 7, 6};
  s.extent.min = Vec3(-2, -2, -1.5);
  s.extent.max = Vec3(2, 1.5, 1.5);
  return s;
}

FeatureImage random_image(int w, int h, int c, int bins, std::mt19937_64& rng) {
  FeatureImage img(w, h, c, bins);
  std::uniform_real_distribution<double> u(-1.0, 1.0), up(0.0, 1.0);
  for (double& v : img.features) v = u(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int k = 0; k < bins; ++k) sum += img.prob(k, y, x) = up(rng);
      for (int k = 0; k < bins; ++k) img.prob(k, y, x) /= sum;
    }
  return img;
}

}  // namespace

TEST(Splat, AdjointOfGridSample) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const DepthBins bins{2.0, 6.0, 10};
  const GridSpec spec = box_spec();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int channels = 2;
    std::vector<CameraModel> cams;
    std::vector<FeatureImage> images;
    for (int c = 0; c < 2; ++c) {
      const Vec3 eye(4.0 * std::cos(c + trial), 4.0 * std::sin(c + trial), 0.5 + n(rng));
      cams.push_back(CameraModel::look_at({5, 5, 3, 2.5, 6, 5}, eye, Vec3(n(rng), n(rng), n(rng))));
      images.push_back(random_image(6, 5, channels, bins.count, rng));
    }
    VoxelGrid g(spec, channels);
    for (double& v : g.data()) v = u(rng);
    const VoxelGrid s = splat(images, cams, bins, spec);
    double lhs = 0.0;
    for (std::size_t i = 0; i < g.data().size(); ++i) lhs += s.data()[i] * g.data()[i];
    double rhs = 0.0;
    const auto z = sample_depths(bins);
    for (std::size_t c = 0; c < cams.size(); ++c)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
          for (int k = 0; k < bins.count; ++k) {
            const auto v = grid_sample(g, cams[c].back_project(x + 0.5, y + 0.5, z[k]));
            for (int ch = 0; ch < channels; ++ch) rhs += images[c].prob(k, y, x) * images[c].feature(ch, y, x) * v[ch];
          }
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Splat, ConservesMassWithInteriorSupport) {
  // Big grid so every lifted point keeps all eight corners.
  GridSpec spec;
  spec.dims = {20, 20, 20};
  spec.extent.min = Vec3::Constant(-20.0);
  spec.extent.max = Vec3::Constant(20.0);
  std::mt19937_64 rng(22);
  const DepthBins bins{2.0, 8.0, 6};
  const auto cam = CameraModel::look_at({4, 4, 2, 2, 4, 4}, Vec3(1, 2, 0), Vec3(5, 3, 1));
  const FeatureImage img = random_image(4, 4, 3, bins.count, rng);
  const VoxelGrid s = splat({img}, {cam}, bins, spec);
  for (int c = 0; c < 3; ++c) {
    double expected = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int k = 0; k < bins.count; ++k) expected += img.feature(c, y, x) * img.prob(k, y, x);
    double got = 0.0;
    for (double v : s.channel(c)) got += v;
    EXPECT_NEAR(got, expected, 1e-9);
  }
}

TEST(Splat, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(23);
  const DepthBins bins{1.0, 5.0, 12};
  const auto cam = CameraModel::look_at({6, 6, 4, 4, 8, 8}, Vec3(3.5, 0.3, 0.2), Vec3::Zero());
  const FeatureImage img = random_image(8, 8, 2, bins.count, rng);
  const VoxelGrid a = splat({img}, {cam}, bins, box_spec(), 1);
  const VoxelGrid b = splat({img}, {cam}, bins, box_spec(), 8);
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-9);
}

TEST(Splat, RejectsBadDistribution) {
  FeatureImage img(2, 2, 1, 3);
  EXPECT_THROW(img.validate(), InputError);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) img.prob(0, y, x) = 1.0;
  EXPECT_NO_THROW(img.validate());
  img.prob(1, 0, 0) = -0.5;
  img.prob(2, 0, 0) = 0.5;
  EXPECT_THROW(img.validate(), InputError);
}

TEST(Splat, CoordVolumeSpansUnitCube) {
  GridSpec spec;
  spec.dims = {2, 3, 4};
  spec.extent.min = Vec3(0, 0, 0);
  spec.extent.max = Vec3(2, 3, 4);
  const VoxelGrid c = coord_volume(spec);
  ASSERT_EQ(c.channels(), 3);
  EXPECT_NEAR(c.at(0, 0, 0, 0), -0.5, 1e-15);
  EXPECT_NEAR(c.at(0, 0, 0, 1), 0.5, 1e-15);
  EXPECT_NEAR(c.at(2, 3, 0, 0), 0.75, 1e-15);
  const VoxelGrid both = concat_channels(c, VoxelGrid(spec, 2, 7.0));
  EXPECT_EQ(both.channels(), 5);
  EXPECT_EQ(both.at(4, 1, 1, 1), 7.0);
  EXPECT_EQ(both.at(1, 1, 2, 1), c.at(1, 1, 2, 1));
}

TEST(Densify, FillsFromNeighborsAndKeepsSeeds) {
  GridSpec spec;
  spec.dims = {5, 1, 1};
  spec.extent.min = Vec3::Zero();
  spec.extent.max = Vec3(5, 1, 1);
  VoxelGrid g(spec, 1);
  g.at(0, 0, 0, 0) = 2.0;
  g.at(0, 0, 0, 4) = 6.0;
  const VoxelGrid one = densify_baseline(g, 1);
  EXPECT_EQ(one.at(0, 0, 0, 0), 2.0);
  EXPECT_EQ(one.at(0, 0, 0, 1), 2.0);
  EXPECT_EQ(one.at(0, 0, 0, 2), 0.0);
  EXPECT_EQ(one.at(0, 0, 0, 3), 6.0);
  const VoxelGrid two = densify_baseline(g, 2);
  EXPECT_EQ(two.at(0, 0, 0, 2), 4.0);
  EXPECT_EQ(two.at(0, 0, 0, 4), 6.0);
}

TEST(Densify, DensifierContractChecked) {
  GridSpec spec;
  spec.dims = {2, 2, 2};
  spec.extent.min = Vec3::Zero();
  spec.extent.max = Vec3::Ones();
  const VoxelGrid g(spec, 2, 1.0);
  EXPECT_NO_THROW(apply_densifier([](const VoxelGrid& v) { return v; }, g));
  EXPECT_THROW(apply_densifier([&](const VoxelGrid&) { return VoxelGrid(spec, 3); }, g), ShapeError);
  EXPECT_THROW(apply_densifier([&](const VoxelGrid&) { return VoxelGrid(spec, 2, std::nan("")); }, g), NumericError);
}
