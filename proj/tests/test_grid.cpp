// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/error.hpp"
#include "voxreg/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace voxreg;

namespace {

GridSpec small_spec() {
  GridSpec s;
  s.dims = {4, 3, 5};
  s.extent.min = Vec3(-1.0, 0.0, 2.0);
  s.extent.max = Vec3(1.0, 1.5, 4.5);
  return s;
}

VoxelGrid random_grid(const GridSpec& spec, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VoxelGrid g(spec, channels);
  for (double& v : g.data()) v = u(rng);
  return g;
}

// Trilinear interpolation written from the definition, independent of the
// stencil code.
double oracle_sample(const VoxelGrid& g, int c, const Vec3& p) {
  const Vec3 vs = g.spec().voxel_size();
  const Vec3 q = (p - g.extent().min).cwiseQuotient(vs) - Vec3::Constant(0.5);
  const int x0 = int(std::floor(q.x())), y0 = int(std::floor(q.y())), z0 = int(std::floor(q.z()));
  const double fx = q.x() - x0, fy = q.y() - y0, fz = q.z() - z0;
  const auto& d = g.dims();
  double sum = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int x = x0 + dx, y = y0 + dy, z = z0 + dz;
        if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) continue;
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        sum += w * g.at(c, z, y, x);
      }
  return sum;
}

}  // namespace

TEST(Grid, VoxelSizeAndCenters) {
  const GridSpec s = small_spec();
  EXPECT_NEAR(s.voxel_size().x(), 0.5, 1e-15);
  EXPECT_NEAR(s.voxel_size().y(), 0.5, 1e-15);
  EXPECT_NEAR(s.voxel_size().z(), 0.5, 1e-15);
  const Vec3 c = s.voxel_center(0, 0, 0);
  EXPECT_NEAR((c - Vec3(-0.75, 0.25, 2.25)).norm(), 0.0, 1e-15);
  const Vec3 idx = s.world_to_continuous_index(s.voxel_center(3, 2, 4));
  EXPECT_NEAR((idx - Vec3(3, 2, 4)).norm(), 0.0, 1e-12);
  const Vec3 p(0.3, 1.1, 3.3);
  EXPECT_NEAR((s.continuous_index_to_world(s.world_to_continuous_index(p)) - p).norm(), 0.0, 1e-12);
}

TEST(Grid, LayoutIsChannelMajor) {
  VoxelGrid g(small_spec(), 2);
  EXPECT_EQ(g.data().size(), 2u * 4 * 3 * 5);
  EXPECT_EQ(g.index(1, 0, 0, 0), 60u);
  EXPECT_EQ(g.index(0, 1, 0, 0), 12u);
  EXPECT_EQ(g.index(0, 0, 1, 0), 4u);
  EXPECT_EQ(g.channel(1).data(), g.data().data() + 60);
}

TEST(Grid, RejectsBadSpecs) {
  GridSpec s = small_spec();
  s.dims.ny = 0;
  EXPECT_THROW(s.validate(), InputError);
  s = small_spec();
  s.extent.max.x() = s.extent.min.x();
  EXPECT_THROW(s.validate(), InputError);
  EXPECT_THROW(VoxelGrid(small_spec(), 0), InputError);
}

TEST(Grid, SampleAtVoxelCenterReturnsValue) {
  std::mt19937_64 rng(1);
  const VoxelGrid g = random_grid(small_spec(), 2, rng);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        const auto v = grid_sample(g, g.spec().voxel_center(x, y, z));
        EXPECT_NEAR(v[0], g.at(0, z, y, x), 1e-12);
        EXPECT_NEAR(v[1], g.at(1, z, y, x), 1e-12);
      }
}

TEST(Grid, MatchesTrilinearOracle) {
  std::mt19937_64 rng(2);
  const VoxelGrid g = random_grid(small_spec(), 3, rng);
  std::uniform_real_distribution<double> ux(-1.3, 1.3), uy(-0.3, 1.8), uz(1.7, 4.8);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    const auto v = grid_sample(g, p);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(v[c], oracle_sample(g, c, p), 1e-12);
  }
}

TEST(Grid, ZeroOutsideAndConstantInside) {
  VoxelGrid g(small_spec(), 1, 2.5);
  EXPECT_EQ(grid_sample(g, Vec3(5.0, 0.5, 3.0))[0], 0.0);
  EXPECT_EQ(grid_sample(g, Vec3(0.0, 0.5, -10.0))[0], 0.0);
  EXPECT_NEAR(grid_sample(g, Vec3(0.1, 0.6, 3.1))[0], 2.5, 1e-12);
  // Half a voxel past the outer center the padded zero contributes half.
  EXPECT_NEAR(grid_sample(g, Vec3(1.0, 0.75, 3.25))[0], 1.25, 1e-12);
}

TEST(Grid, NonFinitePointThrows) {
  VoxelGrid g(small_spec(), 1);
  EXPECT_THROW(grid_sample(g, Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 3)), InputError);
  EXPECT_THROW(grid_sample(g, Vec3(0, std::numeric_limits<double>::infinity(), 3)), InputError);
}

TEST(Grid, AdjointMatchesFiniteDifference) {
  std::mt19937_64 rng(3);
  VoxelGrid g = random_grid(small_spec(), 2, rng);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(0.0, 1.5), uz(2.0, 4.5), uu(-2.0, 2.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    const std::vector<double> up{uu(rng), uu(rng)};
    GridGradient grad(g);
    grid_sample_adjoint(g, p, up, grad);
    auto f = [&] {
      const auto v = grid_sample(g, p);
      return up[0] * v[0] + up[1] * v[1];
    };
    for (std::size_t i = 0; i < g.data().size(); ++i) {
      double& x = g.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = f();
      x = x0 - h;
      const double fm = f();
      x = x0;
      EXPECT_NEAR(grad.data()[i], (fp - fm) / (2 * h), 1e-6);
    }
  }
}

TEST(Grid, PointGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(4);
  const VoxelGrid g = random_grid(small_spec(), 2, rng);
  std::uniform_real_distribution<double> ux(-0.7, 0.7), uy(0.3, 1.2), uz(2.3, 4.2);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    const auto grad = sample_point_gradient(g, p);
    for (int a = 0; a < 3; ++a) {
      Vec3 pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const auto vp = grid_sample(g, pp), vm = grid_sample(g, pm);
      for (int c = 0; c < 2; ++c) {
        const double num = (vp[c] - vm[c]) / (2 * h);
        const double ana = grad[c * 3 + a];
        EXPECT_LT(std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8}), 1e-4);
      }
    }
  }
}

TEST(Grid, GradientMergeRequiresSameShape) {
  VoxelGrid a(small_spec(), 1), b(small_spec(), 2);
  GridGradient ga(a), gb(b);
  EXPECT_THROW(ga.merge(gb), ShapeError);
  GridGradient gc(a);
  gc.data()[3] = 2.0;
  ga.data()[3] = 1.0;
  ga.merge(gc);
  EXPECT_EQ(ga.data()[3], 3.0);
}
