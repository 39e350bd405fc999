// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace voxreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned world box in meters.
struct Extent3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  /// Throws InputError unless max > min on every axis.
  void validate() const;
  Vec3 size() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p) const;
  bool operator==(const Extent3&) const = default;
};

struct GridDims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t voxels() const { return std::size_t(nx) * std::size_t(ny) * std::size_t(nz); }
  bool operator==(const GridDims&) const = default;
};

/// Voxel lattice over an extent. Voxel (i, j, k) has its center at
/// min + (index + 0.5) * voxel_size.
struct GridSpec {
  GridDims dims;
  Extent3 extent;

  void validate() const;
  Vec3 voxel_size() const;
  Vec3 voxel_center(int ix, int iy, int iz) const;
  /// Continuous index (x, y, z); may fall outside [0, n-1].
  Vec3 world_to_continuous_index(const Vec3& p) const;
  Vec3 continuous_index_to_world(const Vec3& index) const;
  bool operator==(const GridSpec&) const = default;
};

/// Dense channel-major voxel tensor: data[((c * nz + z) * ny + y) * nx + x].
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(GridSpec spec, int channels, double fill = 0.0);

  const GridSpec& spec() const { return spec_; }
  const GridDims& dims() const { return spec_.dims; }
  const Extent3& extent() const { return spec_.extent; }
  int channels() const { return channels_; }
  std::size_t voxels() const { return spec_.dims.voxels(); }

  std::size_t index(int c, int iz, int iy, int ix) const {
    const auto& d = spec_.dims;
    return ((std::size_t(c) * d.nz + iz) * d.ny + iy) * d.nx + ix;
  }
  double& at(int c, int iz, int iy, int ix) { return data_[index(c, iz, iy, ix)]; }
  double at(int c, int iz, int iy, int ix) const { return data_[index(c, iz, iy, ix)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> channel(int c) { return {data_.data() + c * voxels(), voxels()}; }
  std::span<const double> channel(int c) const { return {data_.data() + c * voxels(), voxels()}; }

  void fill(double value);
  bool same_shape(const VoxelGrid& other) const {
    return channels_ == other.channels_ && spec_ == other.spec_;
  }
  bool all_finite() const;

 private:
  GridSpec spec_;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Accumulator for d(loss)/d(voxel) shadowing a VoxelGrid; starts at zero.
class GridGradient {
 public:
  GridGradient() = default;
  explicit GridGradient(const VoxelGrid& shadowed) : values_(shadowed.spec(), shadowed.channels()) {}

  bool shadows(const VoxelGrid& grid) const { return values_.same_shape(grid); }
  VoxelGrid& values() { return values_; }
  const VoxelGrid& values() const { return values_; }
  std::span<double> data() { return values_.data(); }
  std::span<const double> data() const { return values_.data(); }

  void zero() { values_.fill(0.0); }
  /// Elementwise sum; shapes must match.
  void merge(const GridGradient& other);

 private:
  VoxelGrid values_;
};

/// The up-to-8 in-range corners of a trilinear query with their weights.
/// Corner offsets index a single channel plane (z, y, x).
struct TrilinearStencil {
  std::array<std::size_t, 8> offsets{};
  std::array<double, 8> weights{};
  int count = 0;
};

/// Zero-padded trilinear stencil at world point p. Throws on non-finite p.
TrilinearStencil trilinear_stencil(const GridSpec& spec, const Vec3& p);

/// Interpolated C-vector at p (out must have grid.channels() entries).
void grid_sample(const VoxelGrid& grid, const Vec3& p, std::span<double> out);
std::vector<double> grid_sample(const VoxelGrid& grid, const Vec3& p);

/// Applies a precomputed stencil to every channel.
void apply_stencil(const VoxelGrid& grid, const TrilinearStencil& stencil, std::span<double> out);
/// Scatters upstream[c] * weight into the stencil corners of grad.
void scatter_stencil(GridGradient& grad, const TrilinearStencil& stencil, std::span<const double> upstream);

/// Reverse mode of grid_sample: grad += upstream (x) trilinear weights.
void grid_sample_adjoint(const VoxelGrid& grid, const Vec3& p, std::span<const double> upstream,
                         GridGradient& grad);

/// d(value_c)/d(p) as a row-major C x 3 matrix (meters^-1 units).
std::vector<double> sample_point_gradient(const VoxelGrid& grid, const Vec3& p);

}  // namespace voxreg
