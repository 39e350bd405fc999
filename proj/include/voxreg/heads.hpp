// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace voxreg {

/// Per-voxel class labels over a lattice, stored (z, y, x) row-major.
struct OccupancyGrid {
  GridSpec spec;
  int classes = 0;
  std::vector<int> labels;

  OccupancyGrid() = default;
  OccupancyGrid(GridSpec spec, int classes, int fill = 0);

  int& at(int iz, int iy, int ix) { return labels[(std::size_t(iz) * spec.dims.ny + iy) * spec.dims.nx + ix]; }
  int at(int iz, int iy, int ix) const { return labels[(std::size_t(iz) * spec.dims.ny + iy) * spec.dims.nx + ix]; }
  void validate() const;
};

struct PointQuerySet {
  std::vector<Vec3> points;
  std::vector<int> labels;  // optional ground truth; empty or one per point
};

/// Index of the largest entry; ties go to the lowest index.
int argmax_class(std::span<const double> logits);

/// Samples the semantic volume at every target voxel center and takes the
/// argmax. The target lattice need not match the semantic grid's.
OccupancyGrid predict_occupancy(const VoxelGrid& semantic, const GridSpec& target, int threads = 1);

/// Argmax class per query point; points outside the semantic grid's extent
/// get `free_class`.
std::vector<int> segment_points(const VoxelGrid& semantic, const PointQuerySet& queries, int free_class);

/// Height compression of a gated dense volume into a (C_out, ny, nx) map.
struct BevFeatureMap {
  int channels = 0;
  int ny = 0;
  int nx = 0;
  std::vector<double> data;  // (channel * ny + y) * nx + x

  double at(int c, int y, int x) const { return data[(std::size_t(c) * ny + y) * nx + x]; }
};

/// Gates `dense` by tanh(density), stacks the nz slices of every channel
/// into a (C * nz) vector per column (index c * nz + z) and applies
/// `projection` ((C * nz) x C_out): out_o = sum_r projection(r, o) * v_r.
BevFeatureMap bev_features(const VoxelGrid& dense, const VoxelGrid& density, const Eigen::MatrixXd& projection);

struct ClassIou {
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
  std::uint64_t predicted = 0;
  std::uint64_t ground_truth = 0;
  std::optional<double> iou;  // empty when the class is absent from both
};

struct MiouReport {
  std::vector<ClassIou> per_class;
  double miou = 0.0;
  int counted_classes = 0;
  std::uint64_t evaluated_voxels = 0;
};

/// Per-class IoU over the masked voxels and their mean over classes that
/// appear in either prediction or ground truth.
MiouReport miou(const OccupancyGrid& pred, const OccupancyGrid& gt, std::span<const std::uint8_t> mask = {});

}  // namespace voxreg
