// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/camera.hpp"
#include "voxreg/grid.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace voxreg {

/// Per-pixel features plus a categorical depth distribution, both stored as
/// planes: features[(c * height + v) * width + u], probs[(k * height + v) * width + u].
struct FeatureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bins = 0;
  std::vector<double> features;
  std::vector<double> probs;

  FeatureImage() = default;
  FeatureImage(int width, int height, int channels, int bins);

  std::size_t pixels() const { return std::size_t(width) * height; }
  double& feature(int c, int v, int u) { return features[(std::size_t(c) * height + v) * width + u]; }
  double feature(int c, int v, int u) const { return features[(std::size_t(c) * height + v) * width + u]; }
  double& prob(int k, int v, int u) { return probs[(std::size_t(k) * height + v) * width + u]; }
  double prob(int k, int v, int u) const { return probs[(std::size_t(k) * height + v) * width + u]; }

  /// Sizes consistent, values finite, distributions non-negative and
  /// summing to 1 within 1e-6.
  void validate() const;
};

/// Lifts every pixel along its depth bins and scatters feature * prob into
/// the target grid with trilinear weights (the transpose of grid_sample).
/// Pixel (u, v) is cast through its center (u + 0.5, v + 0.5).
VoxelGrid splat(const std::vector<FeatureImage>& images, const std::vector<CameraModel>& cameras,
                const DepthBins& bins, const GridSpec& target, int threads = 1);

/// Voxel-center coordinates mapped so extent.min -> -1 and extent.max -> +1.
VoxelGrid coord_volume(const GridSpec& spec);

/// Stacks the channels of a then b (same lattice).
VoxelGrid concat_channels(const VoxelGrid& a, const VoxelGrid& b);

/// A densifier maps a sparse volume to a dense one on the same lattice.
using Densifier = std::function<VoxelGrid(const VoxelGrid&)>;

/// Runs a densifier and checks it kept the lattice, channel count and
/// produced only finite values.
VoxelGrid apply_densifier(const Densifier& densifier, const VoxelGrid& sparse);

/// Occupancy mask of a volume: voxels with any non-zero channel.
std::vector<std::uint8_t> nonzero_mask(const VoxelGrid& grid);

/// Iterative 6-neighborhood fill. A voxel starts occupied when `mask` is
/// set (default: nonzero_mask). Each iteration every empty voxel with at
/// least one occupied face neighbor takes their mean and becomes occupied;
/// originally occupied voxels never change.
VoxelGrid densify_baseline(const VoxelGrid& sparse, int iterations, std::span<const std::uint8_t> mask = {});

}  // namespace voxreg
