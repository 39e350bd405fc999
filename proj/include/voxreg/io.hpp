// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/grid.hpp"
#include "voxreg/losses.hpp"
#include "voxreg/splat.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace voxreg::io {

namespace fs = std::filesystem;

// VXG1 voxel tensor:
//   "VXG1" | u32 version=1 | u8 dtype (0 = f64) | u8 ndim = 4 |
//   u32 dims[C, nz, ny, nx] | f64 extent min xyz | f64 extent max xyz | f64 data
// All integers and floats little-endian; data channel-major then z, y, x.
void write_vxg(const fs::path& path, const VoxelGrid& grid);
VoxelGrid read_vxg(const fs::path& path);

// VXF1 feature image:
//   "VXF1" | u32 version=1 | u8 dtype (0 = f64) | u8 ndim = 3 |
//   u32 dims[C + n_bins, H, W] | u32 feature_planes (= C) | f64 planes
// Feature planes come first, then the depth-distribution planes.
void write_feature_image(const fs::path& path, const FeatureImage& image);
FeatureImage read_feature_image(const fs::path& path);

/// Single-channel little-endian PFM ("Pf", scale -1), rows stored bottom-up.
/// Values are quantized to float32.
void write_pfm(const fs::path& path, int width, int height, std::span<const double> values);

struct ScalarImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, top row first
};

ScalarImage read_pfm(const fs::path& path);

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (RGB)
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

void write_png(const fs::path& path, const PngImage& image);
PngImage read_png(const fs::path& path);

/// 16-bit depth PNG in millimeters; 0 marks pixels without a value.
/// Depths are rounded to the nearest millimeter and must lie in (0, 65.535] m.
void write_depth_png_mm(const fs::path& path, int width, int height, std::span<const double> depth,
                        std::span<const std::uint8_t> mask = {});
ScalarImage read_depth_png_mm(const fs::path& path);

inline constexpr std::uint8_t kIgnorePixel = 255;

/// 8-bit class-index PNG; kIgnoreLabel is stored as 255.
void write_label_png(const fs::path& path, int width, int height, std::span<const int> labels);
std::vector<int> read_label_png(const fs::path& path, int* width = nullptr, int* height = nullptr);

/// RGB visualization of class indices.
std::array<std::uint8_t, 3> palette_color(int label);
void write_palette_png(const fs::path& path, int width, int height, std::span<const int> labels);

/// step,L_dep_cam,L_dep_bev,L_sem_cam,L_sem_bev,total with round-trip
/// precision.
void write_loss_csv(const fs::path& path, std::span<const LossBreakdown> log);
std::vector<LossBreakdown> read_loss_csv(const fs::path& path);

}  // namespace voxreg::io
