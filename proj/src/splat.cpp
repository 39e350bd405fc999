// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/splat.hpp"

#include "voxreg/error.hpp"
#include "voxreg/parallel.hpp"

#include <cmath>

namespace voxreg {

FeatureImage::FeatureImage(int width_, int height_, int channels_, int bins_)
    : width(width_), height(height_), channels(channels_), bins(bins_) {
  if (width <= 0 || height <= 0 || channels <= 0 || bins <= 0) throw InputError("feature image sizes must be positive");
  features.assign(pixels() * channels, 0.0);
  probs.assign(pixels() * bins, 0.0);
}

void FeatureImage::validate() const {
  if (width <= 0 || height <= 0 || channels <= 0 || bins <= 0) throw InputError("feature image sizes must be positive");
  if (features.size() != pixels() * channels || probs.size() != pixels() * bins) {
    throw ShapeError("feature image buffers do not match its sizes");
  }
  for (double f : features) {
    if (!std::isfinite(f)) throw InputError("feature image has non-finite features");
  }
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      double sum = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double p = prob(k, v, u);
        if (!std::isfinite(p) || p < 0.0) throw InputError("depth distribution must be finite and non-negative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) throw InputError("depth distribution does not sum to 1");
    }
  }
}

VoxelGrid splat(const std::vector<FeatureImage>& images, const std::vector<CameraModel>& cameras,
                const DepthBins& bins, const GridSpec& target, int threads) {
  if (images.empty()) throw InputError("splat needs at least one image");
  if (images.size() != cameras.size()) throw ShapeError("splat needs exactly one camera per image");
  const int channels = images.front().channels;
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i].validate();
    if (images[i].channels != channels) throw ShapeError("feature images disagree on channel count");
    if (images[i].bins != bins.count) throw ShapeError("feature image depth bins != depth bin count");
    if (images[i].width != cameras[i].width() || images[i].height != cameras[i].height()) {
      throw ShapeError("feature image size does not match its camera");
    }
  }
  const auto depths = sample_depths(bins);

  // Lanes split the flattened (image, row) list.
  std::vector<std::pair<std::size_t, int>> rows;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (int v = 0; v < images[i].height; ++v) rows.emplace_back(i, v);
  }
  VoxelGrid shape(target, channels);
  std::vector<GridGradient> lanes(kLanes, GridGradient(shape));
  for_each_lane(threads, [&](std::size_t lane) {
    const LaneRange range = lane_range(rows.size(), lane);
    std::vector<double> contribution(channels);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      const auto [i, v] = rows[r];
      const FeatureImage& image = images[i];
      for (int u = 0; u < image.width; ++u) {
        for (int k = 0; k < bins.count; ++k) {
          const double p = image.prob(k, v, u);
          if (p == 0.0) continue;
          const Vec3 x = cameras[i].back_project(u + 0.5, v + 0.5, depths[k]);
          const TrilinearStencil st = trilinear_stencil(target, x);
          if (st.count == 0) continue;
          for (int c = 0; c < channels; ++c) contribution[c] = p * image.feature(c, v, u);
          scatter_stencil(lanes[lane], st, contribution);
        }
      }
    }
  });
  GridGradient total(shape);
  for (const auto& lane : lanes) total.merge(lane);
  return std::move(total.values());
}

VoxelGrid coord_volume(const GridSpec& spec) {
  VoxelGrid out(spec, 3);
  const auto& d = spec.dims;
  const Vec3 size = spec.extent.size();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const Vec3 c = spec.voxel_center(x, y, z);
        const Vec3 n = 2.0 * (c - spec.extent.min).cwiseQuotient(size) - Vec3::Ones();
        for (int k = 0; k < 3; ++k) out.at(k, z, y, x) = n[k];
      }
    }
  }
  return out;
}

VoxelGrid concat_channels(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.spec() != b.spec()) throw ShapeError("concat_channels needs grids on the same lattice");
  VoxelGrid out(a.spec(), a.channels() + b.channels());
  auto dst = out.data();
  std::copy(a.data().begin(), a.data().end(), dst.begin());
  std::copy(b.data().begin(), b.data().end(), dst.begin() + a.data().size());
  return out;
}

VoxelGrid apply_densifier(const Densifier& densifier, const VoxelGrid& sparse) {
  VoxelGrid dense = densifier(sparse);
  if (!dense.same_shape(sparse)) throw ShapeError("densifier changed the grid shape");
  if (!dense.all_finite()) throw NumericError("densifier produced non-finite values");
  return dense;
}

std::vector<std::uint8_t> nonzero_mask(const VoxelGrid& grid) {
  std::vector<std::uint8_t> mask(grid.voxels(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (int c = 0; c < grid.channels() && !mask[i]; ++c) mask[i] = grid.channel(c)[i] != 0.0;
  }
  return mask;
}

VoxelGrid densify_baseline(const VoxelGrid& sparse, int iterations, std::span<const std::uint8_t> initial_mask) {
  if (iterations < 0) throw InputError("densify iterations must be >= 0");
  if (!initial_mask.empty() && initial_mask.size() != sparse.voxels()) throw ShapeError("densify mask size != voxels");
  const auto& d = sparse.dims();
  const int channels = sparse.channels();
  VoxelGrid current = sparse;
  std::vector<std::uint8_t> mask =
      initial_mask.empty() ? nonzero_mask(sparse) : std::vector<std::uint8_t>(initial_mask.begin(), initial_mask.end());
  static constexpr int kOffsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<double> mean(channels);
  for (int it = 0; it < iterations; ++it) {
    VoxelGrid next = current;
    std::vector<std::uint8_t> next_mask = mask;
    bool changed = false;
    for (int z = 0; z < d.nz; ++z) {
      for (int y = 0; y < d.ny; ++y) {
        for (int x = 0; x < d.nx; ++x) {
          const std::size_t i = current.index(0, z, y, x);
          if (mask[i]) continue;
          int found = 0;
          std::fill(mean.begin(), mean.end(), 0.0);
          for (const auto& o : kOffsets) {
            const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
            if (nx < 0 || ny < 0 || nz < 0 || nx >= d.nx || ny >= d.ny || nz >= d.nz) continue;
            const std::size_t j = current.index(0, nz, ny, nx);
            if (!mask[j]) continue;
            ++found;
            for (int c = 0; c < channels; ++c) mean[c] += current.channel(c)[j];
          }
          if (found == 0) continue;
          for (int c = 0; c < channels; ++c) next.channel(c)[i] = mean[c] / found;
          next_mask[i] = 1;
          changed = true;
        }
      }
    }
    current = std::move(next);
    mask = std::move(next_mask);
    if (!changed) break;
  }
  return current;
}

}  // namespace voxreg
