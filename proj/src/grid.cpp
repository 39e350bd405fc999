// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/grid.hpp"

#include "voxreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace voxreg {

namespace {

void require_finite(const Vec3& p) {
  if (!p.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite world point (" << p.x() << ", " << p.y() << ", " << p.z() << ")";
    throw InputError(msg.str());
  }
}

// Per-axis corner pair of a zero-padded linear interpolation.
struct AxisCorners {
  int lo = 0;
  double frac = 0.0;
  bool lo_in = false;
  bool hi_in = false;
};

AxisCorners axis_corners(double index, int n) {
  AxisCorners a;
  if (!(index > -1.0 && index < double(n))) return a;
  const double fl = std::floor(index);
  a.lo = int(fl);
  a.frac = index - fl;
  a.lo_in = a.lo >= 0 && a.lo <= n - 1;
  a.hi_in = a.lo + 1 >= 0 && a.lo + 1 <= n - 1;
  return a;
}

}  // namespace

void Extent3::validate() const {
  if (!min.allFinite() || !max.allFinite()) throw InputError("extent has non-finite bounds");
  for (int k = 0; k < 3; ++k) {
    if (!(max[k] > min[k])) {
      std::ostringstream msg;
      msg << "extent axis " << k << " has max " << max[k] << " <= min " << min[k];
      throw InputError(msg.str());
    }
  }
}

bool Extent3::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

void GridSpec::validate() const {
  extent.validate();
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) throw InputError("grid dims must be positive");
}

Vec3 GridSpec::voxel_size() const {
  return extent.size().cwiseQuotient(Vec3(dims.nx, dims.ny, dims.nz));
}

Vec3 GridSpec::voxel_center(int ix, int iy, int iz) const {
  return continuous_index_to_world(Vec3(ix, iy, iz));
}

Vec3 GridSpec::world_to_continuous_index(const Vec3& p) const {
  require_finite(p);
  return (p - extent.min).cwiseQuotient(voxel_size()) - Vec3::Constant(0.5);
}

Vec3 GridSpec::continuous_index_to_world(const Vec3& index) const {
  return extent.min + (index + Vec3::Constant(0.5)).cwiseProduct(voxel_size());
}

VoxelGrid::VoxelGrid(GridSpec spec, int channels, double fill)
    : spec_(std::move(spec)), channels_(channels) {
  spec_.validate();
  if (channels <= 0) throw InputError("grid must have at least one channel");
  data_.assign(std::size_t(channels) * spec_.dims.voxels(), fill);
}

void VoxelGrid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool VoxelGrid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void GridGradient::merge(const GridGradient& other) {
  if (!values_.same_shape(other.values_)) throw ShapeError("cannot merge gradients of different shapes");
  auto dst = values_.data();
  auto src = other.values_.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

TrilinearStencil trilinear_stencil(const GridSpec& spec, const Vec3& p) {
  const Vec3 idx = spec.world_to_continuous_index(p);
  const auto& d = spec.dims;
  const AxisCorners ax = axis_corners(idx.x(), d.nx);
  const AxisCorners ay = axis_corners(idx.y(), d.ny);
  const AxisCorners az = axis_corners(idx.z(), d.nz);
  TrilinearStencil s;
  if (!(ax.lo_in || ax.hi_in) || !(ay.lo_in || ay.hi_in) || !(az.lo_in || az.hi_in)) return s;
  for (int bz = 0; bz < 2; ++bz) {
    if (!(bz ? az.hi_in : az.lo_in)) continue;
    const double wz = bz ? az.frac : 1.0 - az.frac;
    for (int by = 0; by < 2; ++by) {
      if (!(by ? ay.hi_in : ay.lo_in)) continue;
      const double wy = by ? ay.frac : 1.0 - ay.frac;
      for (int bx = 0; bx < 2; ++bx) {
        if (!(bx ? ax.hi_in : ax.lo_in)) continue;
        const double wx = bx ? ax.frac : 1.0 - ax.frac;
        s.offsets[s.count] =
            (std::size_t(az.lo + bz) * d.ny + std::size_t(ay.lo + by)) * d.nx + std::size_t(ax.lo + bx);
        s.weights[s.count] = wx * wy * wz;
        ++s.count;
      }
    }
  }
  return s;
}

void apply_stencil(const VoxelGrid& grid, const TrilinearStencil& stencil, std::span<double> out) {
  for (int c = 0; c < grid.channels(); ++c) {
    const double* plane = grid.channel(c).data();
    double acc = 0.0;
    for (int k = 0; k < stencil.count; ++k) acc += stencil.weights[k] * plane[stencil.offsets[k]];
    out[c] = acc;
  }
}

void scatter_stencil(GridGradient& grad, const TrilinearStencil& stencil, std::span<const double> upstream) {
  auto& values = grad.values();
  for (int c = 0; c < values.channels(); ++c) {
    const double u = upstream[c];
    if (u == 0.0) continue;
    double* plane = values.channel(c).data();
    for (int k = 0; k < stencil.count; ++k) plane[stencil.offsets[k]] += u * stencil.weights[k];
  }
}

void grid_sample(const VoxelGrid& grid, const Vec3& p, std::span<double> out) {
  if (out.size() != std::size_t(grid.channels())) throw ShapeError("grid_sample output size != channels");
  apply_stencil(grid, trilinear_stencil(grid.spec(), p), out);
}

std::vector<double> grid_sample(const VoxelGrid& grid, const Vec3& p) {
  std::vector<double> out(grid.channels());
  grid_sample(grid, p, out);
  return out;
}

void grid_sample_adjoint(const VoxelGrid& grid, const Vec3& p, std::span<const double> upstream,
                         GridGradient& grad) {
  if (!grad.shadows(grid)) throw ShapeError("gradient buffer does not shadow the sampled grid");
  if (upstream.size() != std::size_t(grid.channels())) throw ShapeError("upstream size != channels");
  scatter_stencil(grad, trilinear_stencil(grid.spec(), p), upstream);
}

std::vector<double> sample_point_gradient(const VoxelGrid& grid, const Vec3& p) {
  const auto& spec = grid.spec();
  const Vec3 idx = spec.world_to_continuous_index(p);
  const Vec3 vs = spec.voxel_size();
  const auto& d = spec.dims;
  const std::array<AxisCorners, 3> ax = {axis_corners(idx.x(), d.nx), axis_corners(idx.y(), d.ny),
                                         axis_corners(idx.z(), d.nz)};
  std::vector<double> jac(std::size_t(grid.channels()) * 3, 0.0);
  for (int bz = 0; bz < 2; ++bz) {
    if (!(bz ? ax[2].hi_in : ax[2].lo_in)) continue;
    for (int by = 0; by < 2; ++by) {
      if (!(by ? ax[1].hi_in : ax[1].lo_in)) continue;
      for (int bx = 0; bx < 2; ++bx) {
        if (!(bx ? ax[0].hi_in : ax[0].lo_in)) continue;
        const std::array<int, 3> b = {bx, by, bz};
        std::array<double, 3> w{}, dw{};
        for (int k = 0; k < 3; ++k) {
          w[k] = b[k] ? ax[k].frac : 1.0 - ax[k].frac;
          dw[k] = (b[k] ? 1.0 : -1.0) / vs[k];
        }
        const std::array<double, 3> partial = {dw[0] * w[1] * w[2], w[0] * dw[1] * w[2], w[0] * w[1] * dw[2]};
        for (int c = 0; c < grid.channels(); ++c) {
          const double v = grid.at(c, ax[2].lo + bz, ax[1].lo + by, ax[0].lo + bx);
          for (int k = 0; k < 3; ++k) jac[std::size_t(c) * 3 + k] += partial[k] * v;
        }
      }
    }
  }
  return jac;
}

}  // namespace voxreg
