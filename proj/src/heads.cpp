// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/heads.hpp"

#include "voxreg/density.hpp"
#include "voxreg/error.hpp"
#include "voxreg/parallel.hpp"

namespace voxreg {

OccupancyGrid::OccupancyGrid(GridSpec spec_, int classes_, int fill)
    : spec(std::move(spec_)), classes(classes_), labels(spec.dims.voxels(), fill) {
  spec.validate();
  if (classes <= 0) throw InputError("occupancy grid needs classes > 0");
}

void OccupancyGrid::validate() const {
  spec.validate();
  if (labels.size() != spec.dims.voxels()) throw ShapeError("occupancy labels do not match dims");
  for (int l : labels) {
    if (l < 0 || l >= classes) throw InputError("occupancy label out of range");
  }
}

int argmax_class(std::span<const double> logits) {
  int best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = int(k);
  }
  return best;
}

OccupancyGrid predict_occupancy(const VoxelGrid& semantic, const GridSpec& target, int threads) {
  OccupancyGrid out(target, semantic.channels());
  const auto& d = target.dims;
  const std::size_t slices = std::size_t(d.nz) * d.ny;
  for_each_lane(threads, [&](std::size_t lane) {
    const LaneRange range = lane_range(slices, lane);
    std::vector<double> logits(semantic.channels());
    for (std::size_t s = range.begin; s < range.end; ++s) {
      const int z = int(s / d.ny), y = int(s % d.ny);
      for (int x = 0; x < d.nx; ++x) {
        grid_sample(semantic, target.voxel_center(x, y, z), logits);
        out.at(z, y, x) = argmax_class(logits);
      }
    }
  });
  return out;
}

std::vector<int> segment_points(const VoxelGrid& semantic, const PointQuerySet& queries, int free_class) {
  if (free_class < 0 || free_class >= semantic.channels()) throw InputError("free class out of range");
  std::vector<int> out;
  out.reserve(queries.points.size());
  std::vector<double> logits(semantic.channels());
  for (const Vec3& p : queries.points) {
    if (!p.allFinite()) throw InputError("query point is not finite");
    if (!semantic.extent().contains(p)) {
      out.push_back(free_class);
      continue;
    }
    grid_sample(semantic, p, logits);
    out.push_back(argmax_class(logits));
  }
  return out;
}

BevFeatureMap bev_features(const VoxelGrid& dense, const VoxelGrid& density, const Eigen::MatrixXd& projection) {
  const VoxelGrid gated = tanh_gate(dense, density);
  const auto& d = dense.dims();
  const int stacked = dense.channels() * d.nz;
  if (projection.rows() != stacked) throw ShapeError("projection rows must equal channels * nz");
  BevFeatureMap out;
  out.channels = int(projection.cols());
  out.ny = d.ny;
  out.nx = d.nx;
  out.data.assign(std::size_t(out.channels) * d.ny * d.nx, 0.0);
  Eigen::VectorXd column(stacked);
  for (int y = 0; y < d.ny; ++y) {
    for (int x = 0; x < d.nx; ++x) {
      for (int c = 0; c < dense.channels(); ++c) {
        for (int z = 0; z < d.nz; ++z) column[c * d.nz + z] = gated.at(c, z, y, x);
      }
      const Eigen::VectorXd projected = projection.transpose() * column;
      for (int o = 0; o < out.channels; ++o) out.data[(std::size_t(o) * d.ny + y) * d.nx + x] = projected[o];
    }
  }
  return out;
}

MiouReport miou(const OccupancyGrid& pred, const OccupancyGrid& gt, std::span<const std::uint8_t> mask) {
  if (pred.spec.dims != gt.spec.dims) throw ShapeError("prediction and ground truth dims differ");
  if (!mask.empty() && mask.size() != gt.labels.size()) throw ShapeError("evaluation mask size differs from grid");
  pred.validate();
  gt.validate();
  const int classes = std::max(pred.classes, gt.classes);
  MiouReport report;
  report.per_class.resize(classes);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++report.evaluated_voxels;
    const int p = pred.labels[i], g = gt.labels[i];
    ++report.per_class[p].predicted;
    ++report.per_class[g].ground_truth;
    if (p == g) ++report.per_class[p].intersection;
  }
  double sum = 0.0;
  for (auto& c : report.per_class) {
    c.union_count = c.predicted + c.ground_truth - c.intersection;
    if (c.union_count == 0) continue;
    c.iou = double(c.intersection) / double(c.union_count);
    sum += *c.iou;
    ++report.counted_classes;
  }
  report.miou = report.counted_classes ? sum / report.counted_classes : 0.0;
  return report;
}

}  // namespace voxreg
