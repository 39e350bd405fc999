// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/grid.hpp"

#include <cmath>

namespace voxreg {

/// Scale parameters of the Laplace-CDF density map. Stored as logs so any
/// real-valued update keeps alpha and beta strictly positive.
struct LaplaceParams {
  double log_alpha = std::log(10.0);
  double log_beta = std::log(0.1);

  static LaplaceParams from_scales(double alpha, double beta);
  double alpha() const { return std::exp(log_alpha); }
  double beta() const { return std::exp(log_beta); }
};

/// alpha * Psi_beta(s), Psi_beta the Laplace(0, beta) CDF. Signed distance
/// is positive inside solids, so interiors map toward alpha.
double psi_beta(double s, const LaplaceParams& params);

struct DensityPartials {
  double ds = 0.0;
  double dalpha = 0.0;
  double dbeta = 0.0;
};

DensityPartials psi_beta_grad(double s, const LaplaceParams& params);

/// Elementwise psi_beta over a single-channel SDF grid.
VoxelGrid density_volume_from_sdf(const VoxelGrid& sdf, const LaplaceParams& params);

/// Chain rule back through density_volume_from_sdf. Accumulates into
/// d_sdf and returns (dL/dlog_alpha, dL/dlog_beta).
struct LaplaceGradient {
  double d_log_alpha = 0.0;
  double d_log_beta = 0.0;
};
LaplaceGradient density_volume_adjoint(const VoxelGrid& sdf, const LaplaceParams& params,
                                       const GridGradient& d_density, GridGradient& d_sdf);

/// dense_c * tanh(density) per voxel.
VoxelGrid tanh_gate(const VoxelGrid& dense, const VoxelGrid& density);

}  // namespace voxreg
