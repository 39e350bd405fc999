// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/density.hpp"

#include "voxreg/error.hpp"

#include <cmath>

namespace voxreg {

namespace {

void require_finite(double s) {
  if (!std::isfinite(s)) throw InputError("non-finite signed distance");
}

}  // namespace

LaplaceParams LaplaceParams::from_scales(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InputError("Laplace density needs alpha > 0 and beta > 0");
  }
  return {std::log(alpha), std::log(beta)};
}

double psi_beta(double s, const LaplaceParams& params) {
  require_finite(s);
  const double alpha = params.alpha();
  const double beta = params.beta();
  if (s <= 0.0) return alpha * 0.5 * std::exp(s / beta);
  return alpha * (1.0 - 0.5 * std::exp(-s / beta));
}

DensityPartials psi_beta_grad(double s, const LaplaceParams& params) {
  require_finite(s);
  const double alpha = params.alpha();
  const double beta = params.beta();
  DensityPartials g;
  if (s <= 0.0) {
    const double e = 0.5 * std::exp(s / beta);
    g.ds = alpha * e / beta;
    g.dalpha = e;
    g.dbeta = -alpha * e * s / (beta * beta);
  } else {
    const double e = 0.5 * std::exp(-s / beta);
    g.ds = alpha * e / beta;
    g.dalpha = 1.0 - e;
    g.dbeta = -alpha * e * s / (beta * beta);
  }
  return g;
}

VoxelGrid density_volume_from_sdf(const VoxelGrid& sdf, const LaplaceParams& params) {
  if (sdf.channels() != 1) throw ShapeError("SDF grid must have exactly one channel");
  VoxelGrid density(sdf.spec(), 1);
  auto src = sdf.data();
  auto dst = density.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = psi_beta(src[i], params);
  return density;
}

LaplaceGradient density_volume_adjoint(const VoxelGrid& sdf, const LaplaceParams& params,
                                       const GridGradient& d_density, GridGradient& d_sdf) {
  if (!d_density.shadows(sdf) || !d_sdf.shadows(sdf)) throw ShapeError("density adjoint shape mismatch");
  const double alpha = params.alpha();
  const double beta = params.beta();
  auto s = sdf.data();
  auto up = d_density.data();
  auto out = d_sdf.data();
  LaplaceGradient g;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (up[i] == 0.0) continue;
    const DensityPartials p = psi_beta_grad(s[i], params);
    out[i] += up[i] * p.ds;
    g.d_log_alpha += up[i] * p.dalpha * alpha;
    g.d_log_beta += up[i] * p.dbeta * beta;
  }
  return g;
}

VoxelGrid tanh_gate(const VoxelGrid& dense, const VoxelGrid& density) {
  if (density.channels() != 1 || dense.spec() != density.spec()) {
    throw ShapeError("tanh_gate needs a single-channel density on the dense grid's lattice");
  }
  VoxelGrid out(dense.spec(), dense.channels());
  auto gate = density.data();
  for (int c = 0; c < dense.channels(); ++c) {
    auto src = dense.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * std::tanh(gate[i]);
  }
  return out;
}

}  // namespace voxreg
