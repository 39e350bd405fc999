// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace voxreg::gradcheck {

inline constexpr double kUnitThreshold = 1e-5;
inline constexpr double kEndToEndThreshold = 1e-4;

struct Options {
  std::uint64_t seed = 0;
  int grid = 6;      // end-to-end lattice is grid^3
  int cameras = 2;
  int pixels = 8;    // end-to-end images are pixels x pixels
  int threads = 1;
};

struct SuiteResult {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = kUnitThreshold;
  std::size_t checks = 0;
  // Entries whose stencil straddled a kink; at most 1 in 50 is allowed.
  std::size_t skipped = 0;
  double seconds = 0.0;
  // Entry with the largest error.
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed() const { return checks > 0 && max_rel_error < threshold && 50 * skipped <= checks; }
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Fourth-order central difference
/// (f(x - 2h) - 8 f(x - h) + 8 f(x + h) - f(x + 2h)) / 12h.
/// Restores x before returning.
template <typename Fn>
double central_difference(Fn&& f, double& x, double h) {
  const double x0 = x;
  auto at = [&](double offset) {
    x = x0 + offset;
    return f();
  };
  const double d = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
  x = x0;
  return d;
}

SuiteResult check_grid_sample(const Options& options);
SuiteResult check_psi_beta(const Options& options);
SuiteResult check_composite(const Options& options);
SuiteResult check_losses(const Options& options);
/// Regulator loss through render, grid sampling and the density map to
/// V_sdf, V_semantic and the log Laplace scales.
SuiteResult check_end_to_end(const Options& options);

std::vector<SuiteResult> run_all(const Options& options);

}  // namespace voxreg::gradcheck
