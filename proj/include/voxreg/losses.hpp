// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/render.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace voxreg {

inline constexpr int kIgnoreLabel = -1;

/// Targets for one rendered view (a camera image or the BEV map). A pixel
/// is supervised exactly when its label is not kIgnoreLabel; its depth (or
/// height) target is then finite.
struct ViewSupervision {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<int> labels;

  ViewSupervision() = default;
  ViewSupervision(int width, int height);

  std::size_t pixels() const { return std::size_t(width) * height; }
  bool valid(std::size_t i) const { return labels[i] != kIgnoreLabel; }
  std::size_t valid_count() const;
  std::vector<std::uint8_t> mask() const;
  void validate(int classes) const;
};

struct LossWeights {
  double depth = 1.0;
  double semantic = 1.0;
};

struct LossOptions {
  double smooth_l1_transition = 1.0;
  /// Softmax S / W instead of S.
  bool renormalize_semantic = false;
};

/// One rendered view paired with its targets.
struct ViewRef {
  const RenderOutput* render = nullptr;
  const ViewSupervision* sup = nullptr;
};

/// dL/d(rendered quantity) for one view, shaped like its RenderOutput.
struct ViewGrad {
  std::vector<double> d_depth;
  std::vector<double> d_semantic;
  std::vector<double> d_weight_sum;

  explicit ViewGrad(const RenderOutput& render);
  RenderUpstream upstream() const { return {d_depth, d_semantic, d_weight_sum}; }
};

double smooth_l1(double x, double transition = 1.0);
double smooth_l1_grad(double x, double transition = 1.0);

struct ClassLoss {
  double loss = 0.0;
  std::vector<double> grad;
};

/// -log softmax(logits)[label]; grad = softmax - onehot.
ClassLoss cross_entropy(std::span<const double> logits, int label);

/// Lovasz-softmax over pixels x classes probabilities, averaged over the
/// classes present among supervised labels. `mask`, when non-empty,
/// further restricts the supervised pixels. grad is d/d(probs).
ClassLoss lovasz_softmax(std::span<const double> probs, std::span<const int> labels, int classes,
                         std::span<const std::uint8_t> mask = {});

/// Smooth-L1 mean over the supervised pixels pooled across `views`;
/// gradients (times `scale`) are added into `grads`. Zero when no pixel
/// is supervised.
double depth_term(std::span<const ViewRef> views, std::span<ViewGrad> grads, double scale,
                  const LossOptions& options = {});

/// Cross-entropy mean over the pooled supervised pixels plus the
/// Lovasz-softmax of the pooled pixels, rendered S treated as logits.
double semantic_term(std::span<const ViewRef> views, std::span<ViewGrad> grads, double scale,
                     const LossOptions& options = {});

struct LossBreakdown {
  double depth_camera = 0.0;
  double depth_bev = 0.0;
  double semantic_camera = 0.0;
  double semantic_bev = 0.0;
  double total = 0.0;

  double depth() const { return depth_camera + depth_bev; }
  double semantic() const { return semantic_camera + semantic_bev; }
};

/// Camera term + BEV term for depth and for semantics, weighted and summed.
/// Either view list may be empty. Terms with zero weight are reported but
/// contribute neither to `total` nor to the gradients.
LossBreakdown regulator_loss(std::span<const ViewRef> camera_views, std::span<const ViewRef> bev_views,
                             const LossWeights& weights, std::vector<ViewGrad>& camera_grads,
                             std::vector<ViewGrad>& bev_grads, const LossOptions& options = {});

}  // namespace voxreg
