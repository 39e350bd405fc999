// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/losses.hpp"

#include "voxreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxreg {

namespace {

constexpr double kRenormalizeFloor = 1e-6;

void softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& p : out) p /= sum;
}

void check_view(const ViewRef& view) {
  if (!view.render || !view.sup) throw InputError("view is missing its render or supervision");
  if (view.render->pixels() != view.sup->pixels() || view.render->width != view.sup->width) {
    throw ShapeError("rendered map and supervision map sizes differ");
  }
}

// Logits fed to the classifier for pixel i of a view.
void pixel_logits(const RenderOutput& r, std::size_t i, bool renormalize, std::span<double> out) {
  const double* s = r.semantic.data() + i * r.classes;
  const double w = r.weight_sum[i];
  const double scale = (renormalize && w > kRenormalizeFloor) ? 1.0 / w : 1.0;
  for (int c = 0; c < r.classes; ++c) out[c] = s[c] * scale;
}

// Pulls dL/d(logits) back onto the view's S and W.
void push_logit_grad(const RenderOutput& r, std::size_t i, bool renormalize, std::span<const double> d_logits,
                     double scale, ViewGrad& g) {
  const double* s = r.semantic.data() + i * r.classes;
  double* ds = g.d_semantic.data() + i * r.classes;
  const double w = r.weight_sum[i];
  if (renormalize && w > kRenormalizeFloor) {
    double dw = 0.0;
    for (int c = 0; c < r.classes; ++c) {
      ds[c] += scale * d_logits[c] / w;
      dw -= d_logits[c] * s[c] / (w * w);
    }
    g.d_weight_sum[i] += scale * dw;
  } else {
    for (int c = 0; c < r.classes; ++c) ds[c] += scale * d_logits[c];
  }
}

}  // namespace

ViewSupervision::ViewSupervision(int width_, int height_)
    : width(width_), height(height_), depth(std::size_t(width_) * height_, 0.0),
      labels(std::size_t(width_) * height_, kIgnoreLabel) {}

std::size_t ViewSupervision::valid_count() const {
  return std::size_t(std::count_if(labels.begin(), labels.end(), [](int l) { return l != kIgnoreLabel; }));
}

std::vector<std::uint8_t> ViewSupervision::mask() const {
  std::vector<std::uint8_t> m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = valid(i) ? 1 : 0;
  return m;
}

void ViewSupervision::validate(int classes) const {
  if (depth.size() != pixels() || labels.size() != pixels()) throw ShapeError("supervision buffers do not match size");
  for (std::size_t i = 0; i < pixels(); ++i) {
    if (!valid(i)) continue;
    if (labels[i] < 0 || labels[i] >= classes) throw InputError("supervision label out of range");
    if (!std::isfinite(depth[i])) throw InputError("supervised pixel has a non-finite depth target");
  }
}

ViewGrad::ViewGrad(const RenderOutput& render)
    : d_depth(render.pixels(), 0.0), d_semantic(render.pixels() * render.classes, 0.0),
      d_weight_sum(render.pixels(), 0.0) {}

double smooth_l1(double x, double transition) {
  const double a = std::abs(x);
  return a < transition ? 0.5 * x * x / transition : a - 0.5 * transition;
}

double smooth_l1_grad(double x, double transition) {
  if (std::abs(x) < transition) return x / transition;
  return x > 0.0 ? 1.0 : -1.0;
}

ClassLoss cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || std::size_t(label) >= logits.size()) throw InputError("cross_entropy label out of range");
  ClassLoss out;
  out.grad.resize(logits.size());
  softmax(logits, out.grad);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  out.loss = std::log(sum) + m - logits[label];
  out.grad[label] -= 1.0;
  return out;
}

ClassLoss lovasz_softmax(std::span<const double> probs, std::span<const int> labels, int classes,
                         std::span<const std::uint8_t> mask) {
  if (classes <= 0) throw InputError("lovasz_softmax needs classes > 0");
  const std::size_t pixels = labels.size();
  if (probs.size() != pixels * classes) throw ShapeError("probabilities size != pixels * classes");
  if (!mask.empty() && mask.size() != pixels) throw ShapeError("mask size != pixels");
  ClassLoss out;
  out.grad.assign(probs.size(), 0.0);

  std::vector<std::size_t> active;
  std::vector<char> present(classes, 0);
  for (std::size_t i = 0; i < pixels; ++i) {
    if (labels[i] == kIgnoreLabel || (!mask.empty() && !mask[i])) continue;
    if (labels[i] < 0 || labels[i] >= classes) throw InputError("lovasz_softmax label out of range");
    active.push_back(i);
    present[labels[i]] = 1;
  }
  const int n_present = int(std::count(present.begin(), present.end(), 1));
  if (n_present == 0) return out;

  const std::size_t n = active.size();
  std::vector<double> errors(n);
  std::vector<char> fg(n);
  std::vector<std::size_t> order(n);
  for (int c = 0; c < classes; ++c) {
    if (!present[c]) continue;
    double gts = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = active[j];
      fg[j] = labels[i] == c;
      gts += fg[j];
      errors[j] = std::abs(double(fg[j]) - probs[i * classes + c]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
    double cum_fg = 0.0, cum_bg = 0.0, prev_jaccard = 0.0, loss_c = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t j = order[r];
      cum_fg += fg[j];
      cum_bg += 1.0 - fg[j];
      const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
      const double weight = jaccard - prev_jaccard;
      prev_jaccard = jaccard;
      loss_c += errors[j] * weight;
      const double d_error = weight / n_present;
      out.grad[active[j] * classes + c] += fg[j] ? -d_error : d_error;
    }
    out.loss += loss_c;
  }
  out.loss /= n_present;
  return out;
}

double depth_term(std::span<const ViewRef> views, std::span<ViewGrad> grads, double scale,
                  const LossOptions& options) {
  if (grads.size() != views.size()) throw ShapeError("one gradient buffer per view is required");
  std::size_t valid = 0;
  for (const auto& v : views) {
    check_view(v);
    valid += v.sup->valid_count();
  }
  if (valid == 0) return 0.0;
  const double inv = 1.0 / double(valid);
  double total = 0.0;
  for (std::size_t k = 0; k < views.size(); ++k) {
    const RenderOutput& r = *views[k].render;
    const ViewSupervision& sup = *views[k].sup;
    for (std::size_t i = 0; i < sup.pixels(); ++i) {
      if (!sup.valid(i)) continue;
      const double residual = r.depth[i] - sup.depth[i];
      total += smooth_l1(residual, options.smooth_l1_transition);
      if (scale != 0.0) grads[k].d_depth[i] += scale * inv * smooth_l1_grad(residual, options.smooth_l1_transition);
    }
  }
  return total * inv;
}

double semantic_term(std::span<const ViewRef> views, std::span<ViewGrad> grads, double scale,
                     const LossOptions& options) {
  if (grads.size() != views.size()) throw ShapeError("one gradient buffer per view is required");
  std::size_t valid = 0;
  int classes = -1;
  for (const auto& v : views) {
    check_view(v);
    if (classes >= 0 && v.render->classes != classes) throw ShapeError("views disagree on class count");
    classes = v.render->classes;
    v.sup->validate(classes);
    valid += v.sup->valid_count();
  }
  if (valid == 0) return 0.0;
  const double inv = 1.0 / double(valid);

  // Pooled supervised pixels: (view, pixel) pairs in view order.
  std::vector<std::pair<std::size_t, std::size_t>> pooled;
  pooled.reserve(valid);
  std::vector<double> probs(valid * classes);
  std::vector<int> labels(valid);
  std::vector<double> logits(classes);
  double ce_total = 0.0;
  for (std::size_t k = 0; k < views.size(); ++k) {
    const RenderOutput& r = *views[k].render;
    const ViewSupervision& sup = *views[k].sup;
    for (std::size_t i = 0; i < sup.pixels(); ++i) {
      if (!sup.valid(i)) continue;
      const std::size_t j = pooled.size();
      pooled.emplace_back(k, i);
      pixel_logits(r, i, options.renormalize_semantic, logits);
      const ClassLoss ce = cross_entropy(logits, sup.labels[i]);
      ce_total += ce.loss;
      if (scale != 0.0) push_logit_grad(r, i, options.renormalize_semantic, ce.grad, scale * inv, grads[k]);
      softmax(logits, std::span<double>(probs.data() + j * classes, classes));
      labels[j] = sup.labels[i];
    }
  }

  const ClassLoss ls = lovasz_softmax(probs, labels, classes);
  if (scale != 0.0) {
    std::vector<double> d_logits(classes);
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      const double* p = probs.data() + j * classes;
      const double* dp = ls.grad.data() + j * classes;
      double dot = 0.0;
      for (int c = 0; c < classes; ++c) dot += p[c] * dp[c];
      for (int c = 0; c < classes; ++c) d_logits[c] = p[c] * (dp[c] - dot);
      const auto [k, i] = pooled[j];
      push_logit_grad(*views[k].render, i, options.renormalize_semantic, d_logits, scale, grads[k]);
    }
  }
  return ce_total * inv + ls.loss;
}

LossBreakdown regulator_loss(std::span<const ViewRef> camera_views, std::span<const ViewRef> bev_views,
                             const LossWeights& weights, std::vector<ViewGrad>& camera_grads,
                             std::vector<ViewGrad>& bev_grads, const LossOptions& options) {
  if (!(weights.depth >= 0.0) || !(weights.semantic >= 0.0) || !std::isfinite(weights.depth) ||
      !std::isfinite(weights.semantic)) {
    throw InputError("loss weights must be finite and non-negative");
  }
  camera_grads.clear();
  bev_grads.clear();
  for (const auto& v : camera_views) camera_grads.emplace_back(*v.render);
  for (const auto& v : bev_views) bev_grads.emplace_back(*v.render);

  LossBreakdown out;
  out.depth_camera = depth_term(camera_views, camera_grads, weights.depth, options);
  out.depth_bev = depth_term(bev_views, bev_grads, weights.depth, options);
  out.semantic_camera = semantic_term(camera_views, camera_grads, weights.semantic, options);
  out.semantic_bev = semantic_term(bev_views, bev_grads, weights.semantic, options);
  out.total = (weights.depth != 0.0 ? weights.depth * out.depth() : 0.0) +
              (weights.semantic != 0.0 ? weights.semantic * out.semantic() : 0.0);
  return out;
}

}  // namespace voxreg
