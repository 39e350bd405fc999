// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/density.hpp"
#include "voxreg/error.hpp"
#include "voxreg/heads.hpp"
#include "voxreg/losses.hpp"
#include "voxreg/render.hpp"
#include "voxreg/scene.hpp"
#include "voxreg/splat.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace voxreg {

/// Adam with decoupled weight decay.
struct AdamConfig {
  double lr = 2e-4;
  double weight_decay = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct FitConfig {
  AdamConfig adam;
  int steps = 2000;
  LossWeights weights;
  LossOptions loss;
  bool camera_supervision = true;
  bool bev_supervision = true;
  bool learn_laplace = true;
  /// Density scales at step 0.
  double init_alpha = 10.0;
  double init_beta = 0.1;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  LaplaceParams initial_laplace() const { return LaplaceParams::from_scales(init_alpha, init_beta); }
};

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

/// Optimized parameters and optimizer state.
struct FitState {
  VoxelGrid sdf;       // C = 1
  VoxelGrid semantic;  // C = classes
  LaplaceParams laplace;
  AdamMoments sdf_moments;
  AdamMoments semantic_moments;
  AdamMoments laplace_moments{2};
  long step = 0;

  /// Zero SDF, uniform (all-zero) logits.
  static FitState initial(const GridSpec& grid, int classes, const LaplaceParams& laplace);
  void validate() const;
};

/// Fixed inputs of a fit: the modeled lattice, the training views with
/// their precomputed rays and the supervision maps.
struct FitProblem {
  GridSpec grid;
  int classes = 0;
  int free_class = 0;
  DepthBins bins;
  int stride = 4;
  std::vector<CameraModel> cameras;
  std::vector<RaySet> camera_rays;
  RaySet bev_rays;
  std::vector<ViewSupervision> camera_supervision;
  ViewSupervision bev_supervision;

  /// BEV rays sample every voxel layer at the supervision map's resolution.
  static FitProblem build(const GridSpec& grid, int classes, int free_class, const DepthBins& bins, int stride,
                          std::vector<CameraModel> cameras, const GroundTruthBundle& bundle);
};

struct ParamGradients {
  GridGradient sdf;
  GridGradient semantic;
  LaplaceGradient laplace;
};

/// Forward render + regulator loss at the given parameters; fills `grads`
/// (when non-null) with dL/dparams through composite, grid sampling and the
/// density transform.
LossBreakdown regulator_objective(const VoxelGrid& sdf, const VoxelGrid& semantic, const LaplaceParams& laplace,
                                  const FitProblem& problem, const FitConfig& config, ParamGradients* grads);

/// One Adam step. The loss reported is the one at the incoming parameters.
/// Throws NumericError, leaving `state` untouched, on a non-finite loss or
/// gradient.
LossBreakdown fit_step(FitState& state, const FitProblem& problem, const FitConfig& config);

struct FitResult {
  FitState state;
  std::vector<LossBreakdown> log;
};

using FitObserver = std::function<void(const FitState&, const LossBreakdown&)>;

/// Thrown by fit when a step fails; carries the last good state and log.
class FitAborted : public NumericError {
 public:
  FitAborted(const std::string& what, FitResult partial) : NumericError(what), partial_(std::move(partial)) {}
  const FitResult& partial() const { return partial_; }

 private:
  FitResult partial_;
};

FitResult fit(const FitConfig& config, const FitProblem& problem, FitState init, const FitObserver& observer = {});

/// Occupancy class scores combining density and semantics: free scores
/// log P(free) = -sigma * path_length; class c scores
/// log(1 - exp(-sigma * path_length)) + log softmax over the non-free
/// channels. Argmax of this volume is the occupancy prediction.
VoxelGrid occupancy_scores(const VoxelGrid& density, const VoxelGrid& semantic, int free_class, double path_length);

struct EvalSetup {
  SceneSpec scene;
  CameraModel heldout;
  DepthBins bins;
  int stride = 4;
  /// Only voxels whose true |SDF| exceeds this enter the mIoU.
  double min_abs_sdf = 0.4;
  int threads = 1;
};

struct FitMetrics {
  MiouReport occupancy;
  double depth_mae = 0.0;
  std::size_t depth_pixels = 0;
  double bev_height_mae = 0.0;
  std::size_t bev_pixels = 0;
};

FitMetrics evaluate_fit(const FitState& state, const FitProblem& problem, const EvalSetup& setup);

/// One-hot class features and a one-hot depth bin for every supervised
/// pixel of each training view; unsupervised pixels get zero features and
/// a uniform distribution. Images match the strided cameras.
std::vector<FeatureImage> supervision_features(const FitProblem& problem);
std::vector<CameraModel> strided_cameras(const FitProblem& problem);

struct PipelineResult {
  VoxelGrid sparse;
  VoxelGrid dense;
  OccupancyGrid occupancy;
  MiouReport report;
};

/// Learning-free pass through the lift-splat pipeline: supervised camera
/// pixels are lifted with one-hot class features and a one-hot depth bin,
/// splatted, concatenated with coordinate channels, densified, and the
/// first `classes` channels are read as the semantic volume.
PipelineResult run_splat_pipeline(const FitProblem& problem, const SceneSpec& scene, int densify_iterations,
                                  int threads = 1);

}  // namespace voxreg
