// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxreg/optimizer.hpp"
#include "voxreg/scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voxreg::config {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kSceneSchema = "voxreg.scene/1";
inline constexpr const char* kRigSchema = "voxreg.rig/1";
inline constexpr const char* kRunSchema = "voxreg.run/1";
inline constexpr const char* kParamsSchema = "voxreg.params/1";
inline constexpr const char* kMetricsSchema = "voxreg.metrics/1";

/// Parses a JSON file. Syntax errors become InputError carrying the
/// parser's line and column.
json load_json(const fs::path& path);
/// Pretty-printed, newline-terminated, keys in insertion order.
void save_json(const fs::path& path, const json& value);

json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const json& j);

json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const json& j);

struct NamedCamera {
  std::string name;
  CameraModel camera;
};

/// Training cameras, optional held-out cameras and the depth bins.
struct CameraRig {
  std::vector<NamedCamera> cameras;
  std::vector<NamedCamera> heldout;
  DepthBins bins;

  std::vector<CameraModel> training_models() const;
};

json camera_to_json(const NamedCamera& camera);
NamedCamera camera_from_json(const json& j);
json rig_to_json(const CameraRig& rig);
CameraRig rig_from_json(const json& j);

/// One experiment: inputs, lattice, render and fit settings, outputs.
struct RunConfig {
  fs::path scene_path;
  fs::path rig_path;
  GridSpec grid;
  int stride = 2;
  int bev_nx = 0;
  int bev_ny = 0;
  double lidar_rate = 1.0;
  FitConfig fit;
  double eval_min_abs_sdf = 0.4;
  int densify_iterations = 8;
  fs::path output_dir = "out";
  std::uint64_t seed = 0;

  /// Checks dims and that the referenced files exist.
  void validate() const;
};

/// Relative paths resolve against `base_dir` (the config file's folder).
RunConfig run_config_from_json(const json& j, const fs::path& base_dir);
json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const fs::path& path);

/// Checkpoint directory: sdf.vxg, semantic.vxg and params.json. Optimizer
/// moments are not stored.
void write_checkpoint(const fs::path& dir, const FitState& state);
FitState read_checkpoint(const fs::path& dir);

json report_to_json(const MiouReport& report);
json metrics_to_json(const FitMetrics& metrics);

}  // namespace voxreg::config
