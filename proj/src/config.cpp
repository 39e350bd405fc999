// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/config.hpp"

#include "voxreg/error.hpp"
#include "voxreg/io.hpp"

#include <fstream>

namespace voxreg::config {

namespace {

// Runs a JSON extraction and turns nlohmann errors into InputError.
template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

void check_schema(const json& j, const char* schema) {
  if (!j.is_object()) throw InputError(std::string("expected a JSON object for ") + schema);
  if (j.contains("schema") && j.at("schema").get<std::string>() != schema) {
    throw InputError("schema '" + j.at("schema").get<std::string>() + "' is not " + schema);
  }
}

Vec3 vec3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw InputError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json bins_json(const DepthBins& bins) { return {{"near", bins.near}, {"far", bins.far}, {"count", bins.count}}; }

DepthBins bins_from(const json& j) {
  DepthBins b;
  b.near = value_or(j, "near", b.near);
  b.far = value_or(j, "far", b.far);
  b.count = value_or(j, "count", b.count);
  b.validate();
  return b;
}

}  // namespace

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path.string() + "': " + e.what());
  }
}

void save_json(const fs::path& path, const json& value) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << value.dump(2) << '\n';
}

json grid_to_json(const GridSpec& grid) {
  return {{"dims", {grid.dims.nx, grid.dims.ny, grid.dims.nz}},
          {"min", vec3_json(grid.extent.min)},
          {"max", vec3_json(grid.extent.max)}};
}

GridSpec grid_from_json(const json& j) {
  return guarded("grid", [&] {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) throw InputError("grid dims must be [nx, ny, nz]");
    GridSpec g;
    g.dims = {dims[0], dims[1], dims[2]};
    g.extent = {vec3(j.at("min")), vec3(j.at("max"))};
    g.validate();
    return g;
  });
}

json scene_to_json(const SceneSpec& scene) {
  json prims = json::array();
  for (const auto& p : scene.primitives) {
    switch (p.kind) {
      case Primitive::Kind::Sphere:
        prims.push_back({{"type", "sphere"}, {"center", vec3_json(p.center)}, {"radius", p.radius}, {"label", p.label}});
        break;
      case Primitive::Kind::Box:
        prims.push_back({{"type", "box"}, {"min", vec3_json(p.min)}, {"max", vec3_json(p.max)}, {"label", p.label}});
        break;
      case Primitive::Kind::Plane:
        prims.push_back({{"type", "plane"}, {"z0", p.z0}, {"label", p.label}});
        break;
    }
  }
  return {{"schema", kSceneSchema},
          {"classes", scene.classes},
          {"free_class", scene.free_class},
          {"far_cap", scene.far_cap},
          {"primitives", prims}};
}

SceneSpec scene_from_json(const json& j) {
  check_schema(j, kSceneSchema);
  return guarded("scene", [&] {
    SceneSpec s;
    s.classes = j.at("classes").get<int>();
    s.free_class = value_or(j, "free_class", s.free_class);
    s.far_cap = value_or(j, "far_cap", s.far_cap);
    for (const auto& p : j.at("primitives")) {
      const auto type = p.at("type").get<std::string>();
      const int label = p.at("label").get<int>();
      if (type == "sphere") {
        s.primitives.push_back(Primitive::sphere(vec3(p.at("center")), p.at("radius").get<double>(), label));
      } else if (type == "box") {
        s.primitives.push_back(Primitive::box(vec3(p.at("min")), vec3(p.at("max")), label));
      } else if (type == "plane") {
        s.primitives.push_back(Primitive::ground_plane(p.at("z0").get<double>(), label));
      } else {
        throw InputError("unknown primitive type '" + type + "'");
      }
    }
    s.validate();
    return s;
  });
}

std::vector<CameraModel> CameraRig::training_models() const {
  std::vector<CameraModel> out;
  for (const auto& c : cameras) out.push_back(c.camera);
  return out;
}

json camera_to_json(const NamedCamera& camera) {
  const Intrinsics& k = camera.camera.intrinsics();
  const RigidPose& pose = camera.camera.pose();
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  }
  return {{"name", camera.name}, {"fx", k.fx},         {"fy", k.fy},   {"cx", k.cx},
          {"cy", k.cy},          {"width", k.width},   {"height", k.height},
          {"rotation", rot},     {"translation", vec3_json(pose.translation)}};
}

NamedCamera camera_from_json(const json& j) {
  return guarded("camera", [&] {
    Intrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    const auto rot = j.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) throw InputError("camera rotation must have 9 row-major entries");
    RigidPose pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[3 * r + c];
    }
    pose.translation = vec3(j.at("translation"));
    return NamedCamera{value_or<std::string>(j, "name", ""), CameraModel(k, pose)};
  });
}

json rig_to_json(const CameraRig& rig) {
  json cams = json::array();
  for (const auto& c : rig.cameras) cams.push_back(camera_to_json(c));
  json held = json::array();
  for (const auto& c : rig.heldout) held.push_back(camera_to_json(c));
  return {{"schema", kRigSchema}, {"depth_bins", bins_json(rig.bins)}, {"cameras", cams}, {"heldout", held}};
}

CameraRig rig_from_json(const json& j) {
  check_schema(j, kRigSchema);
  return guarded("rig", [&] {
    CameraRig rig;
    if (j.contains("depth_bins")) rig.bins = bins_from(j.at("depth_bins"));
    for (const auto& c : j.at("cameras")) rig.cameras.push_back(camera_from_json(c));
    if (j.contains("heldout")) {
      for (const auto& c : j.at("heldout")) rig.heldout.push_back(camera_from_json(c));
    }
    if (rig.cameras.empty()) throw InputError("rig has no cameras");
    return rig;
  });
}

void RunConfig::validate() const {
  grid.validate();
  fit.validate();
  if (stride <= 0) throw InputError("stride must be positive");
  if (bev_nx < 0 || bev_ny < 0) throw InputError("BEV resolution must be >= 0");
  if (!(lidar_rate > 0.0 && lidar_rate <= 1.0)) throw InputError("lidar_rate must lie in (0, 1]");
  if (densify_iterations < 0) throw InputError("densify_iterations must be >= 0");
  for (const auto& p : {scene_path, rig_path}) {
    if (!fs::exists(p)) throw InputError("referenced file '" + p.string() + "' does not exist");
  }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  check_schema(j, kRunSchema);
  return guarded("run config", [&] {
    RunConfig rc;
    rc.scene_path = resolve(base_dir, j.at("scene").get<std::string>());
    rc.rig_path = resolve(base_dir, j.at("rig").get<std::string>());
    rc.grid = grid_from_json(j.at("grid"));
    rc.seed = value_or<std::uint64_t>(j, "seed", rc.seed);
    rc.lidar_rate = value_or(j, "lidar_rate", rc.lidar_rate);
    rc.output_dir = resolve(base_dir, value_or<std::string>(j, "output", rc.output_dir.string()));
    if (j.contains("render")) {
      const json& r = j.at("render");
      rc.stride = value_or(r, "stride", rc.stride);
      rc.bev_nx = value_or(r, "bev_nx", rc.bev_nx);
      rc.bev_ny = value_or(r, "bev_ny", rc.bev_ny);
    }
    if (j.contains("fit")) {
      const json& f = j.at("fit");
      FitConfig& fc = rc.fit;
      fc.steps = value_or(f, "steps", fc.steps);
      fc.adam.lr = value_or(f, "lr", fc.adam.lr);
      fc.adam.weight_decay = value_or(f, "weight_decay", fc.adam.weight_decay);
      fc.adam.beta1 = value_or(f, "beta1", fc.adam.beta1);
      fc.adam.beta2 = value_or(f, "beta2", fc.adam.beta2);
      fc.adam.eps = value_or(f, "eps", fc.adam.eps);
      fc.weights.depth = value_or(f, "lambda_depth", fc.weights.depth);
      fc.weights.semantic = value_or(f, "lambda_semantic", fc.weights.semantic);
      if (!value_or(f, "depth_loss", true)) fc.weights.depth = 0.0;
      if (!value_or(f, "sem_loss", true)) fc.weights.semantic = 0.0;
      fc.camera_supervision = value_or(f, "camera_sup", fc.camera_supervision);
      fc.bev_supervision = value_or(f, "bev_sup", fc.bev_supervision);
      fc.loss.smooth_l1_transition = value_or(f, "smooth_l1_transition", fc.loss.smooth_l1_transition);
      fc.loss.renormalize_semantic = value_or(f, "renormalize_semantic", fc.loss.renormalize_semantic);
      fc.learn_laplace = value_or(f, "learn_laplace", fc.learn_laplace);
      fc.init_alpha = value_or(f, "alpha", fc.init_alpha);
      fc.init_beta = value_or(f, "beta", fc.init_beta);
    }
    rc.fit.seed = rc.seed;
    if (j.contains("eval")) rc.eval_min_abs_sdf = value_or(j.at("eval"), "min_abs_sdf", rc.eval_min_abs_sdf);
    if (j.contains("densify")) rc.densify_iterations = value_or(j.at("densify"), "iterations", rc.densify_iterations);
    return rc;
  });
}

json run_config_to_json(const RunConfig& rc) {
  const FitConfig& f = rc.fit;
  return {{"schema", kRunSchema},
          {"scene", rc.scene_path.string()},
          {"rig", rc.rig_path.string()},
          {"grid", grid_to_json(rc.grid)},
          {"seed", rc.seed},
          {"lidar_rate", rc.lidar_rate},
          {"output", rc.output_dir.string()},
          {"render", {{"stride", rc.stride}, {"bev_nx", rc.bev_nx}, {"bev_ny", rc.bev_ny}}},
          {"fit",
           {{"steps", f.steps},
            {"lr", f.adam.lr},
            {"weight_decay", f.adam.weight_decay},
            {"beta1", f.adam.beta1},
            {"beta2", f.adam.beta2},
            {"eps", f.adam.eps},
            {"lambda_depth", f.weights.depth},
            {"lambda_semantic", f.weights.semantic},
            {"camera_sup", f.camera_supervision},
            {"bev_sup", f.bev_supervision},
            {"smooth_l1_transition", f.loss.smooth_l1_transition},
            {"renormalize_semantic", f.loss.renormalize_semantic},
            {"learn_laplace", f.learn_laplace},
            {"alpha", f.init_alpha},
            {"beta", f.init_beta}}},
          {"eval", {{"min_abs_sdf", rc.eval_min_abs_sdf}}},
          {"densify", {{"iterations", rc.densify_iterations}}}};
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(load_json(path), path.parent_path());
}

void write_checkpoint(const fs::path& dir, const FitState& state) {
  fs::create_directories(dir);
  io::write_vxg(dir / "sdf.vxg", state.sdf);
  io::write_vxg(dir / "semantic.vxg", state.semantic);
  save_json(dir / "params.json", {{"schema", kParamsSchema},
                                  {"step", state.step},
                                  {"log_alpha", state.laplace.log_alpha},
                                  {"log_beta", state.laplace.log_beta},
                                  {"alpha", state.laplace.alpha()},
                                  {"beta", state.laplace.beta()}});
}

FitState read_checkpoint(const fs::path& dir) {
  const json params = load_json(dir / "params.json");
  check_schema(params, kParamsSchema);
  VoxelGrid sdf = io::read_vxg(dir / "sdf.vxg");
  VoxelGrid semantic = io::read_vxg(dir / "semantic.vxg");
  if (sdf.channels() != 1 || sdf.spec() != semantic.spec()) throw ShapeError("checkpoint grids do not match");
  return guarded("checkpoint params", [&] {
    LaplaceParams laplace{params.at("log_alpha").get<double>(), params.at("log_beta").get<double>()};
    FitState state = FitState::initial(sdf.spec(), semantic.channels(), laplace);
    state.sdf = std::move(sdf);
    state.semantic = std::move(semantic);
    state.step = params.at("step").get<long>();
    return state;
  });
}

json report_to_json(const MiouReport& report) {
  json per_class = json::array();
  json counts = json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back(c.iou ? json(*c.iou) : json(nullptr));
    counts.push_back({{"intersection", c.intersection},
                      {"union", c.union_count},
                      {"predicted", c.predicted},
                      {"ground_truth", c.ground_truth}});
  }
  return {{"per_class_iou", per_class},
          {"miou", report.miou},
          {"counted_classes", report.counted_classes},
          {"evaluated_voxels", report.evaluated_voxels},
          {"counts", counts}};
}

json metrics_to_json(const FitMetrics& m) {
  json j = report_to_json(m.occupancy);
  j["schema"] = kMetricsSchema;
  j["heldout_depth_mae"] = m.depth_mae;
  j["heldout_depth_pixels"] = m.depth_pixels;
  j["bev_height_mae"] = m.bev_height_mae;
  j["bev_pixels"] = m.bev_pixels;
  return j;
}

}  // namespace voxreg::config
