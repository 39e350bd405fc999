// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/config.hpp"
#include "voxreg/error.hpp"
#include "voxreg/reference.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace voxreg;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(VOXREG_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "voxreg_config_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, MalformedJsonReportsLine) {
  const auto p = scratch("bad.json");
  {
    std::ofstream out(p);
    out << "{\n  \"a\": 1,\n  \"b\": oops\n}\n";
  }
  try {
    config::load_json(p);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(config::load_json(scratch("absent.json")), InputError);
}

TEST(Config, CheckedInFilesMatchReference) {
  EXPECT_EQ(config::load_json(kConfigs / "reference_scene.json"), config::scene_to_json(reference::scene()));
  EXPECT_EQ(config::load_json(kConfigs / "reference_rig.json"), config::rig_to_json(reference::rig()));
  const auto run = config::load_run_config(kConfigs / "reference.json");
  EXPECT_EQ(run.grid, reference::grid());
  EXPECT_EQ(run.fit.steps, 2000);
  EXPECT_EQ(run.fit.adam.lr, 2e-4);
  EXPECT_EQ(run.fit.init_alpha, 10.0);
  EXPECT_EQ(run.fit.init_beta, 0.1);
  EXPECT_TRUE(run.scene_path.is_absolute());
}

TEST(Config, RigRoundTrip) {
  const auto rig = reference::rig();
  const auto back = config::rig_from_json(config::rig_to_json(rig));
  ASSERT_EQ(back.cameras.size(), rig.cameras.size());
  ASSERT_EQ(back.heldout.size(), rig.heldout.size());
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    EXPECT_EQ(back.cameras[i].name, rig.cameras[i].name);
    EXPECT_EQ(back.cameras[i].camera.pose().rotation, rig.cameras[i].camera.pose().rotation);
    EXPECT_EQ(back.cameras[i].camera.pose().translation, rig.cameras[i].camera.pose().translation);
  }
  EXPECT_EQ(back.bins.count, 86);
}

TEST(Config, SceneRejectsUnknownPrimitive) {
  auto j = config::scene_to_json(reference::scene());
  j["primitives"][0]["type"] = "torus";
  EXPECT_THROW(config::scene_from_json(j), InputError);
  j = config::scene_to_json(reference::scene());
  j["schema"] = "voxreg.scene/9";
  EXPECT_THROW(config::scene_from_json(j), InputError);
}

TEST(Config, RunConfigRoundTripAndValidation) {
  const auto run = config::load_run_config(kConfigs / "reference.json");
  const auto back = config::run_config_from_json(config::run_config_to_json(run), kConfigs);
  EXPECT_EQ(back.grid, run.grid);
  EXPECT_EQ(back.stride, run.stride);
  EXPECT_EQ(back.fit.camera_supervision, run.fit.camera_supervision);
  EXPECT_EQ(back.scene_path, run.scene_path);
  auto j = config::run_config_to_json(run);
  j["render"]["stride"] = 0;
  EXPECT_THROW(config::run_config_from_json(j, kConfigs).validate(), InputError);
  j = config::run_config_to_json(run);
  j["scene"] = "nowhere.json";
  EXPECT_THROW(config::run_config_from_json(j, kConfigs).validate(), InputError);
}

TEST(Config, CheckpointRoundTrip) {
  FitState s = FitState::initial(reference::grid(), reference::kClasses, LaplaceParams::from_scales(7.5, 0.2));
  s.sdf.data()[5] = 0.25;
  s.semantic.data()[9] = -1.5;
  s.step = 42;
  const auto dir = scratch("ckpt");
  config::write_checkpoint(dir, s);
  const auto r = config::read_checkpoint(dir);
  EXPECT_EQ(r.step, 42);
  EXPECT_EQ(r.sdf.data()[5], 0.25);
  EXPECT_EQ(r.semantic.data()[9], -1.5);
  EXPECT_NEAR(r.laplace.alpha(), 7.5, 1e-12);
  EXPECT_NEAR(r.laplace.beta(), 0.2, 1e-12);
  EXPECT_NO_THROW(r.validate());
}
