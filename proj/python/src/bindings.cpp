// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/config.hpp"
#include "voxreg/density.hpp"
#include "voxreg/error.hpp"
#include "voxreg/gradcheck.hpp"
#include "voxreg/io.hpp"
#include "voxreg/losses.hpp"
#include "voxreg/optimizer.hpp"
#include "voxreg/render.hpp"
#include "voxreg/scene.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace voxreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

Vec3 to_vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

// (C, nz, ny, nx) array plus extent -> VoxelGrid.
VoxelGrid to_grid(const Array& data, const std::array<double, 3>& lo, const std::array<double, 3>& hi) {
  if (data.ndim() != 4) throw ShapeError("grid arrays must have shape (C, nz, ny, nx)");
  GridSpec spec;
  spec.dims = {int(data.shape(3)), int(data.shape(2)), int(data.shape(1))};
  spec.extent.min = to_vec3(lo);
  spec.extent.max = to_vec3(hi);
  spec.validate();
  VoxelGrid g(spec, int(data.shape(0)));
  std::memcpy(g.data().data(), data.data(), g.data().size() * sizeof(double));
  return g;
}

Array grid_array(const VoxelGrid& g) {
  const auto& d = g.dims();
  return to_array({g.data().begin(), g.data().end()}, {g.channels(), d.nz, d.ny, d.nx});
}

py::dict render_dict(const RenderOutput& r) {
  py::dict out;
  out["depth"] = to_array(r.depth, {r.height, r.width});
  out["weight_sum"] = to_array(r.weight_sum, {r.height, r.width});
  out["semantic"] = to_array(r.semantic, {r.height, r.width, r.classes});
  return out;
}

// Round-trips through Python's json so the camera uses the rig schema.
config::json to_json(const py::object& o) {
  return config::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object from_json(const config::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

CameraModel camera_from_dict(const py::dict& d) { return config::camera_from_json(to_json(d)).camera; }

py::dict loss_dict(const LossBreakdown& l) {
  py::dict d;
  d["L_dep_cam"] = l.depth_camera;
  d["L_dep_bev"] = l.depth_bev;
  d["L_sem_cam"] = l.semantic_camera;
  d["L_sem_bev"] = l.semantic_bev;
  d["total"] = l.total;
  return d;
}

py::dict fit_from_config(const std::string& path, std::optional<int> steps, int threads, bool camera, bool bev) {
  config::RunConfig rc = config::load_run_config(path);
  if (steps) rc.fit.steps = *steps;
  rc.fit.threads = threads;
  rc.fit.camera_supervision = camera;
  rc.fit.bev_supervision = bev;
  rc.validate();
  rc.fit.validate();
  const SceneSpec scene = config::scene_from_json(config::load_json(rc.scene_path));
  const config::CameraRig rig = config::rig_from_json(config::load_json(rc.rig_path));
  SupervisionSpec s;
  s.grid = rc.grid;
  s.bins = rig.bins;
  s.stride = rc.stride;
  s.bev_nx = rc.bev_nx;
  s.bev_ny = rc.bev_ny;
  s.lidar_rate = rc.lidar_rate;
  s.seed = rc.seed;
  const auto bundle = make_supervision(scene, rig.training_models(), s);
  const auto problem =
      FitProblem::build(rc.grid, scene.classes, scene.free_class, rig.bins, rc.stride, rig.training_models(), bundle);
  const CameraModel& held = rig.heldout.empty() ? rig.cameras.front().camera : rig.heldout.front().camera;
  const EvalSetup setup{scene, held, rig.bins, rc.stride, rc.eval_min_abs_sdf, threads};
  const FitState init = FitState::initial(rc.grid, scene.classes, rc.fit.initial_laplace());
  const FitMetrics before = evaluate_fit(init, problem, setup);
  FitResult result;
  {
    py::gil_scoped_release release;
    result = fit(rc.fit, problem, init);
  }
  const FitMetrics after = evaluate_fit(result.state, problem, setup);
  py::list log;
  for (const auto& l : result.log) log.append(loss_dict(l));
  py::dict out;
  out["log"] = log;
  out["baseline"] = from_json(config::metrics_to_json(before));
  out["metrics"] = from_json(config::metrics_to_json(after));
  out["sdf"] = grid_array(result.state.sdf);
  out["semantic"] = grid_array(result.state.semantic);
  out["alpha"] = result.state.laplace.alpha();
  out["beta"] = result.state.laplace.beta();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differentiable voxel rendering and regulation core";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "psi_beta",
      [](const Array& s, double alpha, double beta) {
        const auto p = LaplaceParams::from_scales(alpha, beta);
        Array out(std::vector<py::ssize_t>(s.shape(), s.shape() + s.ndim()));
        for (py::ssize_t i = 0; i < s.size(); ++i) out.mutable_data()[i] = psi_beta(s.data()[i], p);
        return out;
      },
      py::arg("s"), py::arg("alpha") = 10.0, py::arg("beta") = 0.1, "Laplace-CDF density alpha * Psi_beta(s).");

  m.def(
      "composite",
      [](const Array& t, const Array& sigma, std::optional<Array> logits, std::optional<double> last_delta) {
        const auto tv = to_vector(t), sv = to_vector(sigma);
        std::vector<double> lv;
        int classes = 0;
        if (logits) {
          if (logits->ndim() != 2) throw ShapeError("logits must have shape (n, classes)");
          lv = to_vector(*logits);
          classes = int(logits->shape(1));
        }
        const auto r = composite({tv, sv, lv, {}, classes, last_delta});
        py::dict out;
        out["depth"] = r.depth;
        out["weight_sum"] = r.weight_sum;
        out["semantic"] = to_array(r.semantic, {py::ssize_t(r.semantic.size())});
        out["weights"] = to_array(r.weights, {py::ssize_t(r.weights.size())});
        out["transmittance"] = to_array(r.transmittance, {py::ssize_t(r.transmittance.size())});
        return out;
      },
      py::arg("t"), py::arg("sigma"), py::arg("logits") = py::none(), py::arg("last_delta") = py::none(),
      "Composite one ray: weights, depth D, semantic S and weight sum W.");

  m.def(
      "grid_sample",
      [](const Array& grid, std::array<double, 3> lo, std::array<double, 3> hi, const Array& points) {
        const VoxelGrid g = to_grid(grid, lo, hi);
        if (points.ndim() != 2 || points.shape(1) != 3) throw ShapeError("points must have shape (N, 3)");
        const py::ssize_t n = points.shape(0);
        std::vector<double> out(std::size_t(n) * g.channels());
        for (py::ssize_t i = 0; i < n; ++i) {
          const double* p = points.data() + 3 * i;
          grid_sample(g, Vec3(p[0], p[1], p[2]), std::span<double>(out.data() + i * g.channels(), g.channels()));
        }
        return to_array(out, {n, g.channels()});
      },
      py::arg("grid"), py::arg("min"), py::arg("max"), py::arg("points"), "Trilinear, zero-padded sampling.");

  m.def(
      "render_camera",
      [](const Array& sdf, const Array& semantic, std::array<double, 3> lo, std::array<double, 3> hi,
         const py::dict& camera, double alpha, double beta, double near, double far, int bins, int stride,
         int threads) {
        const VoxelGrid s = to_grid(sdf, lo, hi), sem = to_grid(semantic, lo, hi);
        const VoxelGrid density = density_volume_from_sdf(s, LaplaceParams::from_scales(alpha, beta));
        const DepthBins db{near, far, bins};
        db.validate();
        return render_dict(render_camera(density, sem, camera_from_dict(camera), db, stride, threads));
      },
      py::arg("sdf"), py::arg("semantic"), py::arg("min"), py::arg("max"), py::arg("camera"), py::arg("alpha") = 10.0,
      py::arg("beta") = 0.1, py::arg("near") = 2.0, py::arg("far") = 70.4, py::arg("bins") = 86, py::arg("stride") = 1,
      py::arg("threads") = 1, "Render depth, weight sum and semantic logits for a camera dict.");

  m.def(
      "render_bev",
      [](const Array& sdf, const Array& semantic, std::array<double, 3> lo, std::array<double, 3> hi, double alpha,
         double beta, int nx, int ny, std::optional<int> nz_samples, int threads) {
        const VoxelGrid s = to_grid(sdf, lo, hi), sem = to_grid(semantic, lo, hi);
        const VoxelGrid density = density_volume_from_sdf(s, LaplaceParams::from_scales(alpha, beta));
        return render_dict(render_bev(density, sem, nx, ny, nz_samples.value_or(s.dims().nz), threads));
      },
      py::arg("sdf"), py::arg("semantic"), py::arg("min"), py::arg("max"), py::arg("alpha") = 10.0,
      py::arg("beta") = 0.1, py::arg("nx") = 0, py::arg("ny") = 0, py::arg("nz_samples") = py::none(),
      py::arg("threads") = 1, "Top-down render; depth holds the expected surface height.");

  m.def(
      "lovasz_softmax",
      [](const Array& probs, const std::vector<int>& labels) {
        if (probs.ndim() != 2) throw ShapeError("probs must have shape (pixels, classes)");
        const auto pv = to_vector(probs);
        const ClassLoss r = lovasz_softmax(pv, labels, int(probs.shape(1)));
        return py::make_tuple(r.loss, to_array(r.grad, {probs.shape(0), probs.shape(1)}));
      },
      py::arg("probs"), py::arg("labels"), "Lovasz-softmax loss and its gradient; label -1 is ignored.");

  m.def(
      "read_vxg",
      [](const std::string& path) {
        const VoxelGrid g = io::read_vxg(path);
        const auto& e = g.extent();
        return py::make_tuple(grid_array(g), std::array<double, 3>{e.min.x(), e.min.y(), e.min.z()},
                              std::array<double, 3>{e.max.x(), e.max.y(), e.max.z()});
      },
      py::arg("path"), "Read a VXG1 grid as (data, min, max).");

  m.def(
      "write_vxg",
      [](const std::string& path, const Array& data, std::array<double, 3> lo, std::array<double, 3> hi) {
        io::write_vxg(path, to_grid(data, lo, hi));
      },
      py::arg("path"), py::arg("data"), py::arg("min"), py::arg("max"));

  m.def(
      "grad_check",
      [](std::uint64_t seed) {
        gradcheck::Options o;
        o.seed = seed;
        py::list out;
        for (const auto& r : gradcheck::run_all(o)) {
          py::dict d;
          d["name"] = r.name;
          d["max_rel_error"] = r.max_rel_error;
          d["threshold"] = r.threshold;
          d["checks"] = r.checks;
          d["passed"] = r.passed();
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, "Run the finite-difference gradient suites.");

  m.def("fit", &fit_from_config, py::arg("config"), py::arg("steps") = py::none(), py::arg("threads") = 1,
        py::arg("camera_supervision") = true, py::arg("bev_supervision") = true,
        "Fit voxel grids to the supervision described by a run config JSON.");
}
