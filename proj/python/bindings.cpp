#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <spdlog/spdlog.h>

#include "blurpose/blur.hpp"
#include "blurpose/data.hpp"
#include "blurpose/eval.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/io.hpp"
#include "blurpose/pipeline.hpp"
#include "blurpose/solver.hpp"

namespace py = pybind11;
using namespace blurpose;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) array to Image.
Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DataError("image arrays must be 2-D or 3-D");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image im(h, w, c);
  std::copy(a.data(), a.data() + a.size(), im.data.begin());
  return im;
}

Array from_image(const Image& im) {
  std::vector<py::ssize_t> shape{im.height, im.width};
  if (im.channels != 1) shape.push_back(im.channels);
  Array out(shape);
  std::copy(im.data.begin(), im.data.end(), out.mutable_data());
  return out;
}

std::vector<Image> to_images(const std::vector<Array>& arrays) {
  std::vector<Image> out;
  for (const auto& a : arrays) out.push_back(to_image(a));
  return out;
}

// (F, J, 3) array to a joint track.
JointTrack to_track(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DataError("joint arrays must have shape (frames, joints, 3)");
  JointTrack t(static_cast<size_t>(a.shape(0)), std::vector<Vec3>(static_cast<size_t>(a.shape(1))));
  auto r = a.unchecked<3>();
  for (py::ssize_t f = 0; f < a.shape(0); ++f)
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      t[static_cast<size_t>(f)][static_cast<size_t>(j)] = Vec3(r(f, j, 0), r(f, j, 1), r(f, j, 2));
  return t;
}

Array from_track(const JointTrack& t) {
  const py::ssize_t f = static_cast<py::ssize_t>(t.size()), j = t.empty() ? 0 : static_cast<py::ssize_t>(t[0].size());
  Array out({f, j, py::ssize_t{3}});
  auto w = out.mutable_unchecked<3>();
  for (py::ssize_t a = 0; a < f; ++a)
    for (py::ssize_t b = 0; b < j; ++b)
      for (int k = 0; k < 3; ++k) w(a, b, k) = t[static_cast<size_t>(a)][static_cast<size_t>(b)][k];
  return out;
}

const BodyModel& humanoid() {
  static const BodyModel body = make_humanoid();
  return body;
}

py::dict scene_dict(const SyntheticScene& s) {
  py::dict d;
  d["image"] = from_image(s.scene.image);
  d["background"] = from_image(s.scene.background);
  d["alpha_in"] = from_image(s.scene.alpha_in);
  d["texture"] = from_image(s.texture);
  d["beta"] = std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size());
  d["motion"] = motion_to_json(s.motion).dump();
  d["blur_rate"] = s.blur_rate;
  d["bucket"] = s.bucket;
  d["seed"] = s.seed;
  d["joints"] = from_track(s.gt_joints);
  py::list sils;
  for (const Image& m : s.gt_silhouettes) sils.append(from_image(m));
  d["silhouettes"] = sils;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Motion-blurred body pose recovery (C++ core)";
  spdlog::set_level(spdlog::level::warn);

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("build_id", &build_id);

  py::class_<GradientCheckReport>(m, "GradientCheckReport")
      .def_readonly("max_relative_error", &GradientCheckReport::max_relative_error)
      .def_readonly("max_absolute_error", &GradientCheckReport::max_absolute_error)
      .def_readonly("worst_parameter", &GradientCheckReport::worst_parameter)
      .def_readonly("worst_group", &GradientCheckReport::worst_group)
      .def_readonly("parameter_count", &GradientCheckReport::parameter_count)
      .def_readonly("passed", &GradientCheckReport::pass);

  m.def(
      "check_gradients",
      [](std::uint64_t seed, bool multi_frame, bool break_adjoint) {
        GradientCheckOptions o;
        o.seed = seed;
        o.multi_frame = multi_frame;
        o.break_adjoint = break_adjoint;
        py::gil_scoped_release release;
        return check_gradients(o);
      },
      py::arg("seed") = 0, py::arg("multi_frame") = false, py::arg("break_adjoint") = false);

  m.def("mpjpe", [](const Array& pred, const Array& gt) { return mpjpe(to_track(pred), to_track(gt)); });
  m.def("pa_mpjpe", [](const Array& pred, const Array& gt) { return pa_mpjpe(to_track(pred), to_track(gt)); });
  m.def("mask_iou", [](const Array& a, const Array& b) { return mask_iou(to_image(a), to_image(b)); });
  m.def("blur_rate", [](const std::vector<Array>& masks) { return blur_rate(to_images(masks)); });
  m.def("bucket_label", [](double rate) { return bucket_label(rate); });
  m.def("compose", [](const std::vector<Array>& silhouettes, const std::vector<Array>& appearances,
                      const Array& background) {
    const Composite c = compose(to_images(silhouettes), to_images(appearances), to_image(background));
    return py::make_tuple(from_image(c.image), from_image(c.alpha));
  });
  m.def("reverse_motion", [](const std::string& motion) {
    return motion_to_json(reverse(motion_from_json(json::parse(motion)))).dump();
  });

  m.def(
      "generate_scene",
      [](std::uint64_t seed, double lo, double hi, const std::string& config) {
        GenerationConfig g = generation_from_json(json::parse(config));
        g.band = {lo, hi};
        g.validate();
        SyntheticScene s;
        {
          py::gil_scoped_release release;
          s = generate_random_scene(seed, humanoid(), g);
        }
        return scene_dict(s);
      },
      py::arg("seed") = 0, py::arg("lo") = 0.2, py::arg("hi") = 0.3, py::arg("config") = "{}");
  m.def("load_scene", [](const std::string& dir) { return scene_dict(load_scene(dir)); });
  m.def(
      "save_generated_scene",
      [](const std::string& dir, std::uint64_t seed, double lo, double hi) {
        GenerationConfig g;
        g.band = {lo, hi};
        py::gil_scoped_release release;
        save_scene(dir, generate_random_scene(seed, humanoid(), g));
      },
      py::arg("dir"), py::arg("seed") = 0, py::arg("lo") = 0.2, py::arg("hi") = 0.3);

  m.def(
      "render_motion",
      [](const std::string& motion, const std::vector<double>& beta, const std::string& camera,
         const Array& background, int subframes) {
        const BodyModel& body = humanoid();
        const MotionCoeffs c = motion_from_json(json::parse(motion));
        const VecX b = Eigen::Map<const VecX>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        const FrameRender fr = render_frame(body, shape_body(body, b), body.mesh.texture, c, {subframes, 0.0},
                                            camera_from_json(json::parse(camera)), to_image(background));
        py::list sils;
        for (const Image& s : fr.silhouettes()) sils.append(from_image(s));
        return py::make_tuple(from_image(fr.composite.image), sils);
      },
      py::arg("motion"), py::arg("beta"), py::arg("camera"), py::arg("background"), py::arg("subframes") = 8);

  // Solves one scene directory; config is a JSON document of SolveConfig
  // fields. Returns a JSON string with the final report and parameters.
  m.def(
      "solve_scene",
      [](const std::string& dir, const std::string& config) {
        const SolveConfig cfg = config_from_json(json::parse(config));
        const SyntheticScene gt = load_scene(dir);
        json out;
        {
          py::gil_scoped_release release;
          const BodyModel& body = humanoid();
          MotionCoeffs init = cfg.init == InitMode::oracle
                                  ? oracle_init(gt.motion, cfg, oracle_seed(cfg.seed, gt.seed, gt.frame_index))
                                  : silhouette_init(body, gt.scene,
                                                    init_from_pose(PoseSample::identity(body.joint_count()),
                                                                   cfg.degree, body.joint_count()),
                                                    cfg);
          BlurScene scene = gt.scene;
          scene.grid = cfg.grid();
          const SolveState start = initial_state(body, std::span<const BlurScene>(&scene, 1), {init});
          const SolveResult r = solve(body, std::span<const BlurScene>(&scene, 1), start, cfg);
          const SceneResult before = score_scene(body, gt, start.beta, start.motions[0], cfg.sigma);
          const SceneResult after = score_scene(body, gt, r.state.beta, r.state.motions[0], cfg.sigma);
          out["initial"] = report_to_json(r.trajectory.front());
          out["final"] = report_to_json(r.trajectory.back());
          out["motion"] = motion_to_json(r.state.motions[0]);
          out["beta"] = std::vector<double>(r.state.beta.data(), r.state.beta.data() + r.state.beta.size());
          out["mpjpe"] = {before.mpjpe, after.mpjpe};
          out["iou"] = {before.iou, after.iou};
        }
        return out.dump();
      },
      py::arg("dir"), py::arg("config") = "{}");
}
