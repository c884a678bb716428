// Python bindings for scenes, rendering, transport queries, conversion,
// optimization and validation.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gaussrt/convert.h"
#include "gaussrt/integrator.h"
#include "gaussrt/io.h"
#include "gaussrt/optimize.h"
#include "gaussrt/validate.h"

namespace py = pybind11;
using namespace gaussrt;

namespace {

using Triple = std::array<double, 3>;
using Quad   = std::array<double, 4>;

vec3   to_vec(const Triple& a) { return {a[0], a[1], a[2]}; }
Triple from_vec(const vec3& v) { return {v.x, v.y, v.z}; }
quat   to_quat(const Quad& a) { return {a[0], a[1], a[2], a[3]}; }
Quad   from_quat(const quat& q) { return {q.w, q.x, q.y, q.z}; }

template <typename T>
py::array_t<T> image_array(const std::vector<T>& data, int height, int width, int channels) {
  std::vector<py::ssize_t> shape = {height, width};
  if (channels > 1) shape.push_back(channels);
  py::array_t<T> out(shape);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

Ray make_ray(const Triple& origin, const Triple& dir, double t0, double t1) {
  Ray ray{to_vec(origin), normalize(to_vec(dir))};
  ray.t0 = t0, ray.t1 = t1;
  return ray;
}

RenderMode parse_mode(const std::string& mode) {
  if (mode == "full") return RenderMode::full;
  if (mode == "direct") return RenderMode::direct;
  if (mode == "transmittance") return RenderMode::transmittance;
  if (mode == "exp-baseline") return RenderMode::exp_baseline;
  throw std::invalid_argument("unknown render mode " + mode);
}

}  // namespace

PYBIND11_MODULE(_gaussrt, m) {
  m.doc() = "Linear-transmittance Gaussian primitive renderer";

  py::register_exception<io_error>(m, "IOError", PyExc_OSError);
  py::register_exception<schema_error>(m, "SchemaError", PyExc_ValueError);

  py::class_<GaussianPrimitive>(m, "Gaussian")
      .def(py::init([](const Triple& mu, const Quad& rot, const Triple& scales,
                        double magnitude, int material) {
        return GaussianPrimitive{to_vec(mu), to_quat(rot), to_vec(scales), magnitude, material};
      }),
          py::arg("mu") = Triple{0, 0, 0}, py::arg("rot") = Quad{1, 0, 0, 0},
          py::arg("scales") = Triple{1, 1, 1}, py::arg("magnitude") = 1.0,
          py::arg("material") = 0)
      .def_property("mu", [](const GaussianPrimitive& g) { return from_vec(g.mu); },
          [](GaussianPrimitive& g, const Triple& v) { g.mu = to_vec(v); })
      .def_property("rot", [](const GaussianPrimitive& g) { return from_quat(g.rot); },
          [](GaussianPrimitive& g, const Quad& q) { g.rot = to_quat(q); })
      .def_property("scales", [](const GaussianPrimitive& g) { return from_vec(g.scales); },
          [](GaussianPrimitive& g, const Triple& v) { g.scales = to_vec(v); })
      .def_readwrite("magnitude", &GaussianPrimitive::magnitude)
      .def_readwrite("material", &GaussianPrimitive::material_id)
      .def("__repr__", [](const GaussianPrimitive& g) {
        return "Gaussian(mu=(" + std::to_string(g.mu.x) + ", " + std::to_string(g.mu.y) +
               ", " + std::to_string(g.mu.z) + "), magnitude=" + std::to_string(g.magnitude) + ")";
      });

  py::class_<Camera>(m, "Camera")
      .def(py::init([](const Triple& position, const Triple& look_at, const Triple& up,
                        double fov) {
        return Camera{to_vec(position), to_vec(look_at), to_vec(up), fov};
      }),
          py::arg("position") = Triple{0, 0, 5}, py::arg("look_at") = Triple{0, 0, 0},
          py::arg("up") = Triple{0, 1, 0}, py::arg("fov") = 40.0)
      .def_property("position", [](const Camera& c) { return from_vec(c.position); },
          [](Camera& c, const Triple& v) { c.position = to_vec(v); })
      .def_property("look_at", [](const Camera& c) { return from_vec(c.look_at); },
          [](Camera& c, const Triple& v) { c.look_at = to_vec(v); })
      .def_readwrite("fov", &Camera::fov);

  // Scenes are rebuilt whenever primitives are replaced from Python.
  py::class_<Scene>(m, "Scene")
      .def_property("primitives", [](const Scene& s) { return s.primitives; },
          [](Scene& s, const std::vector<GaussianPrimitive>& prims) {
            s.primitives = prims;
            build_scene(s);
          })
      .def_property_readonly("material_count", [](const Scene& s) { return s.materials.size(); })
      .def_readwrite("camera", &Scene::camera)
      .def_property("background", [](const Scene& s) { return from_vec(s.environment.constant); },
          [](Scene& s, const Triple& v) { s.environment.constant = to_vec(v); })
      .def("to_json", [](const Scene& s) { return scene_to_json(s); })
      .def("__len__", [](const Scene& s) { return s.primitives.size(); });

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("save_scene", &save_scene, py::arg("path"), py::arg("scene"));
  m.def("scene_from_json", &scene_from_json, py::arg("text"), py::arg("base_dir") = ".");
  m.def("random_gaussian_scene", &random_gaussian_scene, py::arg("count"), py::arg("seed") = 0);
  m.def("white_furnace_scene", &white_furnace_scene, py::arg("count"), py::arg("seed") = 0);

  m.def(
      "render",
      [](const Scene& scene, int width, int height, int spp, int max_bounces, uint64_t seed,
          const std::string& mode, bool mis, int threads) {
        RenderConfig config;
        config.width = width, config.height = height, config.spp = spp;
        config.max_bounces = max_bounces, config.seed = seed;
        config.mode = parse_mode(mode), config.mis = mis, config.threads = threads;
        Film film;
        {
          py::gil_scoped_release release;
          film = render(scene, config);
        }
        return image_array(film.image(), height, width, 3);
      },
      py::arg("scene"), py::arg("width") = 64, py::arg("height") = 64, py::arg("spp") = 16,
      py::arg("max_bounces") = 8, py::arg("seed") = 0, py::arg("mode") = "full",
      py::arg("mis") = true, py::arg("threads") = 0,
      "Mean radiance as a float32 array of shape (height, width, 3).");

  m.def(
      "render_transmittance",
      [](const Scene& scene, std::optional<Camera> camera, int width, int height) {
        auto t = render_transmittance(scene, camera.value_or(scene.camera), width, height, false);
        return image_array(t, height, width, 1);
      },
      py::arg("scene"), py::arg("camera") = py::none(), py::arg("width") = 64,
      py::arg("height") = 64, "Transmittance through pixel centers, shape (height, width).");

  m.def(
      "relaxed_cdf_image",
      [](const Scene& scene, std::optional<Camera> camera, int width, int height) {
        auto c = relaxed_cdf_image(scene, camera.value_or(scene.camera), width, height, false);
        return image_array(c, height, width, 1);
      },
      py::arg("scene"), py::arg("camera") = py::none(), py::arg("width") = 64,
      py::arg("height") = 64, "Un-clamped accumulated CDF through pixel centers.");

  m.def(
      "ray_integral",
      [](const GaussianPrimitive& g, const Triple& origin, const Triple& dir, double t0,
          double t1) { return ray_integral(g, make_ray(origin, dir, t0, t1)); },
      py::arg("gaussian"), py::arg("origin"), py::arg("direction"), py::arg("t0") = 0.0,
      py::arg("t1") = inf, "Closed-form integral of the density along the ray.");

  m.def(
      "transmittance",
      [](const Scene& scene, const Triple& origin, const Triple& dir, double t0, double t1) {
        return eval_transmittance(scene.set, make_ray(origin, dir, t0, t1));
      },
      py::arg("scene"), py::arg("origin"), py::arg("direction"), py::arg("t0") = 0.0,
      py::arg("t1") = inf);

  m.def(
      "sample_free_flight",
      [](const Scene& scene, const Triple& origin, const Triple& dir, double u, double u2)
          -> py::object {
        auto event = sample_free_flight(scene.set, make_ray(origin, dir, 0, inf), u, u2);
        if (!event.is_primitive()) return py::none();
        return py::make_tuple(event.primitive_id, event.t_mid);
      },
      py::arg("scene"), py::arg("origin"), py::arg("direction"), py::arg("u"),
      py::arg("u2") = 0.5,
      "Scattering primitive id and distance for uniforms (u, u2), or None on escape.");

  m.def(
      "convert_mesh",
      [](const std::string& path, int count, double k, int samples, uint64_t seed) {
        MeshConvertConfig config;
        config.count = count, config.k = k, config.samples_per_prim = samples;
        config.seed = seed;
        auto  out = mesh_to_gaussians(load_obj(path), config);
        Scene scene;
        scene.primitives = out.primitives;
        scene.materials  = out.materials;
        build_scene(scene);
        return scene;
      },
      py::arg("path"), py::arg("count") = 1000, py::arg("k") = 16.0, py::arg("samples") = 2048,
      py::arg("seed") = 0, "Converts an OBJ mesh into flat opaque primitives.");

  m.def(
      "convert_splats",
      [](const std::string& path, std::optional<Triple> camera, double roughness,
          double metallic) {
        SplatConvertConfig config;
        if (camera) config.mean_camera_position = to_vec(*camera);
        config.roughness = roughness, config.metallic = metallic;
        auto  out = splats_to_gaussians(load_splat_ply(path), config);
        Scene scene;
        scene.primitives = out.primitives;
        scene.materials  = out.materials;
        build_scene(scene);
        return scene;
      },
      py::arg("path"), py::arg("camera") = py::none(), py::arg("roughness") = 0.5,
      py::arg("metallic") = 0.0, "Converts a splat PLY file into Gaussian primitives.");

  m.def(
      "optimize",
      [](const Scene& scene, const std::vector<std::pair<Camera, py::array_t<double>>>& views,
          int iterations, double lr_rotation, double lr, bool jitter, uint64_t seed) {
        std::vector<OptimView> list;
        for (auto& [camera, target] : views) {
          auto t = target.unchecked<2>();
          OptimView v;
          v.camera = camera;
          v.height = int(t.shape(0)), v.width = int(t.shape(1));
          for (py::ssize_t y = 0; y < t.shape(0); y++)
            for (py::ssize_t x = 0; x < t.shape(1); x++) v.transmittance.push_back(t(y, x));
          list.push_back(std::move(v));
        }
        OptimConfig config;
        config.iterations = iterations, config.lr_rotation = lr_rotation;
        config.lr_other = lr, config.jitter = jitter, config.seed = seed;
        OptimResult result;
        {
          py::gil_scoped_release release;
          result = optimize_transmittance(scene, list, config);
        }
        Scene fitted      = scene;
        fitted.primitives = result.primitives;
        build_scene(fitted);
        return py::make_tuple(fitted, result.loss_history);
      },
      py::arg("scene"), py::arg("views"), py::arg("iterations") = 50,
      py::arg("lr_rotation") = 2e-5, py::arg("lr") = 1e-4, py::arg("jitter") = true,
      py::arg("seed") = 0,
      "Fits primitives to (camera, target transmittance) views; returns the fitted scene "
      "and the loss history.");

  m.def(
      "validate",
      [](const std::string& suite, int64_t samples, uint64_t seed) {
        ValidationReport report;
        {
          py::gil_scoped_release release;
          report = run_validation(suite, {samples, seed, 0});
        }
        return py::make_tuple(report.passed(), report.to_json());
      },
      py::arg("suite") = "gradients", py::arg("samples") = 100000, py::arg("seed") = 0,
      "Runs a validation suite; returns (passed, JSON report).");
}
