// Command-line front end: render, convert, optimize, validate.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "gaussrt/convert.h"
#include "gaussrt/integrator.h"
#include "gaussrt/io.h"
#include "gaussrt/optimize.h"
#include "gaussrt/validate.h"

using namespace gaussrt;
namespace fs = std::filesystem;

namespace {

enum ExitCode { ok = 0, usage = 1, invalid = 2, io = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void parse_size(const std::string& text, int& width, int& height) {
  auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      width = height = std::stoi(text);
    } else {
      width  = std::stoi(text.substr(0, x));
      height = std::stoi(text.substr(x + 1));
    }
  } catch (const std::exception&) {
    throw UsageError("bad size '" + text + "', expected WxH");
  }
  if (width <= 0 || height <= 0) throw UsageError("size must be positive");
}

std::string strip_image_extension(const std::string& path) {
  auto p = fs::path(path);
  if (p.extension() == ".pfm" || p.extension() == ".png") p.replace_extension();
  return p.string();
}

bbox3 scene_bounds(const std::vector<GaussianPrimitive>& prims) {
  bbox3 box;
  for (auto& g : prims) {
    auto r = 3 * max_component(g.scales);
    box    = merge(box, {g.mu - vec3{r, r, r}, g.mu + vec3{r, r, r}});
  }
  return box;
}

// Cameras on a ring around the bounds, alternating above and below.
std::vector<Camera> orbit_cameras(const bbox3& box, int count) {
  auto center = (box.min + box.max) * 0.5;
  auto radius = std::max(0.5 * length(box.diagonal()), 1e-6);
  std::vector<Camera> cams;
  for (int i = 0; i < count; i++) {
    Camera c;
    auto   azimuth   = 2 * pi * i / count;
    auto   elevation = (i % 2 ? -1 : 1) * 20 * pi / 180;
    auto   dist      = 1.2 * radius / std::sin(c.fov * pi / 360);
    c.look_at        = center;
    c.position = center + vec3{std::cos(elevation) * std::sin(azimuth),
                              std::sin(elevation), std::cos(elevation) * std::cos(azimuth)} * dist;
    cams.push_back(c);
  }
  return cams;
}

nlohmann::json camera_json(const Camera& c) {
  auto v = [](const vec3& x) { return nlohmann::json::array({x.x, x.y, x.z}); };
  return {{"position", v(c.position)}, {"look_at", v(c.look_at)}, {"up", v(c.up)}, {"fov", c.fov}};
}

Camera camera_from_json(const nlohmann::json& j) {
  auto v = [](const nlohmann::json& x) {
    return vec3{x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>()};
  };
  Camera c;
  c.position = v(j.at("position"));
  c.look_at  = v(j.at("look_at"));
  c.up       = v(j.at("up"));
  c.fov      = j.at("fov").get<double>();
  return c;
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  std::string scene, out = "render", mode = "full", size;
  int         spp = 0, bounces = -1, threads = 0;
  uint64_t    seed = 0;
  bool        seed_set = false, no_mis = false;
  double      profile = 0.02;
};

int cmd_render(const RenderArgs& a) {
  auto         scene = load_scene(a.scene);
  RenderConfig config;
  config.width       = scene.defaults.width;
  config.height      = scene.defaults.height;
  config.spp         = a.spp > 0 ? a.spp : scene.defaults.spp;
  config.max_bounces = a.bounces >= 0 ? a.bounces : scene.defaults.max_bounces;
  config.seed        = a.seed_set ? a.seed : scene.defaults.seed;
  config.threads     = a.threads;
  config.mis         = !a.no_mis;
  config.profile_fraction = a.profile;
  if (!a.size.empty()) parse_size(a.size, config.width, config.height);
  if (a.mode == "full") config.mode = RenderMode::full;
  else if (a.mode == "direct") config.mode = RenderMode::direct;
  else if (a.mode == "transmittance") config.mode = RenderMode::transmittance;
  else if (a.mode == "exp-baseline") config.mode = RenderMode::exp_baseline;
  else throw UsageError("unknown mode " + a.mode);

  auto film = render(scene, config);
  auto base = strip_image_extension(a.out);
  auto img  = image_from_rgb(film.width, film.height, film.image());
  write_pfm(base + ".pfm", img);
  write_png(base + ".png", img);

  auto& s = film.stats;
  std::printf("rendered %dx%d, %d spp, %d threads in %.3f s\n", film.width,
      film.height, config.spp, resolve_thread_count(config.threads), s.seconds);
  if (s.nan_samples) std::printf("dropped %llu non-finite samples\n",
      static_cast<unsigned long long>(s.nan_samples));
  auto& t = s.transport;
  if (t.total_seconds > 0) {
    auto other = std::max(0.0, t.total_seconds - t.integral_seconds - t.disambiguation_seconds);
    std::printf("free-flight profile (%.1f%% of pixels, %.3f s):\n", 100 * config.profile_fraction,
        s.profile_seconds);
    std::printf("  traversal and bookkeeping %5.1f%%\n", 100 * other / t.total_seconds);
    std::printf("  ray integrals             %5.1f%%  (%llu)\n",
        100 * t.integral_seconds / t.total_seconds, static_cast<unsigned long long>(t.integrals));
    std::printf("  disambiguation            %5.1f%%  (%llu)\n",
        100 * t.disambiguation_seconds / t.total_seconds,
        static_cast<unsigned long long>(t.disambiguations));
    std::printf("  free-flight share of profiled time %5.1f%%\n",
        100 * t.total_seconds / std::max(s.profile_seconds, 1e-12));
  }
  std::printf("wrote %s.pfm and %s.png\n", base.c_str(), base.c_str());
  return ok;
}

// ---- convert ---------------------------------------------------------------

struct ConvertArgs {
  std::string from, input, out = "scene.json";
  int         count = 1000, samples = 2048, bank = 1000000;
  double      k     = 16, roughness = 0.5, metallic = 0;
  uint64_t    seed  = 0;
  std::vector<double> camera;
};

int cmd_convert(const ConvertArgs& a) {
  ConvertedScene converted;
  if (a.from == "mesh") {
    auto              mesh = load_obj(a.input);
    MeshConvertConfig config;
    config.count            = a.count;
    config.k                = a.k;
    config.samples_per_prim = a.samples;
    config.bank_size        = a.bank;
    config.seed             = a.seed;
    converted               = mesh_to_gaussians(mesh, config);
  } else if (a.from == "splat") {
    auto               splats = load_splat_ply(a.input);
    SplatConvertConfig config;
    config.roughness = a.roughness;
    config.metallic  = a.metallic;
    if (a.camera.size() == 3) config.mean_camera_position = vec3{a.camera[0], a.camera[1], a.camera[2]};
    else if (!a.camera.empty()) throw UsageError("--camera takes three numbers");
    converted = splats_to_gaussians(splats, config);
  } else {
    throw UsageError("--from must be mesh or splat");
  }

  Scene scene;
  scene.primitives = std::move(converted.primitives);
  scene.materials  = std::move(converted.materials);
  if (scene.materials.empty()) scene.materials.push_back({});
  scene.environment.constant = {1, 1, 1};
  if (!scene.primitives.empty()) scene.camera = orbit_cameras(scene_bounds(scene.primitives), 1)[0];
  build_scene(scene);
  save_scene(a.out, scene);
  // the written file must load back under the schema
  load_scene(a.out);
  std::printf("wrote %zu primitives and %zu materials to %s\n",
      scene.primitives.size(), scene.materials.size(), a.out.c_str());
  return ok;
}

// ---- optimize --------------------------------------------------------------

struct OptimizeArgs {
  std::string scene, targets, out = "optimized.json", loss, reference;
  int         iters = 50, views = 8, size = 512, threads = 0;
  double      lr_rotation = 2e-5, lr_other = 1e-4;
  uint64_t    seed = 0;
  bool        no_jitter = false;
};

void make_targets(const std::string& reference, const std::string& dir, int views, int size) {
  auto ref  = load_scene(reference);
  auto cams = orbit_cameras(scene_bounds(ref.primitives), views);
  fs::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (int i = 0; i < views; i++) {
    auto t    = render_transmittance(ref, cams[i], size, size, false);
    char name[32];
    std::snprintf(name, sizeof(name), "view_%02d.pfm", i);
    write_pfm((fs::path(dir) / name).string(), image_from_gray(size, size, t));
    list.push_back({{"camera", camera_json(cams[i])}, {"image", name}});
  }
  std::ofstream out(fs::path(dir) / "views.json");
  if (!out) throw io_error("cannot write " + (fs::path(dir) / "views.json").string());
  out << nlohmann::json{{"views", list}}.dump(2) << "\n";
}

std::vector<OptimView> load_targets(const std::string& dir, int max_views) {
  auto          path = fs::path(dir) / "views.json";
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<OptimView> views;
  try {
    auto root = nlohmann::json::parse(in);
    for (auto& v : root.at("views")) {
      if (int(views.size()) >= max_views) break;
      auto       img = read_pfm((fs::path(dir) / v.at("image").get<std::string>()).string());
      OptimView view;
      view.camera = camera_from_json(v.at("camera"));
      view.width  = img.width;
      view.height = img.height;
      for (size_t i = 0; i < size_t(img.width) * img.height; i++)
        view.transmittance.push_back(img.data[i * img.channels]);
      views.push_back(std::move(view));
    }
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(path.string() + ": " + e.what());
  }
  return views;
}

int cmd_optimize(const OptimizeArgs& a) {
  if (a.targets.empty()) throw UsageError("--targets is required");
  if (!a.reference.empty()) make_targets(a.reference, a.targets, a.views, a.size);
  auto scene = load_scene(a.scene);
  auto views = load_targets(a.targets, a.views);
  for (auto& v : views)
    if (v.width != a.size || v.height != a.size)
      std::printf("note: target %dx%d differs from --size %d; using the target size\n",
          v.width, v.height, a.size);

  OptimConfig config;
  config.iterations  = a.iters;
  config.lr_rotation = a.lr_rotation;
  config.lr_other    = a.lr_other;
  config.seed        = a.seed;
  config.threads     = a.threads;
  config.jitter      = !a.no_jitter;
  auto start  = std::chrono::steady_clock::now();
  auto result = optimize_transmittance(scene, views, config);
  auto secs   = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  scene.primitives = result.primitives;
  build_scene(scene);
  save_scene(a.out, scene);
  auto loss_path = a.loss.empty() ? strip_image_extension(a.out) + ".loss.txt" : a.loss;
  if (fs::path(a.out).extension() == ".json" && a.loss.empty())
    loss_path = (fs::path(a.out).replace_extension(".loss.txt")).string();
  save_loss_history(loss_path, result.loss_history);
  std::printf("loss %.6g -> %.6g over %d iterations (%zu views, %.2f s)\n",
      result.loss_history.front(), result.loss_history.back(), a.iters,
      views.size(), secs);
  std::printf("wrote %s and %s\n", a.out.c_str(), loss_path.c_str());
  return ok;
}

// ---- validate --------------------------------------------------------------

struct ValidateArgs {
  std::string suite = "all", report;
  int64_t     n     = 1000000;
  uint64_t    seed  = 0;
  int         threads = 0;
};

int cmd_validate(const ValidateArgs& a) {
  ValidateOptions options;
  options.samples = a.n;
  options.seed    = a.seed;
  options.threads = a.threads;
  ValidationReport report;
  try {
    report = run_validation(a.suite, options);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (auto& c : report.checks)
    std::printf("%s  %-60s %.4g %s %.4g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
        c.statistic, c.relation.c_str(), c.threshold);
  std::printf("%s in %.2f s\n", report.passed() ? "all checks passed" : "checks FAILED",
      report.seconds);
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw io_error("cannot write " + a.report);
    out << report.to_json() << "\n";
  }
  return report.passed() ? ok : invalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path tracing and conversion tools for Gaussian-primitive scenes"};
  app.require_subcommand(1);

  RenderArgs render_args;
  auto*      render_cmd = app.add_subcommand("render", "Render a scene to PFM and PNG");
  render_cmd->add_option("scene", render_args.scene, "Scene file")->required();
  render_cmd->add_option("--spp", render_args.spp, "Samples per pixel");
  render_cmd->add_option("--bounces", render_args.bounces, "Maximum scattering events");
  render_cmd->add_option("--size", render_args.size, "Image size WxH");
  render_cmd->add_option("--seed", render_args.seed, "Random seed")
      ->each([&](const std::string&) { render_args.seed_set = true; });
  render_cmd->add_option("--mode", render_args.mode, "full, direct, transmittance or exp-baseline")
      ->check(CLI::IsMember({"full", "direct", "transmittance", "exp-baseline"}));
  render_cmd->add_option("--out", render_args.out, "Output path without extension");
  render_cmd->add_option("--threads", render_args.threads, "Worker threads (0: automatic)");
  render_cmd->add_option("--profile", render_args.profile, "Fraction of pixels re-traced with timers");
  render_cmd->add_flag("--no-mis", render_args.no_mis, "Disable multiple importance sampling");

  ConvertArgs convert_args;
  auto*       convert_cmd = app.add_subcommand("convert", "Convert a mesh or splat file");
  convert_cmd->add_option("--from", convert_args.from, "mesh or splat")
      ->required()->check(CLI::IsMember({"mesh", "splat"}));
  convert_cmd->add_option("input", convert_args.input, "OBJ or PLY file")->required();
  convert_cmd->add_option("--count", convert_args.count, "Primitive count for meshes");
  convert_cmd->add_option("--k", convert_args.k, "Overlap factor for meshes");
  convert_cmd->add_option("--samples", convert_args.samples, "Samples per primitive");
  convert_cmd->add_option("--bank", convert_args.bank, "Surface samples for nearest-point queries");
  convert_cmd->add_option("--camera", convert_args.camera, "Mean camera position x y z for splats")
      ->expected(3);
  convert_cmd->add_option("--roughness", convert_args.roughness, "Roughness for splat materials");
  convert_cmd->add_option("--metallic", convert_args.metallic, "Metallic for splat materials");
  convert_cmd->add_option("--seed", convert_args.seed, "Random seed");
  convert_cmd->add_option("--out", convert_args.out, "Output scene file");

  OptimizeArgs optimize_args;
  auto*        optimize_cmd = app.add_subcommand("optimize", "Fit primitives to transmittance targets");
  optimize_cmd->add_option("scene", optimize_args.scene, "Scene file")->required();
  optimize_cmd->add_option("--targets", optimize_args.targets, "Directory with views.json and PFM targets");
  optimize_cmd->add_option("--reference", optimize_args.reference,
      "Scene rendered into --targets before optimizing");
  optimize_cmd->add_option("--iters", optimize_args.iters, "Iterations");
  optimize_cmd->add_option("--views", optimize_args.views, "Number of views");
  optimize_cmd->add_option("--size", optimize_args.size, "Target resolution for generated views");
  optimize_cmd->add_option("--lr-rotation", optimize_args.lr_rotation, "Rotation learning rate");
  optimize_cmd->add_option("--lr", optimize_args.lr_other, "Learning rate of other parameters");
  optimize_cmd->add_option("--seed", optimize_args.seed, "Jitter seed");
  optimize_cmd->add_option("--threads", optimize_args.threads, "Worker threads (0: automatic)");
  optimize_cmd->add_flag("--no-jitter", optimize_args.no_jitter, "Trace pixel centers");
  optimize_cmd->add_option("--out", optimize_args.out, "Output scene file");
  optimize_cmd->add_option("--loss", optimize_args.loss, "Loss history file");

  ValidateArgs validate_args;
  auto*        validate_cmd = app.add_subcommand("validate", "Run statistical validation suites");
  validate_cmd->add_option("--suite", validate_args.suite, "sampling, transmittance, phase, gradients or all")
      ->check(CLI::IsMember({"sampling", "transmittance", "phase", "gradients", "all"}));
  validate_cmd->add_option("--n", validate_args.n, "Samples per statistical check");
  validate_cmd->add_option("--seed", validate_args.seed, "Random seed");
  validate_cmd->add_option("--threads", validate_args.threads, "Worker threads (0: automatic)");
  validate_cmd->add_option("--report", validate_args.report, "Write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    auto code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*render_cmd) return cmd_render(render_args);
    if (*convert_cmd) return cmd_convert(convert_args);
    if (*optimize_cmd) return cmd_optimize(optimize_args);
    if (*validate_cmd) return cmd_validate(validate_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return usage;
  } catch (const io_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return io;
  } catch (const schema_error& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return invalid;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return invalid;
  } catch (const std::runtime_error& e) {
    // loaders for OBJ/PLY/PFM report unreadable or malformed files this way
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return io;
  }
  return usage;
}
