#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gaussrt/integrator.h"
#include "gaussrt/optimize.h"
#include "gaussrt/validate.h"

using namespace gaussrt;

namespace {

GaussianPrimitive wall(double z, const Ray& ray, double half_mass) {
  GaussianPrimitive g;
  g.mu        = {0, 0, z};
  g.scales    = {0.8, 0.8, 0.2};
  g.magnitude = magnitude_for_half_mass(g, ray, half_mass);
  return g;
}

// Targets are 1 - C, which the relaxed loss reproduces exactly even where
// C exceeds one.
std::vector<OptimView> views_of(const Scene& scene, int res) {
  std::vector<OptimView> views;
  for (double a : {0.0, 0.7}) {
    OptimView v;
    v.width = v.height = res;
    v.camera = {{4 * std::sin(a), 0.5, 4 * std::cos(a)}, {0, 0, 0}, {0, 1, 0}, 40};
    for (auto c : relaxed_cdf_image(scene, v.camera, res, res, false))
      v.transmittance.push_back(1 - c);
    views.push_back(v);
  }
  return views;
}

}  // namespace

TEST_CASE("transmittance tape") {
  Ray ray{{0, 0, -5}, {0, 0, 1}};
  SUBCASE("empty scene records nothing") {
    Scene scene;
    build_scene(scene);
    auto tape = record_tape(scene.set, ray);
    CHECK(tape.entries.empty());
    CHECK(tape.relaxed_cdf() == 0);
  }
  SUBCASE("two unit half-mass walls accumulate past one") {
    Scene scene;
    scene.materials  = {Material{}};
    scene.primitives = {wall(0.5, ray, 1), wall(-0.5, ray, 1)};
    build_scene(scene);
    auto tape = record_tape(scene.set, ray);
    REQUIRE(tape.entries.size() == 2);
    CHECK(tape.entries[0].id == 0);
    CHECK(tape.entries[1].id == 1);
    // the cutoff ellipsoid drops a sliver of each primitive's mass
    CHECK(tape.relaxed_cdf() == doctest::Approx(2).epsilon(0.01));
    CHECK(tape.relaxed_cdf() < 2);
  }
}

TEST_CASE("transmittance is the clamped relaxed CDF") {
  auto   scene  = random_gaussian_scene(200, 51);
  Camera camera = scene.camera;
  int    n      = 40;
  auto   cdf    = relaxed_cdf_image(scene, camera, n, n, false);
  auto   t      = render_transmittance(scene, camera, n, n, false);
  int    below = 0, above = 0;
  for (size_t i = 0; i < cdf.size(); i++) {
    CHECK(t[i] == std::max(0.0, 1 - cdf[i]));
    (cdf[i] <= 1 ? below : above)++;
  }
  CHECK(below > 0);
  CHECK(above > 0);
}

TEST_CASE("ray integral gradients") {
  auto check = check_gradients(40, 52);
  CHECK(check.cases == 40);
  CHECK(check.max_rel_error < 1e-4);

  // I is linear in the magnitude
  GaussianPrimitive g;
  g.mu        = {0.1, -0.2, 0.3};
  g.rot       = normalize(quat{0.9, 0.1, 0.3, -0.2});
  g.scales    = {0.3, 0.5, 0.2};
  g.magnitude = 2.5;
  Ray  ray{{-1, 0.2, -3}, normalize(vec3{0.3, -0.1, 1})};
  auto grad = grad_ray_integral(g, ray, 2, 4);
  CHECK(grad.magnitude == doctest::Approx(grad.value / g.magnitude).epsilon(1e-12));
  Ray  segment = ray;
  segment.t0 = 2, segment.t1 = 4;
  CHECK(grad.value == doctest::Approx(ray_integral(g, segment)).epsilon(1e-12));
}

TEST_CASE("optimizer") {
  auto scene = random_gaussian_scene(20, 53);
  SUBCASE("a scene matching its own targets has zero loss and gradient") {
    auto        views = views_of(scene, 16);
    OptimConfig config;
    config.iterations = 1;
    config.jitter     = false;
    CHECK(transmittance_loss(scene, views, false, 0) == 0);
    // one step leaves everything in place up to quaternion renormalization;
    // later steps would let Adam rescale rounding noise to full-size moves
    auto result = optimize_transmittance(scene, views, config);
    REQUIRE(result.loss_history.size() == 2);
    CHECK(result.loss_history[0] == 0);
    CHECK(result.loss_history[1] < 1e-24);
    for (size_t i = 0; i < scene.primitives.size(); i++) {
      CHECK(result.primitives[i].mu == scene.primitives[i].mu);
      CHECK(result.primitives[i].scales == scene.primitives[i].scales);
      CHECK(result.primitives[i].magnitude == scene.primitives[i].magnitude);
    }
  }
  SUBCASE("perturbed scene moves towards its targets") {
    auto  views     = views_of(scene, 16);
    Scene perturbed = scene;
    for (auto& g : perturbed.primitives) g.scales = g.scales * 0.9;
    build_scene(perturbed);
    OptimConfig config;
    config.iterations = 20;
    config.lr_other   = 2e-3;
    config.jitter     = false;
    auto result       = optimize_transmittance(perturbed, views, config);
    CHECK(result.loss_history.back() < result.loss_history.front());
    for (auto& g : result.primitives) {
      CHECK(g.magnitude > 0);
      CHECK(min_component(g.scales) > 0);
      CHECK(norm(g.rot) == doctest::Approx(1).epsilon(1e-12));
    }
  }
  SUBCASE("invalid views are rejected") {
    OptimConfig config;
    CHECK_THROWS_AS(optimize_transmittance(scene, {}, config), std::invalid_argument);
    auto views = views_of(scene, 8);
    views[1].transmittance.pop_back();
    CHECK_THROWS_AS(optimize_transmittance(scene, views, config), std::invalid_argument);
  }
}

TEST_CASE("loss history file") {
  auto path = std::filesystem::temp_directory_path() / "gaussrt_loss_history.txt";
  save_loss_history(path.string(), {0.5, 0.25, 0.125});
  std::ifstream in(path);
  int           i;
  double        loss;
  std::vector<double> read;
  while (in >> i >> loss) {
    CHECK(i == int(read.size()));
    read.push_back(loss);
  }
  CHECK(read == std::vector<double>{0.5, 0.25, 0.125});
  std::filesystem::remove(path);
  CHECK_THROWS(save_loss_history("/nonexistent/dir/loss.txt", {1}));
}
