#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gaussrt/io.h"

using namespace gaussrt;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "gaussrt_io_tests";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

const char* minimal_scene = R"({
  "version": 1,
  "materials": [{"base_color": [0.5, 0.5, 0.5]}],
  "primitives": [{"mu": [0, 0, 0], "rot": [1, 0, 0, 0], "scales": [0.1, 0.2, 0.3],
                  "magnitude": 1, "material": 0}]
})";

}  // namespace

TEST_CASE("scene JSON round trip is exact") {
  auto scene                 = random_gaussian_scene(5, 61);
  scene.materials[2].ndf     = {normalize(quat{0.9, 0.1, -0.2, 0.3}), {0.1, 0.4, 1}};
  scene.materials[3].bsdf.emission = {1, 2, 3};
  scene.defaults.seed        = 77;
  auto back                  = scene_from_json(scene_to_json(scene));
  REQUIRE(back.primitives.size() == scene.primitives.size());
  for (size_t i = 0; i < scene.primitives.size(); i++) {
    auto &a = scene.primitives[i], &b = back.primitives[i];
    CHECK(a.mu == b.mu);
    CHECK(a.rot == b.rot);
    CHECK(a.scales == b.scales);
    CHECK(a.magnitude == b.magnitude);
    CHECK(a.material_id == b.material_id);
  }
  REQUIRE(back.materials.size() == scene.materials.size());
  for (size_t i = 0; i < scene.materials.size(); i++) {
    auto &a = scene.materials[i], &b = back.materials[i];
    CHECK(a.bsdf.base_color == b.bsdf.base_color);
    CHECK(a.bsdf.roughness == b.bsdf.roughness);
    CHECK(a.bsdf.emission == b.bsdf.emission);
    CHECK(a.ndf.frame == b.ndf.frame);
    CHECK(a.ndf.eigenvalues == b.ndf.eigenvalues);
  }
  CHECK(back.camera.position == scene.camera.position);
  CHECK(back.camera.fov == scene.camera.fov);
  REQUIRE(back.lights.size() == 1);
  CHECK(back.lights[0].radiance == scene.lights[0].radiance);
  CHECK(back.environment.constant == scene.environment.constant);
  CHECK(back.cutoff == scene.cutoff);
  CHECK(back.defaults.seed == 77);
  CHECK(back.set.prims.size() == 5);
}

TEST_CASE("minimal scene fills in defaults") {
  auto scene = scene_from_json(minimal_scene);
  CHECK(scene.primitives.size() == 1);
  CHECK(scene.lights.empty());
  CHECK(scene.materials[0].bsdf.base_color == vec3{0.5, 0.5, 0.5});
  CHECK(scene.defaults.width == RenderDefaults{}.width);
}

TEST_CASE("invalid scenes raise schema errors") {
  auto bad = [](std::string text) {
    CHECK_THROWS_AS(scene_from_json(text), schema_error);
  };
  bad("{not json");
  bad("[1, 2]");
  bad(R"({"materials": [], "primitives": []})");
  bad(R"({"version": 99, "materials": [], "primitives": []})");
  bad(R"({"version": 1, "primitives": []})");
  bad(R"({"version": 1, "materials": [{}], "primitives": [{"mu": [0, 0], "rot": [1, 0, 0, 0],
      "scales": [1, 1, 1], "magnitude": 1, "material": 0}]})");
  bad(R"({"version": 1, "materials": [{}], "primitives": [{"mu": [0, 0, 0], "rot": [1, 0, 0, 0],
      "scales": [1, 1, 1], "magnitude": "big", "material": 0}]})");
  // unresolved material reference
  bad(R"({"version": 1, "materials": [{}], "primitives": [{"mu": [0, 0, 0], "rot": [1, 0, 0, 0],
      "scales": [1, 1, 1], "magnitude": 1, "material": 3}]})");
  bad(R"({"version": 1, "materials": [{"roughness": [1]}], "primitives": []})");
  bad(R"({"version": 1, "materials": [], "primitives": [], "kd_tree": {"max_leaf_prims": 0}})");
}

TEST_CASE("scene files") {
  auto dir   = scratch_dir();
  auto scene = random_gaussian_scene(3, 62);
  save_scene((dir / "scene.json").string(), scene);
  auto back = load_scene((dir / "scene.json").string());
  CHECK(back.primitives.size() == 3);
  CHECK_THROWS_AS(load_scene((dir / "missing.json").string()), io_error);
  CHECK_THROWS_AS(save_scene("/nonexistent/dir/scene.json", scene), io_error);
}

TEST_CASE("PFM round trip") {
  auto  dir = scratch_dir();
  Image rgb{3, 2, 3, {}};
  for (int i = 0; i < 18; i++) rgb.data.push_back(0.25f * i - 1);
  write_pfm((dir / "rgb.pfm").string(), rgb);
  auto back = read_pfm((dir / "rgb.pfm").string());
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.channels == 3);
  CHECK(back.data == rgb.data);

  auto gray = image_from_gray(2, 3, {0, 1, 2, 3, 4, 5});
  write_pfm((dir / "gray.pfm").string(), gray);
  auto g = read_pfm((dir / "gray.pfm").string());
  CHECK(g.channels == 1);
  CHECK(g.data == gray.data);

  write_text(dir / "bogus.pfm", "P6\n1 1\n255\n");
  CHECK_THROWS_AS(read_pfm((dir / "bogus.pfm").string()), io_error);
  write_text(dir / "short.pfm", "PF\n4 4\n-1.0\n");
  CHECK_THROWS_AS(read_pfm((dir / "short.pfm").string()), io_error);
  CHECK_THROWS_AS(read_pfm((dir / "missing.pfm").string()), io_error);
  CHECK_THROWS_AS(write_pfm((dir / "two.pfm").string(), Image{1, 1, 2, {0, 0}}),
      std::invalid_argument);
}

TEST_CASE("PNG output") {
  auto dir = scratch_dir();
  auto img = image_from_rgb(4, 2, std::vector<float>(24, 0.5f));
  write_png((dir / "out.png").string(), img);
  std::ifstream in(dir / "out.png", std::ios::binary);
  char          sig[8];
  in.read(sig, 8);
  CHECK(std::string(sig + 1, 3) == "PNG");
  CHECK_THROWS_AS(write_png("/nonexistent/dir/out.png", img), io_error);
}

TEST_CASE("environment maps") {
  auto dir = scratch_dir();
  // 4x2 lat-long map: top row 1, bottom row 2, columns tagged in green
  Image map{4, 2, 3, {}};
  for (int y = 0; y < 2; y++)
    for (int x = 0; x < 4; x++) map.data.insert(map.data.end(), {float(y + 1), float(x), 0});
  write_pfm((dir / "sky.pfm").string(), map);
  auto env = load_environment((dir / "sky.pfm").string());
  CHECK(env.has_map());
  CHECK(env.eval({0, 1, 0}).x == 1);
  CHECK(env.eval({0, -1, 0}).x == 2);
  // -z looks at the middle of the map
  CHECK(env.eval({0, 0.1, -1}).y == 2);

  write_text(dir / "sky.json", R"({"version": 1, "materials": [], "primitives": [],
      "background": {"constant": [0, 0, 0], "map": "sky.pfm"}})");
  auto scene = load_scene((dir / "sky.json").string());
  CHECK(scene.environment.width == 4);
  CHECK(scene.environment.path == "sky.pfm");
  auto text = scene_to_json(scene);
  CHECK(text.find("sky.pfm") != std::string::npos);
}
