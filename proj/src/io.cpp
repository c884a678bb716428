#include "gaussrt/io.h"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace gaussrt {

using json = nlohmann::json;

// -----------------------------------------------------------------------------
// SCENE FILES
// -----------------------------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw schema_error(where + ": " + what);
}

double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  auto v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "non-finite number");
  return v;
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

template <size_t N>
std::array<double, N> get_array(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N)
    fail(where, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out;
  for (size_t i = 0; i < N; i++)
    out[i] = get_number(j[i], where + "[" + std::to_string(i) + "]");
  return out;
}

vec3 get_vec3(const json& j, const std::string& where) {
  auto a = get_array<3>(j, where);
  return {a[0], a[1], a[2]};
}

quat get_quat(const json& j, const std::string& where) {
  auto a = get_array<4>(j, where);
  return {a[0], a[1], a[2], a[3]};
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T, typename Fn>
T optional_field(const json& j, const char* key, const std::string& where,
    T fallback, Fn&& parse) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return parse(*it, where + "." + key);
}

json to_json(const vec3& v) { return json::array({v.x, v.y, v.z}); }
json to_json(const quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

}  // namespace

Scene scene_from_json(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) fail("scene", "expected an object");
  auto version = get_int(require(root, "version", "scene"), "scene.version");
  if (version != scene_schema_version)
    fail("scene.version", "unsupported version " + std::to_string(version));

  Scene scene;
  auto number = [](const json& j, const std::string& w) { return get_number(j, w); };
  auto vector = [](const json& j, const std::string& w) { return get_vec3(j, w); };
  auto integer = [](const json& j, const std::string& w) { return get_int(j, w); };

  auto& mats = require(root, "materials", "scene");
  if (!mats.is_array()) fail("scene.materials", "expected an array");
  for (size_t i = 0; i < mats.size(); i++) {
    auto     w = "scene.materials[" + std::to_string(i) + "]";
    auto&    j = mats[i];
    if (!j.is_object()) fail(w, "expected an object");
    Material m;
    auto&    b = m.bsdf;
    b.base_color = optional_field(j, "base_color", w, b.base_color, vector);
    b.roughness  = optional_field(j, "roughness", w, b.roughness, number);
    b.metallic   = optional_field(j, "metallic", w, b.metallic, number);
    b.specular   = optional_field(j, "specular", w, b.specular, number);
    b.retro      = optional_field(j, "retro", w, b.retro, number);
    b.emission   = optional_field(j, "emission", w, b.emission, vector);
    if (auto it = j.find("sggx"); it != j.end()) {
      m.ndf.frame = optional_field(*it, "frame", w + ".sggx", m.ndf.frame,
          [](const json& x, const std::string& ww) { return get_quat(x, ww); });
      m.ndf.eigenvalues = optional_field(*it, "eigenvalues", w + ".sggx",
          m.ndf.eigenvalues, vector);
      if (!(norm2(m.ndf.frame) > 0)) fail(w + ".sggx.frame", "zero quaternion");
      auto& ev = m.ndf.eigenvalues;
      if (!(ev.x >= 0 && ev.y >= 0 && ev.z >= 0 && max_component(ev) > 0))
        fail(w + ".sggx.eigenvalues", "must be non-negative and not all zero");
    }
    scene.materials.push_back(m);
  }

  auto& prims = require(root, "primitives", "scene");
  if (!prims.is_array()) fail("scene.primitives", "expected an array");
  scene.primitives.reserve(prims.size());
  for (size_t i = 0; i < prims.size(); i++) {
    auto w = "scene.primitives[" + std::to_string(i) + "]";
    auto& j = prims[i];
    GaussianPrimitive g;
    g.mu          = get_vec3(require(j, "mu", w), w + ".mu");
    g.rot         = get_quat(require(j, "rot", w), w + ".rot");
    g.scales      = get_vec3(require(j, "scales", w), w + ".scales");
    g.magnitude   = get_number(require(j, "magnitude", w), w + ".magnitude");
    g.material_id = get_int(require(j, "material", w), w + ".material");
    scene.primitives.push_back(g);
  }

  if (auto it = root.find("camera"); it != root.end()) {
    auto& c  = scene.camera;
    c.position = optional_field(*it, "position", "scene.camera", c.position, vector);
    c.look_at  = optional_field(*it, "look_at", "scene.camera", c.look_at, vector);
    c.up       = optional_field(*it, "up", "scene.camera", c.up, vector);
    c.fov      = optional_field(*it, "fov", "scene.camera", c.fov, number);
    if (!(c.fov > 0 && c.fov < 180)) fail("scene.camera.fov", "must lie in (0, 180)");
  }

  if (auto it = root.find("lights"); it != root.end()) {
    if (!it->is_array()) fail("scene.lights", "expected an array");
    for (size_t i = 0; i < it->size(); i++) {
      auto      w = "scene.lights[" + std::to_string(i) + "]";
      auto&     j = (*it)[i];
      AreaLight l;
      l.corner   = get_vec3(require(j, "corner", w), w + ".corner");
      l.edge_u   = get_vec3(require(j, "edge_u", w), w + ".edge_u");
      l.edge_v   = get_vec3(require(j, "edge_v", w), w + ".edge_v");
      l.radiance = get_vec3(require(j, "radiance", w), w + ".radiance");
      if (!(l.area() > 0)) fail(w, "degenerate light");
      scene.lights.push_back(l);
    }
  }

  if (auto it = root.find("background"); it != root.end()) {
    auto& env    = scene.environment;
    env.constant = optional_field(*it, "constant", "scene.background", env.constant, vector);
    if (auto m = it->find("map"); m != it->end()) {
      if (!m->is_string()) fail("scene.background.map", "expected a path");
      auto path    = m->get<std::string>();
      auto full    = std::filesystem::path(path).is_absolute()
                         ? std::filesystem::path(path)
                         : std::filesystem::path(base_dir) / path;
      auto loaded  = load_environment(full.string());
      loaded.constant = env.constant;
      loaded.path     = path;
      env             = loaded;
    }
  }

  if (auto it = root.find("render"); it != root.end()) {
    auto& d = scene.defaults;
    auto  w = std::string("scene.render");
    d.width       = optional_field(*it, "width", w, d.width, integer);
    d.height      = optional_field(*it, "height", w, d.height, integer);
    d.spp         = optional_field(*it, "spp", w, d.spp, integer);
    d.max_bounces = optional_field(*it, "max_bounces", w, d.max_bounces, integer);
    if (auto s = it->find("seed"); s != it->end()) {
      if (!s->is_number_unsigned() && !s->is_number_integer())
        fail(w + ".seed", "expected an integer");
      d.seed = s->get<uint64_t>();
    }
    if (d.width <= 0 || d.height <= 0 || d.spp <= 0 || d.max_bounces < 0)
      fail(w, "sizes and sample counts must be positive");
  }

  scene.cutoff = optional_field(root, "cutoff", "scene", scene.cutoff, number);
  if (auto it = root.find("kd_tree"); it != root.end()) {
    auto& k          = scene.kd_config;
    k.max_depth      = optional_field(*it, "max_depth", "scene.kd_tree", k.max_depth, integer);
    k.max_leaf_prims = optional_field(*it, "max_leaf_prims", "scene.kd_tree", k.max_leaf_prims, integer);
    if (k.max_depth < 0 || k.max_leaf_prims < 1) fail("scene.kd_tree", "invalid limits");
  }

  try {
    build_scene(scene);
  } catch (const std::invalid_argument& e) {
    throw schema_error(std::string("scene: ") + e.what());
  }
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  json root;
  root["version"] = scene_schema_version;
  root["cutoff"]  = scene.cutoff;

  auto& mats = root["materials"] = json::array();
  for (auto& m : scene.materials) {
    auto& b = m.bsdf;
    mats.push_back({{"base_color", to_json(b.base_color)},
        {"roughness", b.roughness}, {"metallic", b.metallic},
        {"specular", b.specular}, {"retro", b.retro},
        {"emission", to_json(b.emission)},
        {"sggx", {{"frame", to_json(m.ndf.frame)},
                     {"eigenvalues", to_json(m.ndf.eigenvalues)}}}});
  }
  auto& prims = root["primitives"] = json::array();
  for (auto& g : scene.primitives)
    prims.push_back({{"mu", to_json(g.mu)}, {"rot", to_json(g.rot)},
        {"scales", to_json(g.scales)}, {"magnitude", g.magnitude},
        {"material", g.material_id}});

  auto& c        = scene.camera;
  root["camera"] = {{"position", to_json(c.position)},
      {"look_at", to_json(c.look_at)}, {"up", to_json(c.up)}, {"fov", c.fov}};
  auto& lights = root["lights"] = json::array();
  for (auto& l : scene.lights)
    lights.push_back({{"corner", to_json(l.corner)}, {"edge_u", to_json(l.edge_u)},
        {"edge_v", to_json(l.edge_v)}, {"radiance", to_json(l.radiance)}});
  root["background"] = {{"constant", to_json(scene.environment.constant)}};
  if (scene.environment.has_map()) {
    if (scene.environment.path.empty())
      throw io_error("environment map has no source path to save");
    root["background"]["map"] = scene.environment.path;
  }
  auto& d        = scene.defaults;
  root["render"] = {{"width", d.width}, {"height", d.height}, {"spp", d.spp},
      {"max_bounces", d.max_bounces}, {"seed", d.seed}};
  root["kd_tree"] = {{"max_depth", scene.kd_config.max_depth},
      {"max_leaf_prims", scene.kd_config.max_leaf_prims}};
  return root.dump(1);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path();
  return scene_from_json(buffer.str(), dir.empty() ? "." : dir.string());
}

void save_scene(const std::string& path, const Scene& scene) {
  auto          text = scene_to_json(scene);
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << text << "\n";
  if (!out) throw io_error("failed writing " + path);
}

// -----------------------------------------------------------------------------
// IMAGES
// -----------------------------------------------------------------------------

void write_pfm(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("PFM needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  auto row = size_t(image.width) * image.channels;
  for (int y = image.height - 1; y >= 0; y--)
    out.write(reinterpret_cast<const char*>(image.data.data() + y * row),
        std::streamsize(row * sizeof(float)));
  if (!out) throw io_error("failed writing " + path);
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string magic;
  Image       image;
  double      scale = 0;
  in >> magic >> image.width >> image.height >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || image.width <= 0 || image.height <= 0)
    throw io_error(path + ": not a PFM file");
  in.get();
  image.channels = magic == "PF" ? 3 : 1;
  auto row       = size_t(image.width) * image.channels;
  image.data.resize(row * image.height);
  for (int y = image.height - 1; y >= 0; y--)
    if (!in.read(reinterpret_cast<char*>(image.data.data() + y * row),
            std::streamsize(row * sizeof(float))))
      throw io_error(path + ": truncated PFM");
  if (scale > 0) {
    // big-endian payload
    for (auto& v : image.data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  return image;
}

static uint8_t to_srgb8(float v) {
  double x = std::clamp(double(v), 0.0, 1.0);
  x = x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1 / 2.4) - 0.055;
  return uint8_t(std::lround(x * 255));
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("PNG needs 1 or 3 channels");
  auto file = std::fopen(path.c_str(), "wb");
  if (!file) throw io_error("cannot write " + path);
  auto png  = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  auto info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(file);
    throw io_error("failed writing " + path);
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, image.width, image.height, 8,
      image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
      PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(image.width) * image.channels);
  for (int y = 0; y < image.height; y++) {
    for (size_t i = 0; i < row.size(); i++)
      row[i] = to_srgb8(image.data[y * row.size() + i]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(file);
}

Image image_from_rgb(int width, int height, const std::vector<float>& rgb) {
  return {width, height, 3, rgb};
}

Image image_from_gray(int width, int height, const std::vector<double>& values) {
  return {width, height, 1, std::vector<float>(values.begin(), values.end())};
}

Environment load_environment(const std::string& path) {
  auto        image = read_pfm(path);
  Environment env;
  env.width  = image.width;
  env.height = image.height;
  env.path   = path;
  env.pixels.resize(size_t(image.width) * image.height);
  for (size_t i = 0; i < env.pixels.size(); i++) {
    if (image.channels == 3)
      env.pixels[i] = {image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]};
    else
      env.pixels[i] = {image.data[i], image.data[i], image.data[i]};
  }
  return env;
}

}  // namespace gaussrt
