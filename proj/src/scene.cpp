#include "gaussrt/scene.h"

#include <cmath>
#include <stdexcept>

namespace gaussrt {

Ray camera_ray(const Camera& camera, int width, int height, double x, double y) {
  auto forward = normalize(camera.look_at - camera.position);
  auto right   = normalize(cross(forward, camera.up));
  auto up      = cross(right, forward);
  auto tan_h   = std::tan(camera.fov * pi / 360);
  auto aspect  = double(width) / height;
  auto px      = (2 * x / width - 1) * tan_h * aspect;
  auto py      = (1 - 2 * y / height) * tan_h;
  return {camera.position, normalize(forward + right * px + up * py), 0, inf};
}

double intersect_light(const AreaLight& light, const Ray& ray) {
  auto n     = cross(light.edge_u, light.edge_v);
  auto denom = dot(n, ray.dir);
  if (denom == 0) return inf;
  auto t = dot(n, light.corner - ray.origin) / denom;
  if (!(t > ray.t0 && t < ray.t1)) return inf;
  auto p  = ray_point(ray, t) - light.corner;
  // coordinates of p in the (edge_u, edge_v) basis
  auto uu = dot(light.edge_u, light.edge_u), uv = dot(light.edge_u, light.edge_v);
  auto vv = dot(light.edge_v, light.edge_v);
  auto pu = dot(p, light.edge_u), pv = dot(p, light.edge_v);
  auto det = uu * vv - uv * uv;
  auto a   = (pu * vv - pv * uv) / det;
  auto b   = (pv * uu - pu * uv) / det;
  if (a < 0 || a > 1 || b < 0 || b > 1) return inf;
  return t;
}

bool Environment::is_black() const {
  if (!has_map()) return max_component(constant) <= 0;
  for (auto& p : pixels)
    if (max_component(p) > 0) return false;
  return true;
}

vec3 Environment::eval(const vec3& dir) const {
  if (!has_map()) return constant;
  auto u = std::atan2(dir.x, -dir.z) / (2 * pi) + 0.5;
  auto v = std::acos(std::clamp(dir.y, -1.0, 1.0)) / pi;
  auto i = std::clamp(int(u * width), 0, width - 1);
  auto j = std::clamp(int(v * height), 0, height - 1);
  return pixels[size_t(j) * width + i];
}

void build_scene(Scene& scene) {
  if (!(scene.cutoff > 0 && scene.cutoff < 1))
    throw std::invalid_argument("cutoff must lie in (0, 1)");
  for (auto& g : scene.primitives) {
    if (g.material_id < 0 || g.material_id >= int(scene.materials.size()))
      throw std::invalid_argument(
          "primitive references missing material " + std::to_string(g.material_id));
    validate(g);
  }
  std::vector<GaussianPrimitive> clamped;
  clamped.reserve(scene.primitives.size());
  for (auto& g : scene.primitives) clamped.push_back(clamp_flat(g));
  scene.set = make_primitive_set(clamped, scene.cutoff, scene.kd_config);
}

static quat random_rotation(Rng& rng) {
  // uniform on SO(3) from three uniforms
  auto u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  auto a = std::sqrt(1 - u1), b = std::sqrt(u1);
  return {a * std::sin(2 * pi * u2), a * std::cos(2 * pi * u2),
      b * std::sin(2 * pi * u3), b * std::cos(2 * pi * u3)};
}

static std::vector<GaussianPrimitive> random_primitives(int count, Rng& rng) {
  std::vector<GaussianPrimitive> prims;
  prims.reserve(count);
  for (int i = 0; i < count; ++i) {
    GaussianPrimitive g;
    g.mu     = {2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
    g.rot    = random_rotation(rng);
    g.scales = {0.03 + 0.12 * rng.uniform(), 0.03 + 0.12 * rng.uniform(),
        0.03 + 0.12 * rng.uniform()};
    // half the integral along a line through the center falls in [0.3, 1]
    auto half_mass = 0.3 + 0.7 * rng.uniform();
    auto mean_s    = (g.scales.x + g.scales.y + g.scales.z) / 3;
    g.magnitude    = 2 * half_mass / (std::sqrt(2 * pi) * mean_s);
    g.material_id  = i;
    prims.push_back(g);
  }
  return prims;
}

Scene random_gaussian_scene(int count, uint64_t seed) {
  auto  rng = make_rng(seed, 7);
  Scene scene;
  scene.primitives = random_primitives(count, rng);
  for (int i = 0; i < count; ++i) {
    Material m;
    m.bsdf.base_color = {rng.uniform(), rng.uniform(), rng.uniform()};
    m.bsdf.roughness  = 0.3 + 0.6 * rng.uniform();
    m.bsdf.specular   = 0.5;
    scene.materials.push_back(m);
  }
  scene.camera = {{0, 0, 4.5}, {0, 0, 0}, {0, 1, 0}, 40};
  scene.environment.constant = {0.5, 0.55, 0.6};
  scene.lights.push_back({{-1, 3, -1}, {2, 0, 0}, {0, 0, 2}, {8, 8, 8}});
  build_scene(scene);
  return scene;
}

Scene white_furnace_scene(int count, uint64_t seed) {
  auto  rng = make_rng(seed, 11);
  Scene scene;
  scene.primitives = random_primitives(count, rng);
  Material white;
  white.bsdf.base_color = {1, 1, 1};
  white.bsdf.metallic   = 0;
  white.bsdf.specular   = 0;
  white.bsdf.roughness  = 1;
  white.ndf             = sggx_isotropic();
  scene.materials       = {white};
  for (auto& g : scene.primitives) g.material_id = 0;
  scene.camera               = {{0, 0, 4.5}, {0, 0, 0}, {0, 1, 0}, 40};
  scene.environment.constant = {1, 1, 1};
  build_scene(scene);
  return scene;
}

}  // namespace gaussrt
