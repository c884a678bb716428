// Scene description: primitives, materials, camera and lights.

#pragma once

#include <string>
#include <vector>

#include "gaussrt/phase.h"
#include "gaussrt/transport.h"

namespace gaussrt {

// Pinhole camera; fov is the vertical field of view in degrees.
struct Camera {
  vec3   position = {0, 0, 5};
  vec3   look_at  = {0, 0, 0};
  vec3   up       = {0, 1, 0};
  double fov      = 40;
};

// Ray through the image plane at continuous pixel coordinates (x right,
// y down, in pixels).
Ray camera_ray(const Camera& camera, int width, int height, double x, double y);

// One-sided parallelogram light emitting towards cross(edge_u, edge_v).
struct AreaLight {
  vec3 corner   = {0, 0, 0};
  vec3 edge_u   = {1, 0, 0};
  vec3 edge_v   = {0, 1, 0};
  vec3 radiance = {1, 1, 1};

  vec3   normal() const { return normalize(cross(edge_u, edge_v)); }
  double area() const { return length(cross(edge_u, edge_v)); }
};

// Ray parameter of the hit with the light's parallelogram, or inf.
double intersect_light(const AreaLight& light, const Ray& ray);

// Radiance arriving from infinity: a constant or a lat-long map (y up).
struct Environment {
  vec3              constant = {0, 0, 0};
  int               width = 0, height = 0;
  std::vector<vec3> pixels; // row 0 is the top of the map
  std::string       path;   // source file of the map, if any

  bool has_map() const { return width > 0 && height > 0; }
  bool is_black() const;
  vec3 eval(const vec3& dir) const;
};

struct RenderDefaults {
  int      width = 64, height = 64;
  int      spp = 16, max_bounces = 8;
  uint64_t seed = 0;
};

struct Scene {
  std::vector<GaussianPrimitive> primitives;
  std::vector<Material>          materials;
  Camera                         camera;
  std::vector<AreaLight>         lights;
  Environment                    environment;
  double                         cutoff = default_cutoff;
  RenderDefaults                 defaults;
  KdConfig                       kd_config;

  PrimitiveSet set; // derived; rebuilt by build_scene

  const Material& material_of(int prim) const {
    return materials[primitives[prim].material_id];
  }
};

// Validates material references and rebuilds the prepared primitive set.
// Throws std::invalid_argument on unresolved ids or invalid primitives.
void build_scene(Scene& scene);

// `count` randomly placed and oriented Gaussians in [-1, 1]^3, each with its
// own random diffuse color, under a constant sky and one area light.
Scene random_gaussian_scene(int count, uint64_t seed);

// Primitives with a white Lambertian base and isotropic NDF inside a constant
// unit environment; converged images are 1 everywhere.
Scene white_furnace_scene(int count, uint64_t seed);

}  // namespace gaussrt
