// Converters from triangle meshes and Gaussian-splat point clouds to
// Gaussian-primitive scenes, plus SGGX fitting from normal samples.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaussrt/gaussian.h"
#include "gaussrt/phase.h"

namespace gaussrt {

struct MeshAsset {
  std::vector<vec3>               positions;
  std::vector<vec3>               normals; // per vertex; optional
  std::vector<std::array<int, 3>> triangles;
  std::vector<int>                face_material; // per triangle
  std::vector<BaseBsdf>           materials;
};

double surface_area(const MeshAsset& mesh);

// Throws std::runtime_error on I/O failure or malformed files.
MeshAsset load_obj(const std::string& path);

struct OutlierThresholds {
  double eps_k = 0.1;  // per normalized BSDF parameter
  double eps_n = 0.05; // normal tolerance
  double eps_d = 0;    // distance tolerance; 0 selects 2x the initial scale
};

struct MeshConvertConfig {
  int               count            = 1000;
  double            k                = 16;
  double            cutoff           = default_cutoff;
  OutlierThresholds thresholds;
  int               samples_per_prim = 2048;
  int               bank_size        = 1000000;
  uint64_t          seed             = 0;
};

struct ConvertedScene {
  std::vector<GaussianPrimitive> primitives;
  std::vector<Material>          materials;
};

// eps k A / N, the squared in-plane scale of a converted primitive.
double mesh_initial_scale_squared(double area, int count, double k, double cutoff);
double mesh_initial_scale(double area, int count, double k, double cutoff);

// Flat, opaque primitives covering the mesh surface. Throws
// std::invalid_argument for empty or zero-area meshes.
ConvertedScene mesh_to_gaussians(const MeshAsset& mesh, const MeshConvertConfig& config);

// Per-primitive appearance gathered from a source mesh: BSDF parameters are
// averaged over Gaussian-distributed samples, the NDF is fitted to their
// normals. Assigns material ids to the primitives.
std::vector<Material> attach_appearance(std::span<GaussianPrimitive> prims,
    const MeshAsset& source, int samples_per_prim, uint64_t seed = 0,
    int bank_size = 1000000);

// SGGX from normal samples: eigenvectors of E[n n^T], eigenvalues from the
// mean absolute projection onto each axis. Needs at least 16 samples.
SggxNdf fit_sggx(std::span<const vec3> normal_samples);

struct Splat {
  vec3   mu;
  quat   rot;
  vec3   scales;
  double opacity = 1;
  vec3   color   = {0.5, 0.5, 0.5};
};

struct SplatAsset {
  std::vector<Splat> splats;
};

// Binary little-endian or ASCII PLY with the usual splat attributes
// (log scales, pre-sigmoid opacity, degree-0 SH color).
SplatAsset load_splat_ply(const std::string& path);
void       save_splat_ply(const std::string& path, const SplatAsset& asset);

// Magnitude whose infinite ray integral along view_dir equals the splat's
// blending weight.
double remap_splat_magnitude(const Splat& splat, const vec3& view_dir);

// SGGX whose projected area follows the splat ellipsoid's silhouette area.
SggxNdf ellipsoid_ndf(const vec3& scales, const quat& rot);

struct SplatConvertConfig {
  std::optional<vec3> mean_camera_position;
  double              roughness = 0.5;
  double              metallic  = 0;
  double              specular  = 0.5;
};

ConvertedScene splats_to_gaussians(const SplatAsset& asset, const SplatConvertConfig& config = {});

}  // namespace gaussrt
