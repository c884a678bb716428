// Gradient-based fitting of primitive geometry to target transmittance
// images through the relaxed (un-clamped) accumulated CDF.

#pragma once

#include <string>
#include <vector>

#include "gaussrt/scene.h"

namespace gaussrt {

struct TapeEntry {
  int    id      = -1;
  double t_start = 0, t_end = 0;
  double integral = 0; // I over [t_start, t_end]
};

// Primitives whose bounding ellipsoids the ray meets, each once, sorted by id.
struct TransmittanceTape {
  std::vector<TapeEntry> entries;

  // 1/2 sum I, the relaxed accumulated CDF
  double relaxed_cdf() const;
};

TransmittanceTape record_tape(const PrimitiveSet& scene, const Ray& ray);

struct IntegralGradient {
  double value = 0; // I itself
  vec3   mu;
  quat   rot = {0, 0, 0, 0}; // w.r.t. the raw quaternion components
  vec3   scales;
  double magnitude = 0;
};

// Derivatives of the ray integral over [t_start, t_end]; the endpoints are
// held fixed.
IntegralGradient grad_ray_integral(const GaussianPrimitive& g, const Ray& ray,
    double t_start, double t_end);

// Relaxed CDF per pixel, one ray per pixel (pixel centers unless jittered).
// Row-major. The transmittance image is max(0, 1 - C) bitwise.
std::vector<double> relaxed_cdf_image(const Scene& scene, const Camera& camera,
    int width, int height, bool jitter, uint64_t seed = 0);

struct OptimView {
  Camera              camera;
  int                 width = 0, height = 0;
  std::vector<double> transmittance; // target T, row-major
};

struct OptimConfig {
  int      iterations  = 50;
  double   lr_rotation = 2e-5;
  double   lr_other    = 1e-4;
  double   beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  bool     jitter  = true;
  uint64_t seed    = 0;
  int      threads = 0;
};

struct OptimResult {
  std::vector<GaussianPrimitive> primitives;
  // loss before each step plus the loss after the last one
  std::vector<double> loss_history;
};

// Mean squared error between 1 - C and the target transmittance over all
// pixels of all views.
double transmittance_loss(const Scene& scene, std::span<const OptimView> views,
    bool jitter, uint64_t seed);

// Adam on (mu, rotation, scales, magnitude); after each step scales and
// magnitudes are clamped positive and rotations renormalized. Throws
// std::invalid_argument without views or on mismatched image sizes.
OptimResult optimize_transmittance(const Scene& scene,
    std::span<const OptimView> views, const OptimConfig& config);

// "iteration loss" per line.
void save_loss_history(const std::string& path, const std::vector<double>& history);

}  // namespace gaussrt
