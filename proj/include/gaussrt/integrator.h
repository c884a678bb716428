// Unidirectional volumetric path tracer over Gaussian-primitive scenes with
// next-event estimation and one-sample MIS.

#pragma once

#include <vector>

#include "gaussrt/scene.h"

namespace gaussrt {

enum struct RenderMode { full, direct, transmittance, exp_baseline };

struct RenderConfig {
  int             width = 64, height = 64;
  int             spp         = 16;
  int             max_bounces = 8;
  uint64_t        seed        = 0;
  RussianRoulette shadow_rr   = {true, 0.05, 0.9};
  RenderMode      mode        = RenderMode::full;
  bool            mis         = true;
  int             threads     = 0; // 0: GAUSSRT_THREADS or hardware
  DisambiguationRule rule     = DisambiguationRule::local_density;
  // fraction of pixels re-traced single-threaded with timers enabled
  double profile_fraction = 0;
};

struct RenderStats {
  double         seconds     = 0;
  uint64_t       nan_samples = 0;
  TransportStats transport; // from the profiling pass
  double         profile_seconds = 0;
};

struct Film {
  int                   width = 0, height = 0;
  std::vector<vec3>     sum;    // double-precision accumulators
  std::vector<uint32_t> counts;
  RenderStats           stats;

  vec3 pixel(int x, int y) const {
    auto i = size_t(y) * width + x;
    return counts[i] ? sum[i] / double(counts[i]) : vec3{};
  }
  // Mean radiance per pixel in single precision, row-major RGB.
  std::vector<float> image() const;
};

int resolve_thread_count(int requested);

Film render(const Scene& scene, const RenderConfig& config);

// Radiance estimate for one camera ray.
vec3 estimate_path(const Scene& scene, const Ray& ray, Rng& rng,
    const RenderConfig& config, TransportStats* stats = nullptr);

// Deterministic transmittance along one ray per pixel (jittered when
// requested, seeded by `seed`). Row-major.
std::vector<double> render_transmittance(const Scene& scene,
    const Camera& camera, int width, int height, bool jitter, uint64_t seed = 0);

// Seed of the random stream used for one pixel sample.
inline uint64_t sample_seed(uint64_t seed, uint64_t pixel, uint64_t sample) {
  return hash_combine(hash_combine(hash64(seed), pixel), sample);
}

}  // namespace gaussrt
