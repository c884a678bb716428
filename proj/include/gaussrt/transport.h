// Light transport through linear-transmittance Gaussian primitives: discrete
// free-flight sampling, transmittance evaluation, and the exponential-medium
// baseline built on independent per-primitive samples.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gaussrt/gaussian.h"
#include "gaussrt/kdtree.h"

namespace gaussrt {

// Prepared primitives plus their kd-tree.
struct PrimitiveSet {
  std::vector<PreparedGaussian> prims;
  SceneAccel                    accel;
  double                        cutoff = default_cutoff;
};

PrimitiveSet make_primitive_set(std::span<const GaussianPrimitive> prims,
    double cutoff = default_cutoff, const KdConfig& config = {});

struct ScatterEvent {
  enum struct Kind { background, primitive };

  Kind   kind         = Kind::background;
  int    primitive_id = -1;
  double t_start = 0, t_end = 0; // primitive's ellipsoid interval on the ray
  double t_mid = 0;

  bool is_primitive() const { return kind == Kind::primitive; }
};

struct PrimInterval {
  int    id;
  double t_start, t_end;
};

struct Segment {
  double           t_start = 0, t_end = 0;
  std::vector<int> active;
};

// Sweeps the interval endpoints and returns maximal segments of [t0, t1] with
// a constant active set, in order. Gaps produce segments with no actives.
std::vector<Segment> partition_segments(
    std::span<const PrimInterval> intervals, double t0, double t1);

// How a primitive is chosen once the scattering distance t_u inside an
// ambiguous segment is known.
enum struct DisambiguationRule {
  local_density, // proportional to G_j at t_u; exact
  interval_mass, // proportional to I_j(t_prev, t_u)
};

// Optional timing of the sampler's phases.
struct TransportStats {
  double   integral_seconds       = 0;
  double   disambiguation_seconds = 0;
  double   total_seconds          = 0;
  uint64_t leaves                 = 0;
  uint64_t integrals              = 0;
  uint64_t disambiguations        = 0;

  TransportStats& operator+=(const TransportStats& o);
};

struct FreeFlightOptions {
  DisambiguationRule rule  = DisambiguationRule::local_density;
  TransportStats*    stats = nullptr;
};

// u is consumed up front; the second uniform is only requested when an
// ambiguous segment has to be disambiguated.
ScatterEvent sample_free_flight(const PrimitiveSet& scene, const Ray& ray,
    double u, const std::function<double()>& next_uniform, int excluded_id = -1,
    const FreeFlightOptions& options = {});

ScatterEvent sample_free_flight(const PrimitiveSet& scene, const Ray& ray,
    double u, double u2, int excluded_id = -1,
    const FreeFlightOptions& options = {});

// Resolves an ambiguous segment: finds t_u with
// cdf_prev + 1/2 sum_j I_j(t_prev, t_u) = u and picks a primitive with u2.
// `clipped` holds the active primitives' profiles restricted to their
// supports.
ScatterEvent disambiguate(const PrimitiveSet& scene, const Ray& ray,
    std::span<const int> ids, std::span<const ClippedProfile> clipped,
    double t_prev, double t_end, double cdf_prev, double u, double u2,
    DisambiguationRule rule = DisambiguationRule::local_density,
    double* t_u_out = nullptr);

struct RussianRoulette {
  bool   enabled = false;
  double epsilon = 0.05;
  double q       = 0.9;
};

// max(0, 1 - 1/2 sum I) along the ray. With roulette enabled the first time
// the running value drops below epsilon the estimate is terminated with
// probability q (using u) or reweighted by 1 / (1 - q).
double eval_transmittance(const PrimitiveSet& scene, const Ray& ray,
    const RussianRoulette& rr = {}, double u = 0.5, int excluded_id = -1);

// Unclamped 1/2 sum I along the ray.
double accumulated_cdf(const PrimitiveSet& scene, const Ray& ray,
    int excluded_id = -1);

struct ExpCollision {
  bool   hit          = false;
  double t            = inf;
  int    primitive_id = -1;
};

// Exponential medium with extinction sum_k G_k: each primitive's segment in a
// leaf is sampled independently and the nearest collision wins.
ExpCollision sample_free_flight_exponential(const PrimitiveSet& scene,
    const Ray& ray, Rng& rng, int excluded_id = -1);

// exp(-sum I) along the ray.
double eval_transmittance_exponential(
    const PrimitiveSet& scene, const Ray& ray, int excluded_id = -1);

// Ellipsoid interval of a primitive intersected with [ray.t0, ray.t1].
bool primitive_interval(const PreparedGaussian& g, const Ray& ray,
    double& t_start, double& t_end);

}  // namespace gaussrt
