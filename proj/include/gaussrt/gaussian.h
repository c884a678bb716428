// Scaled 3D Gaussian primitives: density, closed-form ray integrals and their
// inversion, and the truncated ellipsoid / box bounds used by every consumer.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "gaussrt/math.h"

namespace gaussrt {

inline constexpr double default_cutoff = 0.01;

struct GaussianPrimitive {
  vec3   mu          = {0, 0, 0};
  quat   rot         = {1, 0, 0, 0};
  vec3   scales      = {1, 1, 1};
  double magnitude   = 1;
  int    material_id = 0;
};

struct Ray {
  vec3   origin = {0, 0, 0};
  vec3   dir    = {0, 0, 1};
  double t0     = 0;
  double t1     = inf;
};

inline vec3 ray_point(const Ray& ray, double t) {
  return ray.origin + ray.dir * t;
}

// Coefficients of the quadratic form (x + t w)^T P (x + t w) = A t^2 + B t + C
// with x = origin - mu and P the inverse covariance.
struct RayIntegralCoeffs {
  double A = 0, B = 0, C = 0;
};

struct invalid_primitive : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Throws invalid_primitive on non-positive scales, non-unit rotation or
// negative magnitude.
void validate(const GaussianPrimitive& g);

// Raises the smallest scale to at least 1e-4 of the largest.
GaussianPrimitive clamp_flat(GaussianPrimitive g);

// Precomputed per-primitive quantities shared by the sampler and integrator.
struct PreparedGaussian {
  vec3   mu;
  mat3   rotation;   // columns are the principal axes
  vec3   scales;
  sym3   inv_cov;    // Sigma^-1
  double norm    = 0; // c / ((2 pi)^{3/2} |Sigma|^{1/2}), the peak density
  double cutoff2 = 0; // squared Mahalanobis radius of the bounding ellipsoid
  bbox3  bounds;
};

PreparedGaussian prepare(const GaussianPrimitive& g, double cutoff = default_cutoff);
std::vector<PreparedGaussian> prepare(
    std::span<const GaussianPrimitive> prims, double cutoff = default_cutoff);

sym3 covariance(const GaussianPrimitive& g);

double eval_density(const GaussianPrimitive& g, const vec3& x);
double eval_density(const PreparedGaussian& g, const vec3& x);

RayIntegralCoeffs ray_coeffs(const PreparedGaussian& g, const Ray& ray);

// Density of one primitive restricted to a ray, written as
// peak * exp(-A/2 (t - tc)^2).
struct RayProfile {
  double A    = 0;
  double tc   = 0; // parameter of the point of maximum density
  double d2   = 0; // squared Mahalanobis distance of that point
  double peak = 0; // density at tc
  double s    = 0; // sqrt(A / 2)
  double half_mass = 0; // peak * sqrt(pi / (2A)), half the infinite integral

  double density(double t) const {
    auto dt = t - tc;
    return peak * std::exp(-0.5 * A * dt * dt);
  }
  double integral(double t0, double t1) const;
  // t >= t0 with integral(t0, t) = target; the caller guarantees that target
  // does not exceed integral(t0, +inf).
  double invert(double t0, double target) const;
  // Ray interval inside the ellipsoid of squared radius cutoff2; false when
  // the line misses it.
  bool ellipsoid_interval(double cutoff2, double& ta, double& tb) const;
};

RayProfile ray_profile(const PreparedGaussian& g, const vec3& origin, const vec3& dir);

// Untruncated closed-form integral over [ray.t0, ray.t1].
double ray_integral(const GaussianPrimitive& g, const Ray& ray);
double ray_integral(const PreparedGaussian& g, const Ray& ray);

// t with ray_integral over [t0, t] = target_mass. Throws std::out_of_range
// when target_mass exceeds the mass available on [t0, ray.t1].
double invert_ray_integral(const GaussianPrimitive& g, const Ray& ray,
    double t0, double target_mass);

// One term of a multi-primitive CDF: a ray profile whose support is
// restricted to [ta, tb].
struct ClippedProfile {
  RayProfile profile;
  double     ta = -inf, tb = inf;
};

// Solves 1/2 sum_k I_k(t0, t) = u_mass on [t0, t1] by safeguarded Newton.
// Throws std::out_of_range if u_mass lies outside [0, F(t1)].
double solve_multi_inversion(std::span<const ClippedProfile> terms,
    double t0, double t1, double u_mass, int* iterations = nullptr);
double solve_multi_inversion(std::span<const GaussianPrimitive> prims,
    const Ray& ray, double t0, double t1, double u_mass);

struct BoundingShapes {
  // Maps the unit ball onto the bounding ellipsoid: x = center + transform*y.
  vec3  center;
  mat3  transform;
  bbox3 box;
};

BoundingShapes bounding_shapes(const GaussianPrimitive& g, double epsilon_cutoff);

inline double cutoff_radius2(double epsilon_cutoff) {
  return -2 * std::log(epsilon_cutoff);
}

}  // namespace gaussrt
