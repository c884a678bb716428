#include "gaussrt/gaussian.h"

#include <string>

#include "gaussrt/special.h"

namespace gaussrt {

static const double inv_2pi_32 = 1 / std::pow(2 * pi, 1.5);

void validate(const GaussianPrimitive& g) {
  if (!(g.scales.x > 0 && g.scales.y > 0 && g.scales.z > 0) ||
      !isfinite(g.scales))
    throw invalid_primitive("scales must be positive and finite");
  if (std::abs(norm(g.rot) - 1) > 1e-6)
    throw invalid_primitive("rotation quaternion is not unit length");
  if (!(g.magnitude >= 0) || !std::isfinite(g.magnitude))
    throw invalid_primitive("magnitude must be non-negative");
  if (!isfinite(g.mu)) throw invalid_primitive("position must be finite");
}

GaussianPrimitive clamp_flat(GaussianPrimitive g) {
  auto floor = 1e-4 * max_component(g.scales);
  g.scales   = max(g.scales, {floor, floor, floor});
  return g;
}

sym3 covariance(const GaussianPrimitive& g) {
  return rotate_diagonal(to_matrix(g.rot), g.scales * g.scales);
}

PreparedGaussian prepare(const GaussianPrimitive& g, double cutoff) {
  if (!(g.scales.x > 0 && g.scales.y > 0 && g.scales.z > 0) ||
      !isfinite(g.scales))
    throw invalid_primitive("degenerate covariance: non-positive scale");
  if (!(norm2(g.rot) > 0))
    throw invalid_primitive("degenerate covariance: zero rotation");
  if (!(g.magnitude >= 0))
    throw invalid_primitive("negative magnitude");

  PreparedGaussian p;
  p.mu       = g.mu;
  p.rotation = to_matrix(g.rot);
  p.scales   = g.scales;
  p.inv_cov  = rotate_diagonal(p.rotation, vec3{1, 1, 1} / (g.scales * g.scales));
  p.norm     = g.magnitude * inv_2pi_32 / (g.scales.x * g.scales.y * g.scales.z);
  p.cutoff2  = cutoff_radius2(cutoff);

  auto k = std::sqrt(p.cutoff2);
  vec3 half;
  for (int i = 0; i < 3; i++)
    half[i] = k * length(p.rotation[i] * g.scales);
  p.bounds = {g.mu - half, g.mu + half};
  return p;
}

std::vector<PreparedGaussian> prepare(
    std::span<const GaussianPrimitive> prims, double cutoff) {
  std::vector<PreparedGaussian> out;
  out.reserve(prims.size());
  for (auto& g : prims) out.push_back(prepare(g, cutoff));
  return out;
}

double eval_density(const PreparedGaussian& g, const vec3& x) {
  return g.norm * std::exp(-0.5 * quadratic_form(g.inv_cov, x - g.mu));
}

double eval_density(const GaussianPrimitive& g, const vec3& x) {
  return eval_density(prepare(g), x);
}

RayIntegralCoeffs ray_coeffs(const PreparedGaussian& g, const Ray& ray) {
  auto x  = ray.origin - g.mu;
  auto pw = g.inv_cov * ray.dir;
  return {dot(ray.dir, pw), 2 * dot(x, pw), quadratic_form(g.inv_cov, x)};
}

RayProfile ray_profile(
    const PreparedGaussian& g, const vec3& origin, const vec3& dir) {
  RayProfile prof;
  auto x  = origin - g.mu;
  auto pw = g.inv_cov * dir;
  prof.A  = dot(dir, pw);
  prof.tc = -dot(x, pw) / prof.A;
  // evaluating at the closest point avoids cancellation in C - B^2/4A
  auto xc        = x + dir * prof.tc;
  prof.d2        = std::max(0.0, quadratic_form(g.inv_cov, xc));
  prof.peak      = g.norm * std::exp(-0.5 * prof.d2);
  prof.s         = std::sqrt(prof.A / 2);
  prof.half_mass = prof.peak * std::sqrt(pi / (2 * prof.A));
  return prof;
}

double RayProfile::integral(double t0, double t1) const {
  if (!(t1 > t0) || half_mass == 0) return 0;
  return half_mass * erf_diff(s * (t0 - tc), s * (t1 - tc));
}

double RayProfile::invert(double t0, double target) const {
  if (!(target > 0) || half_mass == 0) return t0;
  auto   d    = target / half_mass;
  auto   tau0 = s * (t0 - tc);
  double tau;
  if (tau0 >= 0) {
    auto z = std::erfc(tau0) - d;
    tau    = z > 0 ? erfcinv(z) : inf;
  } else {
    auto y = std::erfc(-tau0) + d;
    if (y <= 1) {
      tau = -erfcinv(y);
    } else {
      auto z = std::erfc(tau0) - d;
      tau    = z > 0 ? erfcinv(z) : inf;
    }
  }
  return std::max(t0, tc + tau / s);
}

bool RayProfile::ellipsoid_interval(double cutoff2, double& ta, double& tb) const {
  if (d2 >= cutoff2 || !(A > 0)) return false;
  auto h = std::sqrt((cutoff2 - d2) / A);
  ta     = tc - h;
  tb     = tc + h;
  return true;
}

double ray_integral(const PreparedGaussian& g, const Ray& ray) {
  return ray_profile(g, ray.origin, ray.dir).integral(ray.t0, ray.t1);
}

double ray_integral(const GaussianPrimitive& g, const Ray& ray) {
  return ray_integral(prepare(g), ray);
}

double invert_ray_integral(
    const GaussianPrimitive& g, const Ray& ray, double t0, double target_mass) {
  auto prof      = ray_profile(prepare(g), ray.origin, ray.dir);
  auto available = prof.integral(t0, ray.t1);
  if (target_mass < 0 || target_mass > available * (1 + 1e-12) + 1e-300)
    throw std::out_of_range("target mass " + std::to_string(target_mass) +
                            " exceeds available mass " +
                            std::to_string(available));
  if (target_mass >= available) return ray.t1;
  return std::min(prof.invert(t0, target_mass), ray.t1);
}

// -----------------------------------------------------------------------------
// MULTI-PRIMITIVE INVERSION
// -----------------------------------------------------------------------------

static double clipped_cdf(
    std::span<const ClippedProfile> terms, double t0, double t) {
  double sum = 0;
  for (auto& term : terms) {
    auto a = std::max(t0, term.ta), b = std::min(t, term.tb);
    if (b > a) sum += term.profile.integral(a, b);
  }
  return 0.5 * sum;
}

static double clipped_pdf(std::span<const ClippedProfile> terms, double t) {
  double sum = 0;
  for (auto& term : terms)
    if (t >= term.ta && t <= term.tb) sum += term.profile.density(t);
  return 0.5 * sum;
}

double solve_multi_inversion(std::span<const ClippedProfile> terms, double t0,
    double t1, double u_mass, int* iterations) {
  auto total = clipped_cdf(terms, t0, t1);
  if (!(u_mass >= 0) || u_mass > total * (1 + 1e-12) + 1e-300)
    throw std::out_of_range("target mass " + std::to_string(u_mass) +
                            " outside [0, " + std::to_string(total) + "]");
  if (iterations) *iterations = 0;
  if (u_mass == 0) return t0;
  if (u_mass >= total) return t1;

  // finite bracket covering all mass that lies in [t0, t1]
  double lo = inf, hi = -inf;
  for (auto& term : terms) {
    auto reach = 40 / term.profile.s;
    lo = std::min(lo, std::max(term.ta, term.profile.tc - reach));
    hi = std::max(hi, std::min(term.tb, term.profile.tc + reach));
  }
  lo = std::max(lo, t0);
  hi = std::min(hi, t1);
  if (!(hi > lo)) return lo;

  auto tol = 1e-13 * std::max(1.0, u_mass);
  auto t   = 0.5 * (lo + hi);
  int  it  = 0;
  for (; it < 200; it++) {
    auto g = clipped_cdf(terms, t0, t) - u_mass;
    if (std::abs(g) <= tol) break;
    if (g < 0) lo = t;
    else hi = t;
    if (hi - lo <= 1e-15 * (std::abs(lo) + std::abs(hi))) break;
    double next = 0.5 * (lo + hi);
    if (it < 32) {
      auto slope = clipped_pdf(terms, t);
      auto cand  = t - g / slope;
      if (slope > 0 && cand > lo && cand < hi) next = cand;
    }
    t = next;
  }
  if (iterations) *iterations = it;
  return t;
}

double solve_multi_inversion(std::span<const GaussianPrimitive> prims,
    const Ray& ray, double t0, double t1, double u_mass) {
  std::vector<ClippedProfile> terms;
  for (auto& g : prims)
    terms.push_back({ray_profile(prepare(g), ray.origin, ray.dir)});
  return solve_multi_inversion(terms, t0, t1, u_mass);
}

BoundingShapes bounding_shapes(const GaussianPrimitive& g, double epsilon_cutoff) {
  auto prep = prepare(g, epsilon_cutoff);
  auto k    = std::sqrt(prep.cutoff2);
  return {g.mu, prep.rotation * diagonal(g.scales * k), prep.bounds};
}

}  // namespace gaussrt
