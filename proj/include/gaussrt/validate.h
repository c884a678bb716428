// Statistical validation against independent oracles: adaptive quadrature of
// the density along rays, a ray-marching model of the free-flight
// distribution, spherical quadrature of the phase function and finite
// differences of the ray integral.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gaussrt/phase.h"
#include "gaussrt/transport.h"

namespace gaussrt {

struct CheckResult {
  std::string name;
  double      statistic = 0;
  double      threshold = 0;
  bool        pass      = false;
  // "<" when the statistic must stay below the threshold, ">" when above
  std::string relation = "<";
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  double                   seconds = 0;

  bool passed() const;
  // Adds a check and returns whether it passed.
  bool add(const std::string& name, double statistic, double threshold,
      const std::string& relation = "<");
  void append(const ValidationReport& other);
  std::string to_json() const;
};

// ---- oracles ---------------------------------------------------------------

// Adaptive Gauss-Kronrod integral of the density along [ray.t0, ray.t1],
// with the density evaluated from an independently inverted covariance.
double quadrature_ray_integral(const GaussianPrimitive& g, const Ray& ray);

// Probability of scattering at each primitive (in input order) followed by
// the probability of reaching the end of the ray, from marching the linear
// transmittance model in small steps.
std::vector<double> marching_selection_oracle(std::span<const GaussianPrimitive> prims,
    const Ray& ray, double cutoff = default_cutoff, int steps_per_piece = 4000);

// Counts of sampled events per primitive followed by the background count.
std::vector<int64_t> sample_selection_counts(const PrimitiveSet& set,
    const Ray& ray, int64_t samples, uint64_t seed,
    DisambiguationRule rule = DisambiguationRule::local_density,
    TransportStats* stats = nullptr, int threads = 0);

// Collision distances of the exponential baseline, inf for escapes.
std::vector<double> sample_exponential_distances(
    const PrimitiveSet& set, const Ray& ray, int64_t samples, uint64_t seed);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);
std::vector<double> normalize_counts(const std::vector<int64_t>& counts);

// Asymptotic Kolmogorov p-value for statistic d and effective sample size n.
double ks_pvalue(double d, double n);
// Two-sample test on category counts over the same ordered categories.
double ks_two_sample_counts(const std::vector<int64_t>& a, const std::vector<int64_t>& b);
// One-sample test of samples against a continuous cdf.
double ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);

// Phase function by spherical quadrature over normals.
vec3 phase_quadrature(const Material& m, const vec3& wi, const vec3& wo);
// Integral of the VNDF over the sphere.
double vndf_quadrature(const SggxNdf& ndf, const vec3& wo);

// ---- test corpora ------------------------------------------------------------

struct FreeFlightCase {
  std::string                    name;
  std::vector<GaussianPrimitive> prims;
  Ray                            ray;
};

// Magnitude giving 1/2 the integral over the whole line equal to half_mass.
double magnitude_for_half_mass(GaussianPrimitive g, const Ray& ray, double half_mass);

// Hand-built configurations where several primitives are active at the
// saturating distance. The first is the symmetric-saturation case.
std::vector<FreeFlightCase> ambiguous_corpus();
FreeFlightCase random_free_flight_case(Rng& rng, bool force_overlap);

struct PhaseConfig {
  std::string name;
  Material    material;
  vec3        wi, wo;
};

// {delta, surface-like, isotropic, fiber-like} x {smooth metal, rough metal,
// plastic}.
std::vector<PhaseConfig> phase_grid();

struct GradientCheck {
  double max_rel_error = 0;
  int    cases         = 0;
};
// Analytic ray-integral gradients against central differences.
GradientCheck check_gradients(int cases, uint64_t seed);

// ---- checks --------------------------------------------------------------------

// Largest relative error of the closed-form ray integral against quadrature
// over random primitives and intervals.
double check_ray_integrals(int cases, uint64_t seed);

struct FreeFlightCheck {
  double max_tv                = 0;
  double symmetric_split_error = 0; // |P(first) - 1/2| in the symmetric case
  int    scenes                = 0;
};
// The ambiguous corpus followed by random scenes, every other one with
// forced overlap, `scenes` in total.
FreeFlightCheck check_free_flight(int scenes, int64_t samples, uint64_t seed, int threads = 0);

// Largest |P(background) - T| over random scenes.
double check_duality(int scenes, int64_t samples, uint64_t seed, int threads = 0);

// Smallest two-sample KS p-value between sampling each case as given and
// sampling after a random permutation or with leaf sizes 1, 4 and 16.
double check_order_independence(std::span<const FreeFlightCase> cases,
    int64_t samples, uint64_t seed, int threads = 0);

struct ExponentialCheck {
  double survival_error = 0; // sup |P(t_c > t) - exp(-I(t0, t))|
  double min_law_p      = 0; // KS p of two primitives against the joint law
};
ExponentialCheck check_exponential(int64_t samples, uint64_t seed);

struct PhaseCell {
  std::string name;
  double      rel_error      = 0;
  double      variance_ratio = 0; // improved over naive, 0 when both are exact
};
struct PhaseCheck {
  double                 vndf_error = 0;
  std::vector<PhaseCell> cells;
};
PhaseCheck check_phase(int64_t samples, uint64_t seed);

// Largest |I - w| between the infinite ray integral of remapped splats and
// the splat's projected blending weight w, over random splats and rays.
double check_splat_remap(int splats, uint64_t seed);

// ---- suites --------------------------------------------------------------------

struct ValidateOptions {
  int64_t  samples = 1000000;
  uint64_t seed    = 0;
  int      threads = 0;
};

ValidationReport validate_sampling(const ValidateOptions& options);
ValidationReport validate_transmittance(const ValidateOptions& options);
ValidationReport validate_phase(const ValidateOptions& options);
ValidationReport validate_gradients(const ValidateOptions& options);

// suite is sampling, transmittance, phase, gradients or all; throws
// std::invalid_argument otherwise.
ValidationReport run_validation(const std::string& suite, const ValidateOptions& options);

}  // namespace gaussrt
