// Per-primitive phase function: the SGGX visible normal distribution combined
// with a base surface BSDF (GGX specular with metallic Fresnel plus a diffuse
// lobe with optional retro-reflection).
//
// All BSDF values are cosine weighted, f(wi, wo; n) <n.wi>, and directions
// point away from the scattering point.

#pragma once

#include "gaussrt/math.h"
#include "gaussrt/sggx.h"

namespace gaussrt {

struct BaseBsdf {
  vec3   base_color = {0.8, 0.8, 0.8};
  double roughness  = 0.5; // GGX alpha = roughness^2
  double metallic   = 0;
  double specular   = 0.5; // dielectric F0 = 0.08 * specular
  double retro      = 0;   // 0 Lambert, 1 retro-reflective diffuse
  vec3   emission   = {0, 0, 0};
};

struct Material {
  BaseBsdf bsdf;
  SggxNdf  ndf;
};

double ggx_alpha(const BaseBsdf& bsdf);
vec3   specular_f0(const BaseBsdf& bsdf);

// GGX helpers in terms of cosines with the (micro)surface normal.
double ggx_d(double cos_h, double alpha);
double ggx_lambda(double cos_w, double alpha);
// Visible-normal sampling of GGX around normal n for view wo.
vec3   ggx_sample_visible(const vec3& n, const vec3& wo, double alpha, const vec2& u);
// Normal m around axis h with density D(m.h) (m.h).
vec3   ggx_sample_normal(const vec3& h, double alpha, const vec2& u);

vec3 eval_specular(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo);
vec3 eval_diffuse(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo);
vec3 eval_bsdf(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo);

// Probability of choosing the specular lobe when sampling.
double specular_probability(const BaseBsdf& b);

struct BsdfSample {
  vec3   wi;
  vec3   weight; // f / pdf
  double pdf = 0;
};

// Mixture sampling of the two lobes; u.x picks the lobe.
BsdfSample sample_bsdf(const BaseBsdf& b, const vec3& n, const vec3& wo,
    double u_lobe, const vec2& u);
double bsdf_pdf(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo);

// Unbiased estimate of f_p(wi, wo) with internal multiple importance
// sampling between VNDF sampling and reversed base-BSDF sampling, per lobe.
vec3 phase_eval_stochastic(const Material& m, const vec3& wi, const vec3& wo, Rng& rng);
// Same integral estimated with VNDF samples only.
vec3 phase_eval_naive(const Material& m, const vec3& wi, const vec3& wo, Rng& rng);

struct PhaseSample {
  vec3 wi;
  vec3 weight; // f_p / pdf
};

PhaseSample phase_sample(const Material& m, const vec3& wo, Rng& rng);

// Deterministic approximation of the phase sampling density: roughened SGGX
// at the half vector for the specular lobe, a half-vector cosine lobe for the
// diffuse one.
double phase_pdf_approx(const Material& m, const vec3& wi, const vec3& wo);

}  // namespace gaussrt
