#include "gaussrt/phase.h"

namespace gaussrt {

double ggx_alpha(const BaseBsdf& bsdf) {
  return std::max(1e-5, bsdf.roughness * bsdf.roughness);
}

vec3 specular_f0(const BaseBsdf& b) {
  auto dielectric = 0.08 * b.specular;
  return lerp({dielectric, dielectric, dielectric}, b.base_color, b.metallic);
}

// Schlick Fresnel; the grazing rise fades out with F0 so that a zero F0 gives
// no specular reflection at all.
static vec3 fresnel(const vec3& f0, double cos_d) {
  auto g = std::min(1.0, luminance(f0) / 0.04);
  auto m = std::pow(std::clamp(1 - cos_d, 0.0, 1.0), 5) * g;
  return f0 + (vec3{1, 1, 1} - f0) * m;
}

double ggx_d(double cos_h, double alpha) {
  if (cos_h <= 0) return 0;
  auto a2 = alpha * alpha;
  auto d  = cos_h * cos_h * (a2 - 1) + 1;
  return a2 / (pi * d * d);
}

double ggx_lambda(double cos_w, double alpha) {
  auto c2 = cos_w * cos_w;
  if (c2 >= 1) return 0;
  auto tan2 = (1 - c2) / c2;
  return 0.5 * (-1 + std::sqrt(1 + alpha * alpha * tan2));
}

vec3 ggx_sample_visible(
    const vec3& n, const vec3& wo, double alpha, const vec2& u) {
  auto frame = basis_fromz(n);
  auto v     = to_local(frame, wo);
  auto vh    = normalize(vec3{alpha * v.x, alpha * v.y, v.z});
  auto lensq = vh.x * vh.x + vh.y * vh.y;
  auto t1    = lensq > 0 ? vec3{-vh.y, vh.x, 0} / std::sqrt(lensq) : vec3{1, 0, 0};
  auto t2    = cross(vh, t1);
  auto r     = std::sqrt(u.x);
  auto phi   = 2 * pi * u.y;
  auto p1    = r * std::cos(phi);
  auto p2    = r * std::sin(phi);
  auto s     = 0.5 * (1 + vh.z);
  p2         = (1 - s) * std::sqrt(std::max(0.0, 1 - p1 * p1)) + s * p2;
  auto nh    = t1 * p1 + t2 * p2 + vh * std::sqrt(std::max(0.0, 1 - p1 * p1 - p2 * p2));
  auto m     = normalize(vec3{alpha * nh.x, alpha * nh.y, std::max(1e-12, nh.z)});
  return to_world(frame, m);
}

vec3 ggx_sample_normal(const vec3& h, double alpha, const vec2& u) {
  auto a2  = alpha * alpha;
  auto c2  = (1 - u.x) / (1 + (a2 - 1) * u.x);
  auto c   = std::sqrt(std::max(0.0, c2));
  auto s   = std::sqrt(std::max(0.0, 1 - c2));
  auto phi = 2 * pi * u.y;
  return to_world(basis_fromz(h), {s * std::cos(phi), s * std::sin(phi), c});
}

vec3 eval_specular(
    const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo) {
  auto ci = dot(n, wi), co = dot(n, wo);
  if (ci <= 0 || co <= 0) return {};
  auto h = normalize(wi + wo);
  auto f0 = specular_f0(b);
  if (max_component(f0) <= 0) return {};
  auto alpha = ggx_alpha(b);
  auto d     = ggx_d(dot(n, h), alpha);
  auto g     = 1 / (1 + ggx_lambda(ci, alpha) + ggx_lambda(co, alpha));
  return fresnel(f0, dot(h, wo)) * (d * g / (4 * co));
}

vec3 eval_diffuse(
    const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo) {
  auto ci = dot(n, wi), co = dot(n, wo);
  if (ci <= 0 || co <= 0 || b.metallic >= 1) return {};
  auto factor = 1.0;
  if (b.retro > 0) {
    auto cd   = dot(normalize(wi + wo), wi);
    auto fd90 = 0.5 + 2 * b.roughness * cd * cd;
    auto fi   = 1 + (fd90 - 1) * std::pow(1 - ci, 5);
    auto fo   = 1 + (fd90 - 1) * std::pow(1 - co, 5);
    factor    = (1 - b.retro) + b.retro * fi * fo;
  }
  return b.base_color * ((1 - b.metallic) * inv_pi * ci * factor);
}

vec3 eval_bsdf(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo) {
  return eval_specular(b, n, wi, wo) + eval_diffuse(b, n, wi, wo);
}

double specular_probability(const BaseBsdf& b) {
  auto f0     = luminance(specular_f0(b));
  auto g      = std::min(1.0, f0 / 0.04);
  auto spec_w = f0 + 0.1 * g * (1 - f0);
  auto diff_w = (1 - b.metallic) * luminance(b.base_color);
  if (spec_w + diff_w <= 0) return 0.5;
  return spec_w / (spec_w + diff_w);
}

static double specular_pdf(
    const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo) {
  auto co = dot(n, wo);
  if (co <= 0 || dot(n, wi) <= 0) return 0;
  auto h     = normalize(wi + wo);
  auto alpha = ggx_alpha(b);
  auto ho    = dot(h, wo);
  if (ho <= 0) return 0;
  auto dv = ggx_d(dot(n, h), alpha) * ho / (co * (1 + ggx_lambda(co, alpha)));
  return dv / (4 * ho);
}

double bsdf_pdf(const BaseBsdf& b, const vec3& n, const vec3& wi, const vec3& wo) {
  auto ps = specular_probability(b);
  return ps * specular_pdf(b, n, wi, wo) +
         (1 - ps) * sample_hemisphere_cos_pdf(n, wi);
}

BsdfSample sample_bsdf(const BaseBsdf& b, const vec3& n, const vec3& wo,
    double u_lobe, const vec2& u) {
  BsdfSample s;
  auto       ps = specular_probability(b);
  if (u_lobe < ps) {
    auto h = ggx_sample_visible(n, wo, ggx_alpha(b), u);
    s.wi   = reflect(wo, h);
  } else {
    s.wi = sample_hemisphere_cos(n, u);
  }
  s.wi  = normalize(s.wi);
  s.pdf = bsdf_pdf(b, n, s.wi, wo);
  if (s.pdf > 0 && dot(n, s.wi) > 0)
    s.weight = eval_bsdf(b, n, s.wi, wo) / s.pdf;
  return s;
}

// -----------------------------------------------------------------------------
// PHASE FUNCTION
// -----------------------------------------------------------------------------

static double balance(double a, double b) {
  if (std::isinf(a)) return 1;
  auto s = a + b;
  return s > 0 ? a / s : 0;
}

static vec3 visible_delta_normal(const SggxNdf& ndf, const vec3& wo) {
  return sggx_sample_vndf(ndf, wo, 0.5, 0.5);
}

vec3 phase_eval_stochastic(
    const Material& m, const vec3& wi, const vec3& wo, Rng& rng) {
  auto& b   = m.bsdf;
  auto& ndf = m.ndf;
  if (sggx_is_delta(ndf))
    return eval_bsdf(b, visible_delta_normal(ndf, wo), wi, wo);

  auto alpha  = ggx_alpha(b);
  auto u1     = rng.uniform2();
  auto n1     = sggx_sample_vndf(ndf, wo, u1.x, u1.y);
  auto pdf_n1 = sggx_vndf(ndf, wo, n1);

  // specular: VNDF vs normals sampled around the half vector
  vec3 fp_s;
  auto hsum = wi + wo;
  auto u2   = rng.uniform2();
  if (length(hsum) > 1e-9) {
    auto wh         = normalize(hsum);
    auto pdf_micro  = [&](const vec3& n) { return ggx_d(dot(n, wh), alpha) * std::max(0.0, dot(n, wh)); };
    auto n2         = ggx_sample_normal(wh, alpha, u2);
    auto pdf_n2     = pdf_micro(n2);
    fp_s = eval_specular(b, n1, wi, wo) * balance(pdf_n1, pdf_micro(n1));
    if (pdf_n2 > 0) {
      auto dv = sggx_vndf(ndf, wo, n2);
      fp_s += eval_specular(b, n2, wi, wo) * (dv / pdf_n2 * balance(pdf_n2, dv));
    }
  } else {
    fp_s = eval_specular(b, n1, wi, wo);
  }

  // diffuse: VNDF vs cosine-distributed normals around wi
  auto u3     = rng.uniform2();
  auto n3     = sample_hemisphere_cos(wi, u3);
  auto pdf_n3 = sample_hemisphere_cos_pdf(wi, n3);
  auto fp_d   = eval_diffuse(b, n1, wi, wo) *
              balance(pdf_n1, sample_hemisphere_cos_pdf(wi, n1));
  if (pdf_n3 > 0) {
    auto dv = sggx_vndf(ndf, wo, n3);
    fp_d += eval_diffuse(b, n3, wi, wo) * (dv / pdf_n3 * balance(pdf_n3, dv));
  }
  return fp_s + fp_d;
}

vec3 phase_eval_naive(const Material& m, const vec3& wi, const vec3& wo, Rng& rng) {
  if (sggx_is_delta(m.ndf))
    return eval_bsdf(m.bsdf, visible_delta_normal(m.ndf, wo), wi, wo);
  auto u = rng.uniform2();
  auto n = sggx_sample_vndf(m.ndf, wo, u.x, u.y);
  return eval_bsdf(m.bsdf, n, wi, wo);
}

PhaseSample phase_sample(const Material& m, const vec3& wo, Rng& rng) {
  auto un     = rng.uniform2();
  auto n      = sggx_sample_vndf(m.ndf, wo, un.x, un.y);
  auto u_lobe = rng.uniform();
  auto u      = rng.uniform2();
  auto s      = sample_bsdf(m.bsdf, n, wo, u_lobe, u);
  return {s.wi, s.weight};
}

double phase_pdf_approx(const Material& m, const vec3& wi, const vec3& wo) {
  auto ps   = specular_probability(m.bsdf);
  auto hsum = wi + wo;
  if (length(hsum) <= 1e-12) return 0;
  auto   wh   = normalize(hsum);
  auto   ho   = dot(wh, wo);
  double spec = 0;
  if (ps > 0 && ho > 0) {
    auto rough = sggx_roughen(m.ndf, ggx_alpha(m.bsdf));
    spec       = sggx_vndf(rough, wo, wh) / (4 * ho);
  }
  auto diff = 3 / (8 * pi) * std::max(0.0, ho);
  return ps * spec + (1 - ps) * diff;
}

}  // namespace gaussrt
