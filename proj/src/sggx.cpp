#include "gaussrt/sggx.h"

namespace gaussrt {

static constexpr double delta_ratio = 1e-12;
static constexpr double floor_ratio = 1e-8;

static quat frame_with_z(const vec3& z) {
  auto b = basis_fromz(normalize(z));
  return from_matrix(from_columns(b.x, b.y, b.z));
}

SggxNdf sggx_surface(const vec3& normal, double flatness) {
  return {frame_with_z(normal), {flatness, flatness, 1}};
}

SggxNdf sggx_fiber(const vec3& axis, double thickness) {
  return {frame_with_z(axis), {1, 1, thickness}};
}

sym3 sggx_matrix(const SggxNdf& ndf) {
  return rotate_diagonal(to_matrix(ndf.frame), ndf.eigenvalues);
}

static int largest_axis(const vec3& e) {
  return e.x >= e.y && e.x >= e.z ? 0 : (e.y >= e.z ? 1 : 2);
}

bool sggx_is_delta(const SggxNdf& ndf) {
  auto& e   = ndf.eigenvalues;
  auto  big = largest_axis(e);
  auto  m   = e[big];
  for (int i = 0; i < 3; i++)
    if (i != big && e[i] > delta_ratio * m) return false;
  return true;
}

vec3 sggx_dominant_axis(const SggxNdf& ndf) {
  return to_matrix(ndf.frame).column(largest_axis(ndf.eigenvalues));
}

// Eigenvalues with a tiny relative floor so S stays invertible.
static vec3 floored(const vec3& e) {
  auto f = floor_ratio * max_component(e);
  return max(e, {f, f, f});
}

double sggx_projected_area(const SggxNdf& ndf, const vec3& w) {
  auto l = transpose(to_matrix(ndf.frame)) * w;
  auto& e = ndf.eigenvalues;
  return std::sqrt(std::max(0.0, e.x * l.x * l.x + e.y * l.y * l.y + e.z * l.z * l.z));
}

double sggx_ndf(const SggxNdf& ndf, const vec3& n) {
  if (sggx_is_delta(ndf)) return 0;
  auto e   = floored(ndf.eigenvalues);
  auto l   = transpose(to_matrix(ndf.frame)) * n;
  auto det = e.x * e.y * e.z;
  // n^T S^-1 n |S| computed from the adjugate
  auto q = l.x * l.x * e.y * e.z + l.y * l.y * e.x * e.z + l.z * l.z * e.x * e.y;
  if (!(q > 0)) return 0;
  return det * std::sqrt(det) / (pi * q * q);
}

double sggx_vndf(const SggxNdf& ndf, const vec3& wo, const vec3& n) {
  auto c = dot(n, wo);
  if (c <= 0) return 0;
  auto sigma = sggx_projected_area(ndf, wo);
  if (!(sigma > 0)) return 0;
  return sggx_ndf(ndf, n) * c / sigma;
}

vec3 sggx_sample_vndf(const SggxNdf& ndf, const vec3& wo, double u1, double u2) {
  auto rot = to_matrix(ndf.frame);
  if (sggx_is_delta(ndf)) {
    auto g = rot.column(largest_axis(ndf.eigenvalues));
    return dot(g, wo) >= 0 ? g : -g;
  }
  auto e  = floored(ndf.eigenvalues);
  auto wl = normalize(transpose(rot) * wo);

  // S expressed in an orthonormal basis (wk, wj, wi = wo)
  auto b  = basis_fromz(wl);
  auto wk = b.x, wj = b.y, wi = b.z;
  auto sf = [&](const vec3& a, const vec3& c) {
    return a.x * e.x * c.x + a.y * e.y * c.y + a.z * e.z * c.z;
  };
  auto s_jj = sf(wj, wj), s_ii = sf(wi, wi);
  auto s_kj = sf(wk, wj), s_ki = sf(wk, wi), s_ji = sf(wj, wi);

  auto sqrt_det    = std::sqrt(e.x * e.y * e.z);
  auto inv_sqrt_ii = 1 / std::sqrt(s_ii);
  auto tmp         = std::sqrt(std::max(0.0, s_jj * s_ii - s_ji * s_ji));

  vec3 mk = {sqrt_det / tmp, 0, 0};
  vec3 mj = {-inv_sqrt_ii * (s_ki * s_ji - s_kj * s_ii) / tmp,
      inv_sqrt_ii * tmp, 0};
  vec3 mi = {inv_sqrt_ii * s_ki, inv_sqrt_ii * s_ji, inv_sqrt_ii * s_ii};

  // uniformly distributed visible normal in the standard configuration
  auto r   = std::sqrt(u1);
  auto phi = 2 * pi * u2;
  auto x = r * std::cos(phi), y = r * std::sin(phi);
  auto z = std::sqrt(std::max(0.0, 1 - x * x - y * y));

  auto m = mk * x + mj * y + mi * z;
  auto n = normalize(wk * m.x + wj * m.y + wi * m.z);
  return rot * n;
}

SggxNdf sggx_roughen(const SggxNdf& ndf, double alpha) {
  auto out = ndf;
  auto big = largest_axis(ndf.eigenvalues);
  auto add = alpha * alpha * ndf.eigenvalues[big];
  for (int i = 0; i < 3; i++)
    if (i != big) out.eigenvalues[i] += add;
  return out;
}

}  // namespace gaussrt
