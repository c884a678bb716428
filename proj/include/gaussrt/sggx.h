// SGGX microflake normal distribution, stored as a frame
// and the eigenvalues of S along the frame's x, y, z axes.

#pragma once

#include "gaussrt/math.h"

namespace gaussrt {

struct SggxNdf {
  quat frame       = {1, 0, 0, 0};
  vec3 eigenvalues = {1, 1, 1};
};

inline SggxNdf sggx_isotropic() { return {}; }
// Surface-like distribution with mean normal along z of the frame.
SggxNdf sggx_surface(const vec3& normal, double flatness = 0);
// Fiber-like distribution with normals perpendicular to the fiber axis.
SggxNdf sggx_fiber(const vec3& axis, double thickness = 0);

sym3 sggx_matrix(const SggxNdf& ndf);

// True when all the mass sits on +-axis (two eigenvalues vanish).
bool sggx_is_delta(const SggxNdf& ndf);
// Eigenvector of the largest eigenvalue.
vec3 sggx_dominant_axis(const SggxNdf& ndf);

// sigma(w) = sqrt(w^T S w)
double sggx_projected_area(const SggxNdf& ndf, const vec3& w);
// D(n) = 1 / (pi sqrt|S| (n^T S^-1 n)^2)
double sggx_ndf(const SggxNdf& ndf, const vec3& n);
// D_wo(n) = D(n) <n.wo> / sigma(wo)
double sggx_vndf(const SggxNdf& ndf, const vec3& wo, const vec3& n);
// Normal distributed according to D_wo.
vec3 sggx_sample_vndf(const SggxNdf& ndf, const vec3& wo, double u1, double u2);

// Adds alpha^2 times the largest eigenvalue to the two smaller ones.
SggxNdf sggx_roughen(const SggxNdf& ndf, double alpha);

}  // namespace gaussrt
