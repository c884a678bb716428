// Small fixed-size vector math, quaternions and random numbers used across
// the renderer. Everything is double precision; images convert on output.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace gaussrt {

inline constexpr double pi      = std::numbers::pi;
inline constexpr double inv_pi  = 1.0 / std::numbers::pi;
inline constexpr double inf     = std::numeric_limits<double>::infinity();

// -----------------------------------------------------------------------------
// VECTORS
// -----------------------------------------------------------------------------

struct vec2 {
  double x = 0, y = 0;
};

struct vec3 {
  double x = 0, y = 0, z = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double  operator[](int i) const {
    return i == 0 ? x : (i == 1 ? y : z);
  }
  friend constexpr bool operator==(const vec3&, const vec3&) = default;
};

constexpr vec3 operator-(const vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr vec3 operator+(const vec3& a, const vec3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
constexpr vec3 operator-(const vec3& a, const vec3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
constexpr vec3 operator*(const vec3& a, const vec3& b) {
  return {a.x * b.x, a.y * b.y, a.z * b.z};
}
constexpr vec3 operator/(const vec3& a, const vec3& b) {
  return {a.x / b.x, a.y / b.y, a.z / b.z};
}
constexpr vec3 operator*(const vec3& a, double b) {
  return {a.x * b, a.y * b, a.z * b};
}
constexpr vec3 operator*(double a, const vec3& b) { return b * a; }
constexpr vec3 operator/(const vec3& a, double b) {
  return {a.x / b, a.y / b, a.z / b};
}
constexpr vec3& operator+=(vec3& a, const vec3& b) { return a = a + b; }
constexpr vec3& operator-=(vec3& a, const vec3& b) { return a = a - b; }
constexpr vec3& operator*=(vec3& a, const vec3& b) { return a = a * b; }
constexpr vec3& operator*=(vec3& a, double b) { return a = a * b; }
constexpr vec3& operator/=(vec3& a, double b) { return a = a / b; }

constexpr double dot(const vec3& a, const vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
constexpr vec3 cross(const vec3& a, const vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const vec3& a) { return std::sqrt(dot(a, a)); }
inline vec3   normalize(const vec3& a) {
  auto l = length(a);
  return l > 0 ? a / l : a;
}
constexpr vec3 min(const vec3& a, const vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
constexpr vec3 max(const vec3& a, const vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
constexpr double max_component(const vec3& a) {
  return std::max(a.x, std::max(a.y, a.z));
}
constexpr double min_component(const vec3& a) {
  return std::min(a.x, std::min(a.y, a.z));
}
constexpr double luminance(const vec3& rgb) {
  return 0.2126 * rgb.x + 0.7152 * rgb.y + 0.0722 * rgb.z;
}
inline bool isfinite(const vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}
constexpr vec3 lerp(const vec3& a, const vec3& b, double t) {
  return a * (1 - t) + b * t;
}
constexpr vec3 reflect(const vec3& w, const vec3& n) {
  return -w + 2 * dot(n, w) * n;
}

// -----------------------------------------------------------------------------
// MATRICES
// -----------------------------------------------------------------------------

// Row-major 3x3 matrix.
struct mat3 {
  std::array<vec3, 3> rows = {vec3{1, 0, 0}, vec3{0, 1, 0}, vec3{0, 0, 1}};

  constexpr vec3&       operator[](int i) { return rows[i]; }
  constexpr const vec3& operator[](int i) const { return rows[i]; }
  constexpr vec3        column(int j) const {
    return {rows[0][j], rows[1][j], rows[2][j]};
  }
};

constexpr vec3 operator*(const mat3& m, const vec3& v) {
  return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}
constexpr mat3 transpose(const mat3& m) {
  return {{m.column(0), m.column(1), m.column(2)}};
}
constexpr mat3 operator*(const mat3& a, const mat3& b) {
  auto bt = transpose(b);
  return {{vec3{dot(a[0], bt[0]), dot(a[0], bt[1]), dot(a[0], bt[2])},
      vec3{dot(a[1], bt[0]), dot(a[1], bt[1]), dot(a[1], bt[2])},
      vec3{dot(a[2], bt[0]), dot(a[2], bt[1]), dot(a[2], bt[2])}}};
}
constexpr mat3 from_columns(const vec3& a, const vec3& b, const vec3& c) {
  return transpose(mat3{{a, b, c}});
}
constexpr mat3 diagonal(const vec3& d) {
  return {{vec3{d.x, 0, 0}, vec3{0, d.y, 0}, vec3{0, 0, d.z}}};
}

// Symmetric 3x3 matrix stored as (xx, yy, zz, xy, xz, yz).
struct sym3 {
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
};

constexpr vec3 operator*(const sym3& s, const vec3& v) {
  return {s.xx * v.x + s.xy * v.y + s.xz * v.z,
      s.xy * v.x + s.yy * v.y + s.yz * v.z,
      s.xz * v.x + s.yz * v.y + s.zz * v.z};
}
constexpr double quadratic_form(const sym3& s, const vec3& v) {
  return dot(v, s * v);
}
constexpr double determinant(const sym3& s) {
  return s.xx * (s.yy * s.zz - s.yz * s.yz) -
         s.xy * (s.xy * s.zz - s.yz * s.xz) +
         s.xz * (s.xy * s.yz - s.yy * s.xz);
}
// R diag(d) R^T
constexpr sym3 rotate_diagonal(const mat3& r, const vec3& d) {
  auto entry = [&](int i, int j) {
    return r[i][0] * d.x * r[j][0] + r[i][1] * d.y * r[j][1] +
           r[i][2] * d.z * r[j][2];
  };
  return {entry(0, 0), entry(1, 1), entry(2, 2), entry(0, 1), entry(0, 2),
      entry(1, 2)};
}

// -----------------------------------------------------------------------------
// QUATERNIONS
// -----------------------------------------------------------------------------

// Rotation quaternion (w, x, y, z). Non-unit quaternions are treated as their
// normalized rotation by to_matrix().
struct quat {
  double w = 1, x = 0, y = 0, z = 0;
  friend constexpr bool operator==(const quat&, const quat&) = default;
};

constexpr double norm2(const quat& q) {
  return q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
}
inline double norm(const quat& q) { return std::sqrt(norm2(q)); }
inline quat   normalize(const quat& q) {
  auto n = norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

// Homogeneous form: exact rotation for any nonzero q.
constexpr mat3 to_matrix(const quat& q) {
  auto [w, x, y, z] = q;
  auto n            = norm2(q);
  return {{vec3{w * w + x * x - y * y - z * z, 2 * (x * y - w * z),
               2 * (x * z + w * y)} / n,
      vec3{2 * (x * y + w * z), w * w - x * x + y * y - z * z,
          2 * (y * z - w * x)} / n,
      vec3{2 * (x * z - w * y), 2 * (y * z + w * x),
          w * w - x * x - y * y + z * z} / n}};
}

// Quaternion of a proper rotation matrix (Shepperd's method).
inline quat from_matrix(const mat3& m) {
  auto trace = m[0][0] + m[1][1] + m[2][2];
  quat q;
  if (trace > 0) {
    auto s = std::sqrt(trace + 1) * 2;
    q      = {s / 4, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s,
        (m[1][0] - m[0][1]) / s};
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    auto s = std::sqrt(1 + m[0][0] - m[1][1] - m[2][2]) * 2;
    q      = {(m[2][1] - m[1][2]) / s, s / 4, (m[0][1] + m[1][0]) / s,
        (m[0][2] + m[2][0]) / s};
  } else if (m[1][1] > m[2][2]) {
    auto s = std::sqrt(1 + m[1][1] - m[0][0] - m[2][2]) * 2;
    q      = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, s / 4,
        (m[1][2] + m[2][1]) / s};
  } else {
    auto s = std::sqrt(1 + m[2][2] - m[0][0] - m[1][1]) * 2;
    q      = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s,
        (m[1][2] + m[2][1]) / s, s / 4};
  }
  return normalize(q);
}

// -----------------------------------------------------------------------------
// FRAMES
// -----------------------------------------------------------------------------

// Orthonormal basis with z = n.
struct frame3 {
  vec3 x, y, z;
};

inline frame3 basis_fromz(const vec3& n) {
  auto sign = std::copysign(1.0, n.z);
  auto a    = -1 / (sign + n.z);
  auto b    = n.x * n.y * a;
  return {{1 + sign * n.x * n.x * a, sign * b, -sign * n.x},
      {b, sign + n.y * n.y * a, -n.y}, n};
}
inline vec3 to_local(const frame3& f, const vec3& v) {
  return {dot(f.x, v), dot(f.y, v), dot(f.z, v)};
}
inline vec3 to_world(const frame3& f, const vec3& v) {
  return f.x * v.x + f.y * v.y + f.z * v.z;
}

// -----------------------------------------------------------------------------
// BOUNDS
// -----------------------------------------------------------------------------

struct bbox3 {
  vec3 min = {inf, inf, inf};
  vec3 max = {-inf, -inf, -inf};

  bool empty() const {
    return min.x > max.x || min.y > max.y || min.z > max.z;
  }
  vec3 diagonal() const { return max - min; }
  double surface_area() const {
    if (empty()) return 0;
    auto d = diagonal();
    return 2 * (d.x * d.y + d.x * d.z + d.y * d.z);
  }
};

inline bbox3 merge(const bbox3& a, const bbox3& b) {
  return {gaussrt::min(a.min, b.min), gaussrt::max(a.max, b.max)};
}

// Slab test; returns false on a miss. [t0, t1] is the input interval and is
// narrowed in place.
inline bool intersect_bbox(const bbox3& box, const vec3& origin,
    const vec3& dir, double& t0, double& t1) {
  if (box.empty()) return false;
  for (int axis = 0; axis < 3; axis++) {
    if (dir[axis] == 0) {
      if (origin[axis] < box.min[axis] || origin[axis] > box.max[axis])
        return false;
      continue;
    }
    auto inv   = 1 / dir[axis];
    auto tnear = (box.min[axis] - origin[axis]) * inv;
    auto tfar  = (box.max[axis] - origin[axis]) * inv;
    if (tnear > tfar) std::swap(tnear, tfar);
    t0 = std::max(t0, tnear);
    t1 = std::min(t1, tfar);
    if (t0 > t1) return false;
  }
  return true;
}

// -----------------------------------------------------------------------------
// RANDOM NUMBERS
// -----------------------------------------------------------------------------

// PCG32, the generator used by most research renderers.
struct Rng {
  uint64_t state = 0x853c49e6748fea9bULL;
  uint64_t inc   = 0xda3e39cb94b95bdbULL;

  uint32_t next_u32() {
    auto old   = state;
    state      = old * 6364136223846793005ULL + inc;
    auto xorsh = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    auto rot   = static_cast<uint32_t>(old >> 59u);
    return (xorsh >> rot) | (xorsh << ((~rot + 1u) & 31));
  }
  // Uniform in [0, 1).
  double uniform() {
    return std::min(next_u32() * 0x1p-32, 1.0 - 0x1p-53);
  }
  vec2 uniform2() {
    auto a = uniform();
    return {a, uniform()};
  }
};

inline Rng make_rng(uint64_t seed, uint64_t stream = 1) {
  Rng rng;
  rng.state = 0;
  rng.inc   = (stream << 1u) | 1u;
  rng.next_u32();
  rng.state += seed;
  rng.next_u32();
  return rng;
}

// splitmix64 finalizer, used to derive independent seeds.
constexpr uint64_t hash64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
constexpr uint64_t hash_combine(uint64_t a, uint64_t b) {
  return hash64(a ^ (hash64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// -----------------------------------------------------------------------------
// WARPS
// -----------------------------------------------------------------------------

inline vec3 sample_sphere(const vec2& u) {
  auto z   = 1 - 2 * u.y;
  auto r   = std::sqrt(std::max(0.0, 1 - z * z));
  auto phi = 2 * pi * u.x;
  return {r * std::cos(phi), r * std::sin(phi), z};
}
inline double sample_sphere_pdf() { return 1 / (4 * pi); }

inline vec3 sample_hemisphere_cos(const vec2& u) {
  auto r   = std::sqrt(u.y);
  auto phi = 2 * pi * u.x;
  return {r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1 - u.y))};
}
inline vec3 sample_hemisphere_cos(const vec3& normal, const vec2& u) {
  return to_world(basis_fromz(normal), sample_hemisphere_cos(u));
}
inline double sample_hemisphere_cos_pdf(const vec3& normal, const vec3& w) {
  auto c = dot(normal, w);
  return c <= 0 ? 0 : c * inv_pi;
}

}  // namespace gaussrt
