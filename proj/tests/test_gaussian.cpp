#include <doctest.h>

#include <Eigen/Dense>

#include "gaussrt/gaussian.h"
#include "gaussrt/special.h"
#include "gaussrt/validate.h"

using namespace gaussrt;

namespace {

quat random_quat(Rng& rng) {
  return normalize(quat{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5,
      rng.uniform() - 0.5});
}

GaussianPrimitive random_prim(Rng& rng) {
  GaussianPrimitive g;
  g.mu        = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
  g.rot       = random_quat(rng);
  g.scales    = {0.1 + rng.uniform(), 0.1 + rng.uniform(), 0.1 + rng.uniform()};
  g.magnitude = 0.2 + rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("density at the peak of a normalized isotropic primitive is one") {
  GaussianPrimitive g;
  g.magnitude = std::pow(2 * pi, 1.5);
  CHECK(eval_density(g, g.mu) == doctest::Approx(1).epsilon(1e-14));
}

TEST_CASE("one standard deviation along an eigenaxis drops by exp(-1/2)") {
  auto rng = make_rng(1);
  for (int i = 0; i < 20; i++) {
    auto g    = random_prim(rng);
    auto peak = eval_density(g, g.mu);
    auto r    = to_matrix(g.rot);
    for (int k = 0; k < 3; k++) {
      auto axis = r.column(k);
      auto x    = g.mu + axis * g.scales[k];
      CHECK(eval_density(g, x) == doctest::Approx(peak * std::exp(-0.5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("density matches dense matrix evaluation") {
  auto rng = make_rng(2);
  for (int i = 0; i < 200; i++) {
    auto g = random_prim(rng);
    vec3 x = {2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1};

    Eigen::Quaterniond q(g.rot.w, g.rot.x, g.rot.y, g.rot.z);
    Eigen::Matrix3d    rot = q.toRotationMatrix();
    Eigen::Vector3d    s2(g.scales.x * g.scales.x, g.scales.y * g.scales.y,
           g.scales.z * g.scales.z);
    Eigen::Matrix3d cov = rot * s2.asDiagonal() * rot.transpose();
    Eigen::Vector3d d(x.x - g.mu.x, x.y - g.mu.y, x.z - g.mu.z);
    auto expect = g.magnitude / (std::pow(2 * pi, 1.5) * std::sqrt(cov.determinant())) *
                  std::exp(-0.5 * d.dot(cov.inverse() * d));
    CHECK(std::abs(eval_density(g, x) - expect) <= 1e-10 * expect);
  }
}

TEST_CASE("ray integral edge cases") {
  GaussianPrimitive g;
  g.magnitude = 2 * pi;
  SUBCASE("empty interval") {
    CHECK(ray_integral(g, {{0, 0, -3}, {0, 0, 1}, 1.5, 1.5}) == 0);
  }
  SUBCASE("infinite line through the center") {
    Ray ray{{0, 0, -3}, {0, 0, 1}, -inf, inf};
    CHECK(ray_integral(g, ray) == doctest::Approx(1).epsilon(1e-12));
    CHECK(quadrature_ray_integral(g, ray) == doctest::Approx(1).epsilon(1e-10));
  }
  SUBCASE("line offset by one") {
    Ray ray{{1, 0, -3}, {0, 0, 1}, -inf, inf};
    CHECK(ray_integral(g, ray) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(quadrature_ray_integral(g, ray) == doctest::Approx(std::exp(-0.5)).epsilon(1e-10));
  }
}

TEST_CASE("ray integral agrees with quadrature on random cases") {
  CHECK(check_ray_integrals(200, 3) < 1e-8);
}

TEST_CASE("ray integral is additive over split intervals") {
  auto rng = make_rng(4);
  for (int i = 0; i < 100; i++) {
    auto g   = random_prim(rng);
    auto dir = sample_sphere(rng.uniform2());
    Ray  ray{g.mu - dir * 3, dir, 0, 6};
    auto mid  = 6 * rng.uniform();
    auto full = ray_integral(g, ray);
    auto a    = ray_integral(g, {ray.origin, dir, 0, mid});
    auto b    = ray_integral(g, {ray.origin, dir, mid, 6});
    CHECK(a + b == doctest::Approx(full).epsilon(1e-12));
  }
}

TEST_CASE("inverting the ray integral") {
  auto rng = make_rng(5);
  SUBCASE("zero mass returns t0") {
    auto g = random_prim(rng);
    Ray  ray{g.mu - vec3{0, 0, 3}, {0, 0, 1}, 0.5, 6};
    CHECK(invert_ray_integral(g, ray, 0.5, 0) == 0.5);
  }
  SUBCASE("full mass returns t1") {
    auto g    = random_prim(rng);
    Ray  ray{g.mu - vec3{0, 0, 3}, {0, 0, 1}, 0, 3.5};
    auto full = ray_integral(g, ray);
    CHECK(invert_ray_integral(g, ray, 0, full) == doctest::Approx(3.5).epsilon(1e-6));
    CHECK_THROWS_AS(invert_ray_integral(g, ray, 0, full * 1.01), std::out_of_range);
  }
  SUBCASE("round trip at half mass") {
    for (int i = 0; i < 100; i++) {
      auto g   = random_prim(rng);
      auto dir = sample_sphere(rng.uniform2());
      Ray  ray{g.mu - dir * 3 + vec3{0.1, -0.1, 0.05}, dir, 2 * rng.uniform(), 6};
      auto target = 0.5 * ray_integral(g, ray);
      auto t      = invert_ray_integral(g, ray, ray.t0, target);
      CHECK(ray_integral(g, {ray.origin, dir, ray.t0, t}) ==
            doctest::Approx(target).epsilon(1e-9));
    }
  }
}

TEST_CASE("multi-primitive inversion") {
  auto rng = make_rng(6);
  SUBCASE("single primitive reduces to the one-primitive inverse") {
    auto g   = random_prim(rng);
    Ray  ray{g.mu - vec3{0, 0, 4}, {0, 0, 1}, 0, 8};
    auto half_total = 0.5 * ray_integral(g, ray);
    auto u          = 0.4 * half_total;
    auto t          = solve_multi_inversion(std::vector{g}, ray, 0, 8, u);
    CHECK(t == doctest::Approx(invert_ray_integral(g, ray, 0, 2 * u)).epsilon(1e-6));
  }
  SUBCASE("two identical primitives split at the center") {
    GaussianPrimitive g;
    Ray  ray{{0, 0, -4}, {0, 0, 1}, 0, 8};
    auto total = ray_integral(g, ray); // 1/2 (I + I)
    auto t     = solve_multi_inversion(std::vector{g, g}, ray, 0, 8, total / 2);
    CHECK(t == doctest::Approx(4).epsilon(1e-9));
  }
  SUBCASE("five random primitives against ray marching") {
    std::vector<GaussianPrimitive> prims;
    Ray                            ray{{0, 0, -4}, {0, 0, 1}, 0, 8};
    for (int i = 0; i < 5; i++) {
      auto g = random_prim(rng);
      g.mu   = {0.3 * (rng.uniform() - 0.5), 0.3 * (rng.uniform() - 0.5), 2 * rng.uniform() - 1};
      prims.push_back(g);
    }
    double total = 0;
    for (auto& g : prims) total += 0.5 * ray_integral(g, ray);
    auto u = 0.6 * total;
    auto t = solve_multi_inversion(prims, ray, 0, 8, u);
    // midpoint rule, 1e6 steps up to t
    int    steps = 1000000;
    double h = t / steps, f = 0;
    for (int s = 0; s < steps; s++) {
      auto x = ray_point(ray, (s + 0.5) * h);
      for (auto& g : prims) f += 0.5 * eval_density(g, x) * h;
    }
    CHECK(std::abs(f - u) < 1e-6);
  }
}

TEST_CASE("bounding shapes at the default cutoff") {
  CHECK(std::sqrt(cutoff_radius2(0.01)) == doctest::Approx(3.0349).epsilon(1e-4));
  GaussianPrimitive g;
  g.mu     = {1, 2, 3};
  g.scales = {0.5, 0.5, 0.5};
  auto b   = bounding_shapes(g, 0.01);
  auto r   = 0.5 * std::sqrt(cutoff_radius2(0.01));
  for (int k = 0; k < 3; k++) {
    CHECK(b.box.min[k] == doctest::Approx(g.mu[k] - r).epsilon(1e-12));
    CHECK(b.box.max[k] == doctest::Approx(g.mu[k] + r).epsilon(1e-12));
  }
}

TEST_CASE("bounding box contains and touches the rotated ellipsoid") {
  auto rng = make_rng(7);
  for (int i = 0; i < 5; i++) {
    auto g      = random_prim(rng);
    auto shapes = bounding_shapes(g, 0.01);
    auto radius = std::sqrt(cutoff_radius2(0.01));
    auto r      = to_matrix(g.rot);
    vec3 lo = {inf, inf, inf}, hi = {-inf, -inf, -inf};
    for (int s = 0; s < 100000; s++) {
      auto u = sample_sphere(rng.uniform2());
      auto p = g.mu + r * (vec3{u.x * g.scales.x, u.y * g.scales.y, u.z * g.scales.z} * radius);
      lo     = min(lo, p);
      hi     = max(hi, p);
    }
    for (int k = 0; k < 3; k++) {
      CHECK(lo[k] >= shapes.box.min[k] - 1e-12);
      CHECK(hi[k] <= shapes.box.max[k] + 1e-12);
      // sampled extremes approach the box faces
      auto extent = shapes.box.max[k] - shapes.box.min[k];
      CHECK(lo[k] - shapes.box.min[k] < 2e-3 * extent);
      CHECK(shapes.box.max[k] - hi[k] < 2e-3 * extent);
    }
  }
}

TEST_CASE("primitive validation") {
  GaussianPrimitive g;
  CHECK_NOTHROW(validate(g));
  g.scales.y = 0;
  CHECK_THROWS_AS(validate(g), invalid_primitive);
  g          = {};
  g.rot      = {2, 0, 0, 0};
  CHECK_THROWS_AS(validate(g), invalid_primitive);
  g           = {};
  g.magnitude = -1;
  CHECK_THROWS_AS(validate(g), invalid_primitive);
}

TEST_CASE("flat primitives are clamped to a minimum aspect ratio") {
  GaussianPrimitive g;
  g.scales = {1, 1, 0};
  auto c   = clamp_flat(g);
  CHECK(c.scales.z == doctest::Approx(1e-4));
  CHECK(c.scales.x == 1);
}

TEST_CASE("special functions") {
  for (double y : {-0.999, -0.5, 0.0, 0.3, 0.9, 0.999999})
    CHECK(std::erf(erfinv(y)) == doctest::Approx(y).epsilon(1e-13));
  CHECK(erf_diff(1, 2) == doctest::Approx(std::erf(2) - std::erf(1)).epsilon(1e-14));
  // cancellation-free in the tails
  CHECK(erf_diff(6, 7) == doctest::Approx(std::erfc(6) - std::erfc(7)).epsilon(1e-10));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}
