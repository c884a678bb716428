#include <doctest.h>

#include "gaussrt/phase.h"
#include "gaussrt/sggx.h"
#include "gaussrt/validate.h"

using namespace gaussrt;

namespace {

Material diffuse(vec3 color, SggxNdf ndf) {
  Material m;
  m.bsdf.base_color = color;
  m.bsdf.metallic   = 0;
  m.bsdf.specular   = 0;
  m.bsdf.roughness  = 1;
  m.ndf             = ndf;
  return m;
}

Material rough_metal(double roughness) {
  Material m;
  m.bsdf.base_color = {0.9, 0.7, 0.5};
  m.bsdf.metallic   = 1;
  m.bsdf.roughness  = roughness;
  return m;
}

}  // namespace

TEST_CASE("projected area") {
  auto rng = make_rng(31);
  for (int i = 0; i < 10; i++)
    CHECK(sggx_projected_area(sggx_isotropic(), sample_sphere(rng.uniform2())) ==
          doctest::Approx(1).epsilon(1e-12));
  SggxNdf flat{quat{}, {1, 1, 0}};
  CHECK(sggx_projected_area(flat, {0, 0, 1}) == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("projected area equals the normal-weighted NDF integral") {
  auto rng = make_rng(32);
  for (int i = 0; i < 5; i++) {
    SggxNdf ndf{normalize(quat{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}),
        {0.1 + rng.uniform(), 0.1 + rng.uniform(), 0.1 + rng.uniform()}};
    auto w = sample_sphere(rng.uniform2());
    // midpoint rule in (cos theta, phi), equal-area cells
    int    n   = 800;
    double sum = 0;
    for (int a = 0; a < n; a++)
      for (int b = 0; b < 2 * n; b++) {
        auto z = -1 + 2 * (a + 0.5) / n, phi = pi * (b + 0.5) / n;
        auto r = std::sqrt(1 - z * z);
        vec3 m = {r * std::cos(phi), r * std::sin(phi), z};
        sum += sggx_ndf(ndf, m) * std::max(0.0, dot(w, m));
      }
    sum *= 4 * pi / (2.0 * n * n);
    CHECK(sum == doctest::Approx(sggx_projected_area(ndf, w)).epsilon(1e-3));
  }
}

TEST_CASE("VNDF sampling") {
  auto rng = make_rng(33);
  SUBCASE("isotropic samples are cosine-distributed about wo") {
    auto   wo = normalize(vec3{0.3, -0.2, 0.9});
    double mean_cos = 0, below = 0;
    int    n = 1000000;
    for (int i = 0; i < n; i++) {
      auto m = sggx_sample_vndf(sggx_isotropic(), wo, rng.uniform(), rng.uniform());
      auto c = dot(m, wo);
      mean_cos += c;
      if (c < 0) below++;
    }
    CHECK(below == 0);
    // E[cos] = 2/3 under a cosine lobe; standard error ~2.4e-4
    CHECK(mean_cos / n == doctest::Approx(2.0 / 3).epsilon(1.5e-3));
  }
  SUBCASE("near-delta surface concentrates at its normal") {
    auto   g   = normalize(vec3{0.2, 0.4, 0.9});
    auto   ndf = sggx_surface(g, 1e-6);
    auto   wo  = normalize(vec3{-0.3, 0.1, 0.8});
    double sum = 0;
    for (int i = 0; i < 100000; i++)
      sum += std::abs(dot(sggx_sample_vndf(ndf, wo, rng.uniform(), rng.uniform()), g));
    CHECK(sum / 100000 > 0.999);
  }
  SUBCASE("histogram matches the VNDF on a 64x64 sphere grid") {
    SggxNdf ndf{normalize(quat{0.9, 0.2, -0.3, 0.1}), {0.2, 0.5, 1}};
    auto    wo = normalize(vec3{0.5, 0.5, 0.2});
    int     nb = 64, n = 1000000;
    std::vector<double> hist(nb * nb);
    for (int i = 0; i < n; i++) {
      auto m   = sggx_sample_vndf(ndf, wo, rng.uniform(), rng.uniform());
      auto a   = std::clamp(int((m.z + 1) / 2 * nb), 0, nb - 1);
      auto phi = std::atan2(m.y, m.x) + pi;
      auto b   = std::clamp(int(phi / (2 * pi) * nb), 0, nb - 1);
      hist[a * nb + b] += 1.0 / n;
    }
    // expected bin masses from the density, 4x4 midpoints per bin
    double tv = 0, total = 0;
    std::vector<double> expect(nb * nb);
    for (int a = 0; a < nb; a++)
      for (int b = 0; b < nb; b++) {
        double sum = 0;
        for (int i = 0; i < 4; i++)
          for (int j = 0; j < 4; j++) {
            auto z = -1 + 2 * (a + (i + 0.5) / 4) / nb;
            auto phi = 2 * pi * (b + (j + 0.5) / 4) / nb - pi;
            auto r = std::sqrt(1 - z * z);
            sum += sggx_vndf(ndf, wo, {r * std::cos(phi), r * std::sin(phi), z});
          }
        expect[a * nb + b] = sum / 16 * 4 * pi / (nb * nb);
        total += expect[a * nb + b];
      }
    for (int k = 0; k < nb * nb; k++) tv += 0.5 * std::abs(hist[k] - expect[k]);
    CHECK(total == doctest::Approx(1).epsilon(5e-3));
    CHECK(tv < 0.02);
  }
}

TEST_CASE("VNDF integrates to one") {
  auto rng = make_rng(34);
  for (int i = 0; i < 5; i++) {
    SggxNdf ndf{normalize(quat{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}),
        {0.01 + rng.uniform(), 0.01 + rng.uniform(), 0.01 + rng.uniform()}};
    CHECK(vndf_quadrature(ndf, sample_sphere(rng.uniform2())) ==
          doctest::Approx(1).epsilon(1e-3));
  }
}

TEST_CASE("stochastic phase evaluation") {
  auto rng = make_rng(35);
  SUBCASE("delta NDF with a diffuse base is a Lambertian surface") {
    auto g  = normalize(vec3{0.1, 0.2, 1});
    auto m  = diffuse({0.6, 0.5, 0.4}, sggx_surface(g, 0));
    auto wi = normalize(vec3{-0.4, 0.3, 0.8}), wo = normalize(vec3{0.5, 0.1, 0.7});
    vec3 sum;
    int  n = 100000;
    for (int i = 0; i < n; i++) sum += phase_eval_stochastic(m, wi, wo, rng);
    // D_wo is a point mass at g, so f_p = albedo / pi * <g, wi>
    auto expect = m.bsdf.base_color * (std::max(0.0, dot(g, wi)) / pi);
    for (int k = 0; k < 3; k++) CHECK(sum[k] / n == doctest::Approx(expect[k]).epsilon(0.01));
  }
  SUBCASE("black dielectric base scatters nothing") {
    auto m = diffuse({0, 0, 0}, sggx_isotropic());
    for (int i = 0; i < 1000; i++) {
      auto f = phase_eval_stochastic(
          m, sample_sphere(rng.uniform2()), sample_sphere(rng.uniform2()), rng);
      CHECK(max_component(f) == 0);
    }
  }
  SUBCASE("isotropic NDF with a rough specular base matches quadrature") {
    auto m  = rough_metal(0.5);
    auto wi = normalize(vec3{-0.5, 0.3, 0.8}), wo = normalize(vec3{0.4, 0.1, 0.9});
    auto truth = phase_quadrature(m, wi, wo);
    vec3 sum;
    int  n = 1000000;
    for (int i = 0; i < n; i++) sum += phase_eval_stochastic(m, wi, wo, rng);
    for (int k = 0; k < 3; k++) CHECK(sum[k] / n == doctest::Approx(truth[k]).epsilon(0.02));
  }
  SUBCASE("twelve-cell grid with variance no larger than naive") {
    auto check = check_phase(100000, 36);
    CHECK(check.cells.size() == 12);
    for (auto& c : check.cells) {
      INFO(c.name);
      CHECK(c.rel_error < 0.02);
      CHECK(c.variance_ratio <= 1);
    }
  }
}

TEST_CASE("phase sampling") {
  auto rng = make_rng(37);
  SUBCASE("mirror limit reflects about the surface normal") {
    auto g  = normalize(vec3{0.1, -0.2, 1});
    auto m  = rough_metal(0);
    m.ndf   = sggx_surface(g, 0);
    auto wo = normalize(vec3{0.3, 0.4, 0.8});
    auto r  = g * (2 * dot(wo, g)) - wo;
    for (int i = 0; i < 100; i++) {
      auto s = phase_sample(m, wo, rng);
      CHECK(length(s.wi - r) < 1e-3);
    }
  }
  SUBCASE("diffuse base weights average to the albedo") {
    auto m  = diffuse({0.7, 0.7, 0.7}, sggx_isotropic());
    auto wo = normalize(vec3{0.2, 0.1, 0.9});
    double sum_w = 0, sum_e = 0;
    int    n = 400000;
    for (int i = 0; i < n; i++) {
      sum_w += phase_sample(m, wo, rng).weight.x;
      auto wi = sample_sphere(rng.uniform2());
      sum_e += phase_eval_stochastic(m, wi, wo, rng).x / sample_sphere_pdf();
    }
    // every microflake's Lambertian lobe integrates to the albedo
    CHECK(sum_w / n == doctest::Approx(0.7).epsilon(0.02));
    CHECK(sum_e / n == doctest::Approx(0.7).epsilon(0.02));
  }
  SUBCASE("sampled weights reproduce the integral of the phase function") {
    auto m  = rough_metal(0.4);
    m.ndf   = {normalize(quat{0.8, 0.3, 0.1, 0.2}), {0.3, 0.6, 1}};
    auto wo = normalize(vec3{-0.1, 0.6, 0.7});
    double sum_w = 0, sum_e = 0;
    int    n = 400000;
    for (int i = 0; i < n; i++) {
      sum_w += luminance(phase_sample(m, wo, rng).weight);
      auto wi = sample_sphere(rng.uniform2());
      sum_e += luminance(phase_eval_stochastic(m, wi, wo, rng)) / sample_sphere_pdf();
    }
    CHECK(sum_w / n == doctest::Approx(sum_e / n).epsilon(0.02));
  }
}

TEST_CASE("roughened SGGX and the approximate pdf") {
  SggxNdf ndf{quat{}, {0.04, 0.04, 1}};
  auto    same = sggx_roughen(ndf, 0);
  CHECK(same.eigenvalues.x == 0.04);
  auto r = sggx_roughen(ndf, 0.5);
  CHECK(r.eigenvalues.x == doctest::Approx(0.29));
  CHECK(r.eigenvalues.y == doctest::Approx(0.29));
  CHECK(r.eigenvalues.z == doctest::Approx(1));

  auto rng = make_rng(38);
  for (int i = 0; i < 6; i++) {
    Material m;
    m.bsdf.base_color = {rng.uniform(), rng.uniform(), rng.uniform()};
    m.bsdf.metallic   = rng.uniform();
    m.bsdf.roughness  = 0.1 + 0.9 * rng.uniform();
    m.ndf = {normalize(quat{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}),
        {0.05 + rng.uniform(), 0.05 + rng.uniform(), 0.05 + rng.uniform()}};
    auto   wo  = sample_sphere(rng.uniform2());
    double sum = 0;
    int    n   = 200000;
    for (int k = 0; k < n; k++) {
      auto wi  = sample_sphere(rng.uniform2());
      auto pdf = phase_pdf_approx(m, wi, wo);
      CHECK_FALSE(pdf < 0);
      sum += pdf / sample_sphere_pdf();
    }
    CHECK(sum / n > 0.5);
    CHECK(sum / n < 2.0);
  }
}
