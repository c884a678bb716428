#include <doctest.h>

#include <algorithm>
#include <set>

#include "gaussrt/transport.h"
#include "gaussrt/validate.h"

using namespace gaussrt;

namespace {

std::vector<GaussianPrimitive> random_cloud(int count, double spread, Rng& rng) {
  std::vector<GaussianPrimitive> prims;
  for (int i = 0; i < count; i++) {
    GaussianPrimitive g;
    g.mu = {spread * (2 * rng.uniform() - 1), spread * (2 * rng.uniform() - 1),
        spread * (2 * rng.uniform() - 1)};
    g.rot = normalize(quat{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5,
        rng.uniform() - 0.5});
    g.scales = {0.01 + 0.05 * rng.uniform(), 0.01 + 0.05 * rng.uniform(),
        0.01 + 0.05 * rng.uniform()};
    g.magnitude = 1e-3;
    prims.push_back(g);
  }
  return prims;
}

Ray random_ray(Rng& rng, double spread) {
  auto dir    = sample_sphere(rng.uniform2());
  vec3 target = {spread * (rng.uniform() - 0.5), spread * (rng.uniform() - 0.5),
      spread * (rng.uniform() - 0.5)};
  return {target - dir * 3 * spread, dir, 0, inf};
}

// Free-flight sampling with one primitive of known mass along an infinite ray.
PrimitiveSet single(double half_mass, Ray& ray) {
  GaussianPrimitive g;
  ray         = {{0, 0, -5}, {0, 0, 1}};
  g.magnitude = magnitude_for_half_mass(g, ray, half_mass);
  return make_primitive_set(std::vector{g});
}

}  // namespace

TEST_CASE("kd-tree on trivial inputs") {
  auto empty = make_primitive_set(std::vector<GaussianPrimitive>{});
  int  visits = 0;
  empty.accel.traverse({0, 0, -5}, {0, 0, 1}, 0, inf, [&](auto leaf, double, double) {
    visits += int(leaf.size());
    return true;
  });
  CHECK(visits == 0);

  auto one = make_primitive_set(std::vector{GaussianPrimitive{}});
  REQUIRE(one.accel.nodes.size() == 1);
  CHECK(one.accel.nodes[0].is_leaf());
  CHECK(one.accel.prim_ids == std::vector<int>{0});
}

TEST_CASE("kd-tree finds exactly the boxes a ray crosses") {
  auto rng   = make_rng(11);
  auto prims = random_cloud(10000, 1, rng);
  auto set   = make_primitive_set(prims);
  for (int r = 0; r < 1000; r++) {
    auto          ray = random_ray(rng, 2);
    std::set<int> found, brute;
    set.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1, [&](auto leaf, double, double) {
      for (auto id : leaf) {
        double a = ray.t0, b = ray.t1;
        if (intersect_bbox(set.prims[id].bounds, ray.origin, ray.dir, a, b)) found.insert(id);
      }
      return true;
    });
    for (int id = 0; id < int(prims.size()); id++) {
      double a = ray.t0, b = ray.t1;
      if (intersect_bbox(set.prims[id].bounds, ray.origin, ray.dir, a, b)) brute.insert(id);
    }
    CHECK(found == brute);
  }
}

TEST_CASE("kd-tree leaves tile the ray front to back") {
  auto rng = make_rng(12);
  for (int s = 0; s < 20; s++) {
    auto prims = random_cloud(500, 1, rng);
    auto set   = make_primitive_set(prims);
    for (int r = 0; r < 50; r++) {
      auto   ray = random_ray(rng, 1);
      double a = ray.t0, b = ray.t1;
      if (!intersect_bbox(set.accel.bounds, ray.origin, ray.dir, a, b)) continue;
      double cursor = a;
      bool   ok     = true;
      set.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1, [&](auto, double ta, double tb) {
        ok     = ok && std::abs(ta - cursor) < 1e-9 && tb >= ta;
        cursor = tb;
        return true;
      });
      CHECK(ok);
      CHECK(cursor == doctest::Approx(b).epsilon(1e-9));
    }
  }
}

TEST_CASE("rays missing the scene visit nothing; near clusters come first") {
  auto rng   = make_rng(13);
  auto near  = random_cloud(50, 0.2, rng);
  auto far   = random_cloud(50, 0.2, rng);
  for (auto& g : far) g.mu.z += 5;
  auto all = near;
  all.insert(all.end(), far.begin(), far.end());
  auto set = make_primitive_set(all);

  int visits = 0;
  set.accel.traverse({10, 10, 10}, {1, 0, 0}, 0, inf, [&](auto, double, double) {
    visits++;
    return true;
  });
  CHECK(visits == 0);

  bool seen_far = false, near_after_far = false;
  set.accel.traverse({0, 0, -3}, {0, 0, 1}, 0, inf, [&](auto leaf, double, double) {
    for (auto id : leaf) {
      if (id >= 50) seen_far = true;
      else if (seen_far) near_after_far = true;
    }
    return true;
  });
  CHECK(seen_far);
  CHECK_FALSE(near_after_far);
}

TEST_CASE("segment partition") {
  SUBCASE("one covering interval") {
    std::vector<PrimInterval> iv = {{0, -1, 5}};
    auto segs = partition_segments(iv, 0, 4);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].active == std::vector<int>{0});
  }
  SUBCASE("two disjoint intervals leave a gap") {
    std::vector<PrimInterval> iv = {{0, 0, 1}, {1, 2, 3}};
    auto segs = partition_segments(iv, 0, 3);
    REQUIRE(segs.size() == 3);
    CHECK(segs[1].active.empty());
  }
  SUBCASE("random intervals match a dense scan") {
    auto rng = make_rng(14);
    std::vector<PrimInterval> iv;
    for (int i = 0; i < 20; i++) {
      auto a = 10 * rng.uniform();
      iv.push_back({i, a, a + 3 * rng.uniform()});
    }
    auto segs = partition_segments(iv, 0, 10);
    for (int k = 0; k < 10000; k++) {
      auto t = 10 * (k + 0.5) / 10000;
      std::vector<int> expect;
      for (auto& x : iv)
        if (t > x.t_start && t < x.t_end) expect.push_back(x.id);
      auto it = std::find_if(segs.begin(), segs.end(),
          [&](auto& s) { return t >= s.t_start && t < s.t_end; });
      REQUIRE(it != segs.end());
      auto got = it->active;
      std::sort(got.begin(), got.end());
      CHECK(got == expect);
    }
    for (size_t i = 1; i < segs.size(); i++) CHECK(segs[i].t_start == segs[i - 1].t_end);
  }
}

TEST_CASE("free-flight sampling") {
  SUBCASE("empty scene is background") {
    auto set = make_primitive_set(std::vector<GaussianPrimitive>{});
    for (double u : {0.0, 0.5, 0.999})
      CHECK_FALSE(sample_free_flight(set, {{0, 0, 0}, {0, 0, 1}}, u, 0.5).is_primitive());
  }
  SUBCASE("single primitive with half mass 0.3") {
    Ray  ray;
    auto set = single(0.3, ray);
    CHECK(sample_free_flight(set, ray, 0.2, 0.5).is_primitive());
    CHECK_FALSE(sample_free_flight(set, ray, 0.5, 0.5).is_primitive());
  }
  SUBCASE("identical saturating primitives split evenly") {
    auto c = ambiguous_corpus()[0];
    auto counts = sample_selection_counts(make_primitive_set(c.prims), c.ray, 1000000, 15);
    auto p      = normalize_counts(counts);
    CHECK(std::abs(p[0] - 0.5) < 0.005);
    CHECK(std::abs(p[1] - 0.5) < 0.005);
  }
  SUBCASE("excluded primitive is never chosen") {
    auto c   = ambiguous_corpus()[2];
    auto set = make_primitive_set(c.prims);
    auto rng = make_rng(16);
    for (int i = 0; i < 10000; i++)
      CHECK(sample_free_flight(set, c.ray, rng.uniform(), rng.uniform(), 1).primitive_id != 1);
  }
}

TEST_CASE("disambiguation") {
  SUBCASE("one primitive agrees with the one-primitive inverse") {
    GaussianPrimitive g;
    Ray  ray{{0, 0, -5}, {0, 0, 1}};
    g.magnitude = magnitude_for_half_mass(g, ray, 0.8);
    auto   set  = make_primitive_set(std::vector{g});
    auto   prof = ray_profile(set.prims[0], ray.origin, ray.dir);
    double ta, tb;
    prof.ellipsoid_interval(set.prims[0].cutoff2, ta, tb);
    std::vector<int>            ids     = {0};
    std::vector<ClippedProfile> clipped = {{prof, ta, tb}};
    double t_u = 0;
    auto   e   = disambiguate(set, ray, ids, clipped, ta, tb, 0.1, 0.4, 0.5,
            DisambiguationRule::local_density, &t_u);
    CHECK(e.primitive_id == 0);
    // 0.1 + 1/2 I(ta, t_u) = 0.4
    CHECK(0.5 * prof.integral(ta, t_u) == doctest::Approx(0.3).epsilon(1e-9));
  }
  SUBCASE("three overlapping primitives match the marching oracle") {
    auto rng = make_rng(17);
    auto c   = random_free_flight_case(rng, true);
    while (c.prims.size() < 3) c = random_free_flight_case(rng, true);
    auto counts = sample_selection_counts(make_primitive_set(c.prims), c.ray, 1000000, 18);
    CHECK(total_variation(normalize_counts(counts), marching_selection_oracle(c.prims, c.ray)) <
          0.01);
  }
  SUBCASE("interval mass rule is biased where local density is exact") {
    auto c      = ambiguous_corpus()[1]; // nested saturation
    auto set    = make_primitive_set(c.prims);
    auto oracle = marching_selection_oracle(c.prims, c.ray);
    auto exact  = normalize_counts(sample_selection_counts(set, c.ray, 400000, 19));
    auto biased = normalize_counts(sample_selection_counts(
        set, c.ray, 400000, 19, DisambiguationRule::interval_mass));
    CHECK(total_variation(exact, oracle) < 0.01);
    CHECK(total_variation(biased, oracle) > 0.02);
  }
}

TEST_CASE("transmittance evaluation") {
  SUBCASE("empty scene") {
    auto set = make_primitive_set(std::vector<GaussianPrimitive>{});
    CHECK(eval_transmittance(set, {{0, 0, 0}, {0, 0, 1}}) == 1);
  }
  SUBCASE("single primitive with half mass 0.3") {
    Ray  ray;
    auto set = single(0.3, ray);
    CHECK(eval_transmittance(set, ray) == doctest::Approx(0.7).epsilon(1e-3));
  }
  SUBCASE("saturated stack") {
    std::vector<GaussianPrimitive> prims;
    Ray ray{{0, 0, -5}, {0, 0, 1}};
    for (int i = 0; i < 4; i++) {
      GaussianPrimitive g;
      g.mu.z      = i - 1.5;
      g.magnitude = magnitude_for_half_mass(g, ray, 0.6);
      prims.push_back(g);
    }
    CHECK(eval_transmittance(make_primitive_set(prims), ray) == 0);
  }
  SUBCASE("background probability matches transmittance") {
    CHECK(check_duality(3, 400000, 20) < 0.003);
  }
  SUBCASE("roulette is unbiased") {
    auto c   = ambiguous_corpus()[3];
    auto set = make_primitive_set(c.prims);
    auto rng = make_rng(21);
    auto exact = eval_transmittance(set, c.ray);
    double sum = 0;
    int    n   = 400000;
    for (int i = 0; i < n; i++)
      sum += eval_transmittance(set, c.ray, {true, 0.9, 0.5}, rng.uniform());
    CHECK(std::abs(sum / n - exact) < 0.003);
  }
}

TEST_CASE("order and leaf size do not change the sampled distribution") {
  auto corpus = ambiguous_corpus();
  corpus.resize(2);
  CHECK(check_order_independence(corpus, 100000, 22) > 0.01);
}

TEST_CASE("exponential baseline") {
  auto set = make_primitive_set(std::vector<GaussianPrimitive>{});
  auto rng = make_rng(23);
  CHECK_FALSE(sample_free_flight_exponential(set, {{0, 0, 0}, {0, 0, 1}}, rng).hit);
  CHECK(eval_transmittance_exponential(set, {{0, 0, 0}, {0, 0, 1}}) == 1);

  auto check = check_exponential(400000, 24);
  CHECK(check.survival_error < 0.005);
  CHECK(check.min_law_p > 0.01);
}

TEST_CASE("statistics helpers") {
  CHECK(total_variation({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5));
  CHECK(ks_pvalue(0, 100) == doctest::Approx(1));
  CHECK(ks_pvalue(0.5, 1000) < 1e-10);
  // one-sample test of uniforms against the uniform cdf
  auto rng = make_rng(25);
  std::vector<double> u(10000);
  for (auto& x : u) x = rng.uniform();
  CHECK(ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) > 0.01);
  CHECK(ks_one_sample(u, [](double x) { return std::clamp(x * x, 0.0, 1.0); }) < 1e-6);
}
