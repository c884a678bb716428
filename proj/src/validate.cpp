#include "gaussrt/validate.h"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <json.hpp>
#include <numeric>
#include <thread>

#include "gaussrt/convert.h"
#include "gaussrt/integrator.h"
#include "gaussrt/optimize.h"

namespace gaussrt {

// -----------------------------------------------------------------------------
// REPORTS
// -----------------------------------------------------------------------------

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](auto& c) { return c.pass; });
}

bool ValidationReport::add(const std::string& name, double statistic,
    double threshold, const std::string& relation) {
  auto pass = relation == "<" ? statistic < threshold : statistic > threshold;
  checks.push_back({name, statistic, threshold, pass, relation});
  return pass;
}

void ValidationReport::append(const ValidationReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  seconds += other.seconds;
}

std::string ValidationReport::to_json() const {
  nlohmann::json root;
  root["passed"]  = passed();
  root["seconds"] = seconds;
  auto& list = root["checks"] = nlohmann::json::array();
  for (auto& c : checks)
    list.push_back({{"name", c.name}, {"statistic", c.statistic},
        {"threshold", c.threshold}, {"relation", c.relation}, {"pass", c.pass}});
  return root.dump(2);
}

// -----------------------------------------------------------------------------
// INDEPENDENT DENSITY MODEL
// -----------------------------------------------------------------------------

namespace {

// Density of one primitive built with Eigen from the raw parameters, sharing
// nothing with the prepared form used by the renderer.
struct OracleGaussian {
  Eigen::Vector3d mu;
  Eigen::Matrix3d precision;
  double          norm;

  explicit OracleGaussian(const GaussianPrimitive& g) {
    Eigen::Quaterniond q(g.rot.w, g.rot.x, g.rot.y, g.rot.z);
    Eigen::Matrix3d    r = q.normalized().toRotationMatrix();
    Eigen::Vector3d    s2(g.scales.x * g.scales.x, g.scales.y * g.scales.y,
           g.scales.z * g.scales.z);
    Eigen::Matrix3d cov = r * s2.asDiagonal() * r.transpose();
    precision           = cov.inverse();
    mu                  = {g.mu.x, g.mu.y, g.mu.z};
    norm = g.magnitude / (std::pow(2 * pi, 1.5) * std::sqrt(cov.determinant()));
  }

  Eigen::Vector3d point(const Ray& ray, double t) const {
    return Eigen::Vector3d(ray.origin.x, ray.origin.y, ray.origin.z) +
           t * Eigen::Vector3d(ray.dir.x, ray.dir.y, ray.dir.z) - mu;
  }
  double density(const Ray& ray, double t) const {
    auto y = point(ray, t);
    return norm * std::exp(-0.5 * y.dot(precision * y));
  }
  // Quadratic a t^2 + b t + c of the squared Mahalanobis distance.
  void quadratic(const Ray& ray, double& a, double& b, double& c) const {
    Eigen::Vector3d w(ray.dir.x, ray.dir.y, ray.dir.z);
    auto            x = point(ray, 0);
    a                 = w.dot(precision * w);
    b                 = 2 * w.dot(precision * x);
    c                 = x.dot(precision * x);
  }
};

}  // namespace

double quadrature_ray_integral(const GaussianPrimitive& g, const Ray& ray) {
  OracleGaussian o(g);
  double         a, b, c;
  o.quadratic(ray, a, b, c);
  auto tc    = -b / (2 * a);
  auto width = 1 / std::sqrt(a);
  auto lo    = std::max(ray.t0, tc - 40 * width);
  auto hi    = std::min(ray.t1, tc + 40 * width);
  if (!(hi > lo)) return 0;

  // break the range where the integrand changes character
  std::vector<double> cuts = {lo, hi};
  for (double k : {-20.0, -10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0, 20.0}) {
    auto t = tc + k * width;
    if (t > lo && t < hi) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  auto   f   = [&](double t) { return o.density(ray, t); };
  double sum = 0;
  for (size_t i = 0; i + 1 < cuts.size(); i++)
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, cuts[i], cuts[i + 1], 10, 1e-13);
  return sum;
}

std::vector<double> marching_selection_oracle(std::span<const GaussianPrimitive> prims,
    const Ray& ray, double cutoff, int steps_per_piece) {
  auto n  = prims.size();
  auto r2 = -2 * std::log(cutoff);
  std::vector<OracleGaussian> models;
  std::vector<double>         lo(n), hi(n);
  std::vector<double>         cuts = {ray.t0};
  for (size_t k = 0; k < n; k++) {
    models.emplace_back(prims[k]);
    double a, b, c;
    models[k].quadratic(ray, a, b, c);
    auto disc = b * b - 4 * a * (c - r2);
    lo[k] = hi[k] = 0;
    if (disc <= 0) continue;
    lo[k] = std::max(ray.t0, (-b - std::sqrt(disc)) / (2 * a));
    hi[k] = std::min(ray.t1, (-b + std::sqrt(disc)) / (2 * a));
    if (hi[k] > lo[k]) cuts.push_back(lo[k]), cuts.push_back(hi[k]);
  }
  std::sort(cuts.begin(), cuts.end());

  std::vector<double> p(n + 1, 0);
  double              acc = 0;
  std::vector<double> step_mass(n);
  for (size_t i = 0; i + 1 < cuts.size(); i++) {
    auto a = cuts[i], b = cuts[i + 1];
    if (!(b > a)) continue;
    auto h = (b - a) / steps_per_piece;
    for (int s = 0; s < steps_per_piece; s++) {
      auto   t     = a + (s + 0.5) * h;
      double total = 0;
      for (size_t k = 0; k < n; k++) {
        step_mass[k] = t > lo[k] && t < hi[k] ? 0.5 * models[k].density(ray, t) * h : 0;
        total += step_mass[k];
      }
      if (acc + total >= 1) {
        // saturation inside this step: share the remaining mass
        auto frac = (1 - acc) / total;
        for (size_t k = 0; k < n; k++) p[k] += frac * step_mass[k];
        return p;
      }
      for (size_t k = 0; k < n; k++) p[k] += step_mass[k];
      acc += total;
    }
  }
  p[n] = 1 - acc;
  return p;
}

// -----------------------------------------------------------------------------
// SAMPLING
// -----------------------------------------------------------------------------

std::vector<int64_t> sample_selection_counts(const PrimitiveSet& set,
    const Ray& ray, int64_t samples, uint64_t seed, DisambiguationRule rule,
    TransportStats* stats, int threads) {
  constexpr int chunks = 64;
  auto          n      = set.prims.size();
  std::vector<std::vector<int64_t>> counts(chunks, std::vector<int64_t>(n + 1, 0));
  std::vector<TransportStats>       chunk_stats(chunks);

  auto run_chunk = [&](int c) {
    auto rng   = make_rng(hash_combine(hash64(seed), uint64_t(c)));
    auto begin = samples * c / chunks, end = samples * (c + 1) / chunks;
    FreeFlightOptions options{rule, stats ? &chunk_stats[c] : nullptr};
    auto next = [&rng] { return rng.uniform(); };
    for (auto i = begin; i < end; i++) {
      auto u = rng.uniform();
      auto e = sample_free_flight(set, ray, u, next, -1, options);
      counts[c][e.is_primitive() ? size_t(e.primitive_id) : n]++;
    }
  };
  threads = std::min(resolve_thread_count(threads), chunks);
  if (threads <= 1) {
    for (int c = 0; c < chunks; c++) run_chunk(c);
  } else {
    std::atomic<int>         next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; t++)
      pool.emplace_back([&] {
        for (int c; (c = next++) < chunks;) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<int64_t> total(n + 1, 0);
  for (int c = 0; c < chunks; c++) {
    for (size_t k = 0; k <= n; k++) total[k] += counts[c][k];
    if (stats) *stats += chunk_stats[c];
  }
  return total;
}

std::vector<double> sample_exponential_distances(
    const PrimitiveSet& set, const Ray& ray, int64_t samples, uint64_t seed) {
  std::vector<double> out(samples);
  auto                rng = make_rng(seed, 3);
  for (auto& t : out) {
    auto c = sample_free_flight_exponential(set, ray, rng);
    t      = c.hit ? c.t : inf;
  }
  return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double sum = 0;
  for (size_t i = 0; i < p.size(); i++) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

std::vector<double> normalize_counts(const std::vector<int64_t>& counts) {
  auto total = double(std::accumulate(counts.begin(), counts.end(), int64_t(0)));
  std::vector<double> p(counts.size());
  for (size_t i = 0; i < p.size(); i++) p[i] = counts[i] / total;
  return p;
}

double ks_pvalue(double d, double n) {
  auto sn     = std::sqrt(n);
  auto lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1;
  double sum = 0, sign = 1;
  for (int k = 1; k <= 100; k++) {
    auto term = sign * std::exp(-2 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

double ks_two_sample_counts(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  auto   na = double(std::accumulate(a.begin(), a.end(), int64_t(0)));
  auto   nb = double(std::accumulate(b.begin(), b.end(), int64_t(0)));
  double ca = 0, cb = 0, d = 0;
  for (size_t i = 0; i < a.size(); i++) {
    ca += a[i] / na;
    cb += b[i] / nb;
    d = std::max(d, std::abs(ca - cb));
  }
  return ks_pvalue(d, na * nb / (na + nb));
}

double ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  auto   n = double(samples.size());
  double d = 0;
  for (size_t i = 0; i < samples.size(); i++) {
    // escapes form an atom at infinity; compare only at finite points
    if (!std::isfinite(samples[i])) break;
    auto f = cdf(samples[i]);
    d      = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return ks_pvalue(d, n);
}

// -----------------------------------------------------------------------------
// PHASE QUADRATURE
// -----------------------------------------------------------------------------

// Midpoint rule on a polar grid around `center`, with theta = pi x^2 to
// concentrate nodes near the center.
template <typename Fn>
static auto sphere_quadrature(const vec3& center, int n_theta, int n_phi, Fn&& f) {
  auto frame = basis_fromz(center);
  using T    = decltype(f(vec3{}));
  T sum{};
  for (int i = 0; i < n_theta; i++) {
    auto x      = (i + 0.5) / n_theta;
    auto theta  = pi * x * x;
    auto dtheta = 2 * pi * x / n_theta;
    auto st = std::sin(theta), ct = std::cos(theta);
    T    ring{};
    for (int j = 0; j < n_phi; j++) {
      auto phi = 2 * pi * (j + 0.5) / n_phi;
      auto n   = to_world(frame, {st * std::cos(phi), st * std::sin(phi), ct});
      ring += f(n);
    }
    sum += ring * (st * dtheta * 2 * pi / n_phi);
  }
  return sum;
}

vec3 phase_quadrature(const Material& m, const vec3& wi, const vec3& wo) {
  if (sggx_is_delta(m.ndf)) {
    auto g = sggx_dominant_axis(m.ndf);
    if (dot(g, wo) < 0) g = -g;
    return eval_bsdf(m.bsdf, g, wi, wo);
  }
  auto h = wi + wo;
  auto center = length(h) > 1e-6 ? normalize(h) : wo;
  return sphere_quadrature(center, 3000, 1500, [&](const vec3& n) {
    auto d = sggx_vndf(m.ndf, wo, n);
    return d > 0 ? eval_bsdf(m.bsdf, n, wi, wo) * d : vec3{};
  });
}

double vndf_quadrature(const SggxNdf& ndf, const vec3& wo) {
  auto g = sggx_dominant_axis(ndf);
  if (dot(g, wo) < 0) g = -g;
  return sphere_quadrature(g, 1500, 1000, [&](const vec3& n) {
    return sggx_vndf(ndf, wo, n);
  });
}

// -----------------------------------------------------------------------------
// CORPORA
// -----------------------------------------------------------------------------

double magnitude_for_half_mass(GaussianPrimitive g, const Ray& ray, double half_mass) {
  g.magnitude = 1;
  auto line   = ray_integral(g, {ray.origin, ray.dir, -inf, inf});
  return 2 * half_mass / line;
}

static quat random_rotation(Rng& rng) {
  // uniform unit quaternion from four normals
  auto a = std::sqrt(-2 * std::log1p(-rng.uniform())), b = 2 * pi * rng.uniform();
  auto c = std::sqrt(-2 * std::log1p(-rng.uniform())), d = 2 * pi * rng.uniform();
  return normalize(quat{a * std::cos(b), a * std::sin(b), c * std::cos(d), c * std::sin(d)});
}

static GaussianPrimitive make_prim(vec3 mu, vec3 scales, quat rot, const Ray& ray, double half_mass) {
  GaussianPrimitive g;
  g.mu        = mu;
  g.scales    = scales;
  g.rot       = rot;
  g.magnitude = magnitude_for_half_mass(g, ray, half_mass);
  return g;
}

std::vector<FreeFlightCase> ambiguous_corpus() {
  Ray  z{{0, 0, -5}, {0, 0, 1}};
  quat id{};
  auto iso = [](double s) { return vec3{s, s, s}; };
  std::vector<FreeFlightCase> cases;

  // two identical primitives saturating at their common center
  cases.push_back({"symmetric-saturation",
      {make_prim({0, 0, 0}, iso(0.5), id, z, 1), make_prim({0, 0, 0}, iso(0.5), id, z, 1)}, z});
  // a narrow dense primitive nested inside a wide faint one
  cases.push_back({"nested-saturation",
      {make_prim({0, 0, 0}, iso(0.25), id, z, 1.6), make_prim({0, 0, 0.2}, iso(0.9), id, z, 0.8)}, z});
  cases.push_back({"staggered-triple",
      {make_prim({0, 0, -0.6}, iso(0.4), id, z, 0.5), make_prim({0.1, 0, 0}, iso(0.5), id, z, 0.7),
          make_prim({0, -0.1, 0.5}, iso(0.4), id, z, 0.6)}, z});
  cases.push_back({"overlap-below-saturation",
      {make_prim({0, 0, 0}, iso(0.5), id, z, 0.3), make_prim({0, 0.2, 0.3}, iso(0.6), id, z, 0.4)}, z});
  Ray short_ray{{0, 0, -5}, {0, 0, 1}, 0, 5.1};
  cases.push_back({"ray-ends-inside-overlap",
      {make_prim({0, 0, 0}, iso(0.5), id, short_ray, 1.2),
          make_prim({0, 0, 0.3}, iso(0.4), id, short_ray, 1.0)}, short_ray});
  cases.push_back({"isolated-then-saturating-pair",
      {make_prim({0, 0, -2}, iso(0.3), id, z, 0.3), make_prim({0, 0, 1}, iso(0.5), id, z, 0.8),
          make_prim({0.1, 0, 1.2}, iso(0.5), id, z, 0.8)}, z});
  auto tilt_a = normalize(quat{0.9, 0.3, 0.2, 0.1});
  auto tilt_b = normalize(quat{0.7, -0.2, 0.5, 0.3});
  Ray  oblique{{-3, -2, -4}, normalize(vec3{3, 2, 4})};
  cases.push_back({"anisotropic-crossing",
      {make_prim({0, 0, 0}, {1.2, 0.2, 0.3}, tilt_a, oblique, 0.9),
          make_prim({0.1, 0.05, 0}, {0.15, 0.9, 0.25}, tilt_b, oblique, 0.9)}, oblique});
  cases.push_back({"five-way-pileup",
      {make_prim({0, 0, 0}, iso(0.6), id, z, 0.5), make_prim({0.1, 0, 0.1}, iso(0.5), id, z, 0.5),
          make_prim({0, 0.1, -0.1}, iso(0.4), id, z, 0.5), make_prim({-0.1, 0, 0.2}, iso(0.7), id, z, 0.5),
          make_prim({0, -0.1, 0}, iso(0.3), id, z, 0.5)}, z});
  return cases;
}

FreeFlightCase random_free_flight_case(Rng& rng, bool force_overlap) {
  FreeFlightCase c;
  c.name   = force_overlap ? "random-overlap" : "random";
  auto dir = sample_sphere(rng.uniform2());
  c.ray    = {dir * -6, dir, 0, inf};
  if (rng.uniform() < 0.25) c.ray.t1 = 6 + (rng.uniform() - 0.5) * 2;
  auto frame = basis_fromz(dir);
  auto count = 1 + int(rng.uniform() * (force_overlap ? 6 : 8));
  if (force_overlap) count = std::max(count, 2);
  auto spread = force_overlap ? 0.3 : 2.0;
  for (int k = 0; k < count; k++) {
    auto t  = (2 * rng.uniform() - 1) * spread;
    vec2 off = {(rng.uniform() - 0.5) * 0.6, (rng.uniform() - 0.5) * 0.6};
    auto mu = dir * t + frame.x * off.x + frame.y * off.y;
    vec3 scales = {0.15 + 0.65 * rng.uniform(), 0.15 + 0.65 * rng.uniform(),
        0.15 + 0.65 * rng.uniform()};
    auto half_mass = force_overlap ? 0.3 + 0.9 * rng.uniform() : 0.05 + 0.6 * rng.uniform();
    c.prims.push_back(make_prim(mu, scales, random_rotation(rng), c.ray, half_mass));
  }
  return c;
}

std::vector<PhaseConfig> phase_grid() {
  struct Ndf {
    const char* name;
    SggxNdf     ndf;
    vec3        wi, wo;
  };
  auto n = [](vec3 v) { return normalize(v); };
  // direction pairs put the half vector where each distribution has mass
  Ndf ndfs[] = {
      {"delta", {quat{}, {0, 0, 1}}, n({-0.5, 0.3, 0.8}), n({0.4, 0.1, 0.9})},
      {"surface", {quat{}, {0.05, 0.05, 1}}, n({-0.5, 0.3, 0.8}), n({0.4, 0.1, 0.9})},
      {"isotropic", {quat{}, {1, 1, 1}}, n({-0.5, 0.3, 0.8}), n({0.4, 0.1, 0.9})},
      {"fiber", {quat{}, {1, 1, 0.05}}, n({0.2, 0.6, -0.775}), n({0.6, 0.3, 0.742})},
  };
  struct Base {
    const char* name;
    BaseBsdf    bsdf;
  };
  BaseBsdf smooth, rough, plastic;
  smooth.base_color = {0.95, 0.64, 0.54};
  smooth.metallic   = 1;
  smooth.roughness  = 0.2;
  rough             = smooth;
  rough.roughness   = 0.6;
  plastic.base_color = {0.2, 0.5, 0.8};
  plastic.metallic   = 0;
  plastic.roughness  = 0.3;
  Base bases[] = {{"smooth-metal", smooth}, {"rough-metal", rough}, {"plastic", plastic}};

  std::vector<PhaseConfig> grid;
  for (auto& d : ndfs)
    for (auto& b : bases)
      grid.push_back({std::string(d.name) + "/" + b.name, {b.bsdf, d.ndf}, d.wi, d.wo});
  return grid;
}

// -----------------------------------------------------------------------------
// GRADIENTS
// -----------------------------------------------------------------------------

GradientCheck check_gradients(int cases, uint64_t seed) {
  auto          rng = make_rng(seed, 17);
  GradientCheck out;
  for (int i = 0; i < cases; i++) {
    GaussianPrimitive g;
    g.mu     = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
    g.scales = {0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform()};
    g.rot    = random_rotation(rng);
    g.magnitude = 0.5 + rng.uniform();
    auto dir    = sample_sphere(rng.uniform2());
    auto frame  = basis_fromz(dir);
    auto off    = (frame.x * (rng.uniform() - 0.5) + frame.y * (rng.uniform() - 0.5)) * 1.2;
    Ray  ray{g.mu + off - dir * 4, dir};

    // mix of whole-ellipsoid, half-open and interior intervals
    double ta, tb;
    primitive_interval(prepare(g), ray, ta, tb);
    switch (i % 4) {
      case 1: ta = -inf, tb = inf; break;
      case 2: tb = 4 + 0.3 * (rng.uniform() - 0.5); break;
      case 3: ta = 3.5 + 0.3 * rng.uniform(), tb = ta + 0.8; break;
      default: break;
    }
    if (!(tb > ta)) continue;

    auto grad  = grad_ray_integral(g, ray, ta, tb);
    auto value = [&](const GaussianPrimitive& p) {
      return ray_integral(p, {ray.origin, ray.dir, ta, tb});
    };
    // central differences with steps relative to each parameter's scale
    auto fd = [&](auto&& set, double step) {
      auto a = g, b = g;
      set(a, step);
      set(b, -step);
      return (value(a) - value(b)) / (2 * step);
    };
    auto length_scale = (g.scales.x + g.scales.y + g.scales.z) / 3;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> groups(4);
    for (int k = 0; k < 3; k++) {
      groups[0].first.push_back(grad.mu[k]);
      groups[0].second.push_back(fd([k](auto& p, double h) { p.mu[k] += h; }, 1e-5 * length_scale));
      groups[2].first.push_back(grad.scales[k]);
      groups[2].second.push_back(fd([k](auto& p, double h) { p.scales[k] += h; }, 1e-5 * g.scales[k]));
    }
    double dq[4] = {grad.rot.w, grad.rot.x, grad.rot.y, grad.rot.z};
    for (int k = 0; k < 4; k++) {
      groups[1].first.push_back(dq[k]);
      groups[1].second.push_back(fd([k](auto& p, double h) {
        double* c[4] = {&p.rot.w, &p.rot.x, &p.rot.y, &p.rot.z};
        *c[k] += h;
      }, 1e-5));
    }
    groups[3].first.push_back(grad.magnitude);
    groups[3].second.push_back(fd([](auto& p, double h) { p.magnitude += h; }, 1e-5 * g.magnitude));

    for (auto& [analytic, numeric] : groups) {
      double diff = 0, ref = 0;
      for (size_t k = 0; k < analytic.size(); k++) {
        diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
        ref  = std::max(ref, std::abs(numeric[k]));
      }
      if (ref > 0) out.max_rel_error = std::max(out.max_rel_error, diff / ref);
    }
    out.cases++;
  }
  return out;
}

// -----------------------------------------------------------------------------
// CHECKS
// -----------------------------------------------------------------------------

namespace {

std::vector<GaussianPrimitive> permuted(const std::vector<GaussianPrimitive>& prims,
    std::vector<int>& order, Rng& rng) {
  order.resize(prims.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = int(order.size()) - 1; i > 0; i--)
    std::swap(order[i], order[std::min(int(rng.uniform() * (i + 1)), i)]);
  std::vector<GaussianPrimitive> out;
  for (auto i : order) out.push_back(prims[i]);
  return out;
}

}  // namespace

double check_ray_integrals(int cases, uint64_t seed) {
  auto   rng     = make_rng(seed, 202);
  double max_rel = 0;
  for (int i = 0; i < cases; i++) {
    GaussianPrimitive g;
    g.mu        = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
    g.scales    = {0.05 + rng.uniform(), 0.05 + rng.uniform(), 0.05 + rng.uniform()};
    g.rot       = random_rotation(rng);
    g.magnitude = 0.1 + 2 * rng.uniform();
    auto dir    = sample_sphere(rng.uniform2());
    auto frame  = basis_fromz(dir);
    auto off    = (frame.x * (rng.uniform() - 0.5) + frame.y * (rng.uniform() - 0.5)) * 1.5;
    Ray  ray{g.mu + off - dir * 3, dir};
    switch (i % 4) {
      case 0: ray.t0 = -inf, ray.t1 = inf; break;
      case 1: ray.t0 = 0, ray.t1 = inf; break;
      case 2: ray.t0 = 3 * rng.uniform(), ray.t1 = ray.t0 + 3 * rng.uniform(); break;
      default: ray.t0 = 2 + 2 * rng.uniform(), ray.t1 = ray.t0 + rng.uniform(); break;
    }
    auto closed = ray_integral(g, ray);
    auto quad   = quadrature_ray_integral(g, ray);
    if (quad > 1e-300) max_rel = std::max(max_rel, std::abs(closed - quad) / quad);
  }
  return max_rel;
}

FreeFlightCheck check_free_flight(int scenes, int64_t samples, uint64_t seed, int threads) {
  auto corpus = ambiguous_corpus();
  auto rng    = make_rng(seed, 101);
  for (int i = 0; int(corpus.size()) < scenes; i++)
    corpus.push_back(random_free_flight_case(rng, i % 2 == 0));
  corpus.resize(std::min<size_t>(corpus.size(), std::max(scenes, 0)));

  FreeFlightCheck out;
  for (size_t i = 0; i < corpus.size(); i++) {
    auto& c      = corpus[i];
    auto  oracle = marching_selection_oracle(c.prims, c.ray);
    auto  counts = sample_selection_counts(make_primitive_set(c.prims), c.ray, samples,
        hash_combine(seed, i), DisambiguationRule::local_density, nullptr, threads);
    auto  p = normalize_counts(counts);
    out.max_tv = std::max(out.max_tv, total_variation(p, oracle));
    if (i == 0) out.symmetric_split_error = std::abs(p[0] - 0.5);
    out.scenes++;
  }
  return out;
}

double check_duality(int scenes, int64_t samples, uint64_t seed, int threads) {
  auto   rng   = make_rng(seed, 404);
  double worst = 0;
  for (int i = 0; i < scenes; i++) {
    auto c      = random_free_flight_case(rng, i % 2 == 1);
    auto set    = make_primitive_set(c.prims);
    auto counts = sample_selection_counts(set, c.ray, samples, hash_combine(seed, 4000 + i),
        DisambiguationRule::local_density, nullptr, threads);
    worst = std::max(worst,
        std::abs(normalize_counts(counts).back() - eval_transmittance(set, c.ray)));
  }
  return worst;
}

double check_order_independence(std::span<const FreeFlightCase> cases,
    int64_t samples, uint64_t seed, int threads) {
  auto   rng    = make_rng(seed, 505);
  double min_p  = 1;
  auto   counts = [&](const std::vector<GaussianPrimitive>& prims, KdConfig kd,
                    const Ray& ray, uint64_t stream) {
    return sample_selection_counts(make_primitive_set(prims, default_cutoff, kd), ray,
        samples, hash_combine(seed, stream), DisambiguationRule::local_density, nullptr,
        threads);
  };
  for (size_t i = 0; i < cases.size(); i++) {
    auto& c    = cases[i];
    auto  base = counts(c.prims, {}, c.ray, 1000 + i);
    std::vector<int> order;
    auto perm   = permuted(c.prims, order, rng);
    auto sample = counts(perm, {}, c.ray, 2000 + i);
    std::vector<int64_t> mapped(sample.size());
    for (size_t k = 0; k < order.size(); k++) mapped[order[k]] = sample[k];
    mapped.back() = sample.back();
    min_p = std::min(min_p, ks_two_sample_counts(base, mapped));
    for (int leaf : {1, 4, 16}) {
      auto other = counts(c.prims, {0, leaf}, c.ray, 3000 + 100 * i + leaf);
      min_p      = std::min(min_p, ks_two_sample_counts(base, other));
    }
  }
  return min_p;
}

ExponentialCheck check_exponential(int64_t samples, uint64_t seed) {
  ExponentialCheck  out;
  GaussianPrimitive g;
  Ray               ray{{0, 0, -4}, {0, 0, 1}};
  g.scales    = {0.5, 0.5, 0.5};
  g.magnitude = magnitude_for_half_mass(g, ray, 0.6);
  auto set    = make_primitive_set(std::vector{g});
  auto ts     = sample_exponential_distances(set, ray, samples, seed);
  std::sort(ts.begin(), ts.end());
  auto   prof = ray_profile(set.prims[0], ray.origin, ray.dir);
  double ea, eb;
  prof.ellipsoid_interval(set.prims[0].cutoff2, ea, eb);
  for (int k = 0; k <= 100; k++) {
    auto t        = 2.0 + 4.0 * k / 100;
    auto survived = double(ts.end() - std::upper_bound(ts.begin(), ts.end(), t)) / samples;
    auto expect   = std::exp(-prof.integral(ea, std::clamp(t, ea, eb)));
    out.survival_error = std::max(out.survival_error, std::abs(survived - expect));
  }

  GaussianPrimitive h = g;
  h.mu                = {0.2, 0, 0.4};
  h.scales            = {0.3, 0.6, 0.4};
  h.magnitude         = magnitude_for_half_mass(h, ray, 0.5);
  auto pair           = make_primitive_set(std::vector{g, h});
  auto ts2 = sample_exponential_distances(pair, ray, std::min<int64_t>(samples, 200000), seed + 1);
  auto cdf = [&](double t) {
    double sum = 0;
    for (auto& p : pair.prims) {
      auto   pr = ray_profile(p, ray.origin, ray.dir);
      double a, b;
      if (pr.ellipsoid_interval(p.cutoff2, a, b)) sum += pr.integral(a, std::clamp(t, a, b));
    }
    return 1 - std::exp(-sum);
  };
  out.min_law_p = ks_one_sample(ts2, cdf);
  return out;
}

PhaseCheck check_phase(int64_t samples, uint64_t seed) {
  auto       rng = make_rng(seed, 303);
  PhaseCheck out;
  for (int i = 0; i < 20; i++) {
    SggxNdf ndf{random_rotation(rng),
        {0.01 + rng.uniform(), 0.01 + rng.uniform(), 0.01 + rng.uniform()}};
    auto wo        = sample_sphere(rng.uniform2());
    out.vndf_error = std::max(out.vndf_error, std::abs(vndf_quadrature(ndf, wo) - 1));
  }
  for (auto& c : phase_grid())
    if (!sggx_is_delta(c.material.ndf))
      out.vndf_error =
          std::max(out.vndf_error, std::abs(vndf_quadrature(c.material.ndf, c.wo) - 1));

  for (auto& c : phase_grid()) {
    auto truth = phase_quadrature(c.material, c.wi, c.wo);
    vec3 mean_s;
    // Welford updates keep constant estimators at exactly zero variance
    double ms = 0, vs = 0, mn = 0, vn = 0;
    for (int64_t i = 0; i < samples; i++) {
      auto a = phase_eval_stochastic(c.material, c.wi, c.wo, rng);
      auto b = phase_eval_naive(c.material, c.wi, c.wo, rng);
      mean_s += a;
      auto la = luminance(a), lb = luminance(b), k = double(i + 1);
      auto da = la - ms, db = lb - mn;
      ms += da / k, mn += db / k;
      vs += da * (la - ms), vn += db * (lb - mn);
    }
    PhaseCell cell{c.name};
    for (int k = 0; k < 3; k++)
      if (truth[k] > 0)
        cell.rel_error = std::max(cell.rel_error,
            std::abs(mean_s[k] / double(samples) - truth[k]) / truth[k]);
    cell.variance_ratio = vn > 0 ? vs / vn : (vs > 0 ? inf : 0.0);
    out.cells.push_back(cell);
  }
  return out;
}

double check_splat_remap(int splats, uint64_t seed) {
  auto   rng   = make_rng(seed, 606);
  double worst = 0;
  for (int i = 0; i < splats; i++) {
    Splat s;
    s.mu      = {2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
    s.rot     = random_rotation(rng);
    // log-uniform scales in [1e-3, 1] give thin and flat splats too
    s.scales  = {std::pow(10.0, -3 * rng.uniform()), std::pow(10.0, -3 * rng.uniform()),
        std::pow(10.0, -3 * rng.uniform())};
    s.opacity = rng.uniform();
    auto view = sample_sphere(rng.uniform2());

    GaussianPrimitive g{s.mu, s.rot, s.scales, remap_splat_magnitude(s, view)};

    // projected 2D covariance built independently with Eigen
    Eigen::Quaterniond q(s.rot.w, s.rot.x, s.rot.y, s.rot.z);
    Eigen::Matrix3d    r = q.normalized().toRotationMatrix();
    Eigen::Vector3d    s2(s.scales.x * s.scales.x, s.scales.y * s.scales.y,
           s.scales.z * s.scales.z);
    Eigen::Matrix3d cov = r * s2.asDiagonal() * r.transpose();
    Eigen::Vector3d v(view.x, view.y, view.z);
    Eigen::Vector3d e1 = v.unitOrthogonal(), e2 = v.cross(e1);
    Eigen::Matrix<double, 2, 3> j;
    j.row(0) = e1.transpose();
    j.row(1) = e2.transpose();
    Eigen::Matrix2d cov2 = j * cov * j.transpose();

    // a ray through the center and one through a point about one sigma out
    for (int k = 0; k < 2; k++) {
      Eigen::Vector2d d = Eigen::Vector2d::Zero();
      if (k == 1) {
        Eigen::Vector2d u(rng.uniform() - 0.5, rng.uniform() - 0.5);
        d = cov2.llt().matrixL() * (2.0 * u);
      }
      auto weight = s.opacity * std::exp(-0.5 * d.dot(cov2.inverse() * d));
      Eigen::Vector3d o = Eigen::Vector3d(s.mu.x, s.mu.y, s.mu.z) + j.transpose() * d;
      Ray ray{{o.x(), o.y(), o.z()}, view, -inf, inf};
      worst = std::max(worst, std::abs(ray_integral(g, ray) - weight));
    }
  }
  return worst;
}

// -----------------------------------------------------------------------------
// SUITES
// -----------------------------------------------------------------------------

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace

ValidationReport validate_sampling(const ValidateOptions& options) {
  Stopwatch        watch;
  ValidationReport report;
  auto ff = check_free_flight(18, options.samples, options.seed, options.threads);
  report.add("free-flight TV vs marching oracle (" + std::to_string(ff.scenes) + " scenes)",
      ff.max_tv, 0.01);
  report.add("symmetric saturation split", ff.symmetric_split_error, 0.005);
  auto corpus = ambiguous_corpus();
  corpus.resize(3);
  report.add("KS permutation and leaf size",
      check_order_independence(corpus, std::min<int64_t>(options.samples, 200000),
          options.seed, options.threads),
      0.01, ">");
  report.seconds = watch.seconds();
  return report;
}

ValidationReport validate_transmittance(const ValidateOptions& options) {
  Stopwatch        watch;
  ValidationReport report;
  auto             rng = make_rng(options.seed, 202);

  report.add("ray integral vs quadrature (1000 cases)",
      check_ray_integrals(1000, options.seed), 1e-8);
  report.add("background probability vs transmittance",
      check_duality(5, std::min<int64_t>(options.samples, 1000000), options.seed,
          options.threads),
      0.003);

  // roulette keeps the expectation
  {
    auto c   = ambiguous_corpus()[3];
    auto set = make_primitive_set(c.prims);
    auto ray = c.ray;
    RussianRoulette rr{true, 0.9, 0.5};
    auto   exact = eval_transmittance(set, ray);
    double sum = 0, sum2 = 0;
    auto   n = std::min<int64_t>(options.samples, 200000);
    for (int64_t i = 0; i < n; i++) {
      auto v = eval_transmittance(set, ray, rr, rng.uniform());
      sum += v, sum2 += v * v;
    }
    auto mean = sum / n, err = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    report.add("roulette transmittance bias in standard errors",
        std::abs(mean - exact) / std::max(err, 1e-12), 4);
  }

  auto exp = check_exponential(std::min<int64_t>(options.samples, 1000000), options.seed);
  report.add("exponential survival vs exp(-I)", exp.survival_error, 0.005);
  report.add("exponential two-primitive minimum law KS p", exp.min_law_p, 0.01, ">");
  report.add("splat remap weight identity", check_splat_remap(1000, options.seed), 1e-8);
  report.seconds = watch.seconds();
  return report;
}

ValidationReport validate_phase(const ValidateOptions& options) {
  Stopwatch        watch;
  ValidationReport report;
  auto             check = check_phase(options.samples, options.seed);
  report.add("VNDF normalization", check.vndf_error, 1e-3);
  for (auto& cell : check.cells) {
    report.add("phase estimate vs quadrature " + cell.name, cell.rel_error, 0.02);
    report.add("variance ratio improved/naive " + cell.name, cell.variance_ratio, 1 + 1e-12);
  }
  report.seconds = watch.seconds();
  return report;
}

ValidationReport validate_gradients(const ValidateOptions& options) {
  Stopwatch        watch;
  ValidationReport report;
  auto             check = check_gradients(200, options.seed);
  report.add("ray integral gradients vs central differences", check.max_rel_error, 1e-4);

  // dI/dc = I / c and no gradient along the ray for an infinite centered ray
  GaussianPrimitive g;
  g.magnitude = 1.7;
  Ray  ray{{0, 0, -5}, {0, 0, 1}, -inf, inf};
  auto grad = grad_ray_integral(g, ray, -inf, inf);
  report.add("magnitude derivative identity",
      std::abs(grad.magnitude - grad.value / g.magnitude), 1e-15);
  report.add("axial position derivative of an infinite ray", std::abs(grad.mu.z), 1e-12);
  report.seconds = watch.seconds();
  return report;
}

ValidationReport run_validation(const std::string& suite, const ValidateOptions& options) {
  if (suite == "sampling") return validate_sampling(options);
  if (suite == "transmittance") return validate_transmittance(options);
  if (suite == "phase") return validate_phase(options);
  if (suite == "gradients") return validate_gradients(options);
  if (suite == "all") {
    auto report = validate_sampling(options);
    report.append(validate_transmittance(options));
    report.append(validate_phase(options));
    report.append(validate_gradients(options));
    return report;
  }
  throw std::invalid_argument("unknown suite " + suite);
}

}  // namespace gaussrt
