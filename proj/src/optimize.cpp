#include "gaussrt/optimize.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <thread>

#include "gaussrt/integrator.h"

namespace gaussrt {

double TransmittanceTape::relaxed_cdf() const {
  double acc = 0;
  for (auto& e : entries) acc += 0.5 * e.integral;
  return acc;
}

TransmittanceTape record_tape(const PrimitiveSet& scene, const Ray& ray) {
  std::vector<int> ids;
  scene.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1,
      [&](std::span<const int> leaf, double, double) {
        ids.insert(ids.end(), leaf.begin(), leaf.end());
        return true;
      });
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  TransmittanceTape tape;
  for (auto id : ids) {
    auto&  g = scene.prims[id];
    double ts, te;
    if (!primitive_interval(g, ray, ts, te)) continue;
    auto value = ray_profile(g, ray.origin, ray.dir).integral(ts, te);
    tape.entries.push_back({id, ts, te, value});
  }
  return tape;
}

// -----------------------------------------------------------------------------
// GRADIENTS
// -----------------------------------------------------------------------------

namespace {

// d(to_matrix(q))/dq_k for the homogeneous rotation formula.
std::array<mat3, 4> rotation_jacobian(const quat& q) {
  auto [w, x, y, z] = q;
  auto n            = norm2(q);
  mat3 m            = to_matrix(q);
  std::array<mat3, 4> dm = {
      mat3{{vec3{w, -z, y}, vec3{z, w, -x}, vec3{-y, x, w}}},
      mat3{{vec3{x, y, z}, vec3{y, -x, -w}, vec3{z, w, -x}}},
      mat3{{vec3{-y, x, w}, vec3{x, y, z}, vec3{-w, z, -y}}},
      mat3{{vec3{-z, -w, x}, vec3{w, -z, y}, vec3{x, y, z}}},
  };
  double comp[4] = {w, x, y, z};
  for (int k = 0; k < 4; k++)
    for (int i = 0; i < 3; i++)
      dm[k][i] = (dm[k][i] * 2 - m[i] * (2 * comp[k])) / n;
  return dm;
}

double frobenius(const mat3& a, const mat3& b) {
  return dot(a[0], b[0]) + dot(a[1], b[1]) + dot(a[2], b[2]);
}

}  // namespace

IntegralGradient grad_ray_integral(const GaussianPrimitive& g, const Ray& ray,
    double t_start, double t_end) {
  IntegralGradient out;
  if (!(t_end > t_start)) return out;
  if (g.magnitude == 0) {
    auto unit        = g;
    unit.magnitude   = 1;
    out.magnitude    = ray_integral(unit, {ray.origin, ray.dir, t_start, t_end});
    return out;
  }

  auto pg   = prepare(g);
  auto prof = ray_profile(pg, ray.origin, ray.dir);
  auto I    = prof.integral(t_start, t_end);
  out.value = I;
  out.magnitude = I / g.magnitude;

  // moments of the profile about its peak: J1 = int u G, J2 = int u^2 G
  auto A    = prof.A;
  auto edge = [&](double t, double& e, double& ue) {
    auto u = t - prof.tc;
    if (!std::isfinite(u)) {
      e = ue = 0;
      return;
    }
    e  = std::exp(-0.5 * A * u * u);
    ue = u * e;
  };
  double ea, uea, eb, ueb;
  edge(t_start, ea, uea);
  edge(t_end, eb, ueb);
  auto J1 = prof.peak * (ea - eb) / A;
  auto J2 = prof.peak * (uea - ueb) / A + I / A;

  auto& w  = ray.dir;
  auto  xc = ray.origin - g.mu + w * prof.tc;
  auto& P  = pg.inv_cov;
  out.mu   = P * (xc * I + w * J1);

  // dI/dP = 1/2 (I Sigma - M) with M the second moment of x + t w
  auto sigma = covariance(g);
  mat3 S     = {{vec3{sigma.xx, sigma.xy, sigma.xz},
      vec3{sigma.xy, sigma.yy, sigma.yz}, vec3{sigma.xz, sigma.yz, sigma.zz}}};
  mat3 G;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) {
      auto m  = I * xc[i] * xc[j] + J1 * (xc[i] * w[j] + w[i] * xc[j]) +
               J2 * w[i] * w[j];
      G[i][j] = 0.5 * (I * S[i][j] - m);
    }

  // P = R diag(s^-2) R^T
  auto R    = pg.rotation;
  auto inv2 = vec3{1, 1, 1} / (g.scales * g.scales);
  auto GR   = G * R;
  for (int i = 0; i < 3; i++)
    out.scales[i] = -2 * inv2[i] / g.scales[i] * dot(R.column(i), GR.column(i));

  mat3 dR = GR * diagonal(inv2);
  for (int i = 0; i < 3; i++) dR[i] = dR[i] * 2;
  auto   jac = rotation_jacobian(g.rot);
  double dq[4];
  for (int k = 0; k < 4; k++) dq[k] = frobenius(dR, jac[k]);
  out.rot = {dq[0], dq[1], dq[2], dq[3]};
  return out;
}

// -----------------------------------------------------------------------------
// IMAGES AND LOSS
// -----------------------------------------------------------------------------

static Ray pixel_ray(const Camera& camera, int width, int height, int x, int y,
    bool jitter, uint64_t seed) {
  vec2 j = {0.5, 0.5};
  if (jitter) {
    auto rng = make_rng(sample_seed(seed, uint64_t(y) * width + x, 0));
    j        = rng.uniform2();
  }
  return camera_ray(camera, width, height, x + j.x, y + j.y);
}

std::vector<double> relaxed_cdf_image(const Scene& scene, const Camera& camera,
    int width, int height, bool jitter, uint64_t seed) {
  std::vector<double> image(size_t(width) * height);
  for (int y = 0; y < height; y++)
    for (int x = 0; x < width; x++)
      image[size_t(y) * width + x] = accumulated_cdf(
          scene.set, pixel_ray(camera, width, height, x, y, jitter, seed));
  return image;
}

static void check_views(std::span<const OptimView> views) {
  if (views.empty()) throw std::invalid_argument("optimization needs at least one view");
  for (auto& v : views)
    if (v.width <= 0 || v.height <= 0 ||
        v.transmittance.size() != size_t(v.width) * v.height)
      throw std::invalid_argument("target image does not match its view size");
}

static uint64_t view_seed(uint64_t seed, int iteration, int view) {
  return hash_combine(hash_combine(hash64(seed), uint64_t(iteration)), uint64_t(view));
}

namespace {

constexpr int params_per_prim = 11; // mu 3, rot 4, scales 3, magnitude 1

// Loss and, when grad is non-null, its gradient for all views. Rows are
// dealt to threads round-robin and per-thread buffers are summed in thread
// order, so results only depend on the thread count.
double loss_and_gradient(const Scene& scene, std::span<const OptimView> views,
    bool jitter, uint64_t seed, int iteration, int threads,
    std::vector<double>* grad) {
  size_t total = 0;
  for (auto& v : views) total += v.transmittance.size();
  auto n_prims = scene.primitives.size();

  struct Work {
    int  view, row;
  };
  std::vector<Work> rows;
  for (int v = 0; v < int(views.size()); v++)
    for (int y = 0; y < views[v].height; y++) rows.push_back({v, y});

  threads = std::max(1, std::min(threads, int(rows.size())));
  std::vector<double>              losses(threads, 0);
  std::vector<std::vector<double>> grads(threads);

  auto worker = [&](int t) {
    if (grad) grads[t].assign(n_prims * params_per_prim, 0);
    for (size_t r = t; r < rows.size(); r += threads) {
      auto& view = views[rows[r].view];
      auto  y    = rows[r].row;
      auto  vs   = view_seed(seed, iteration, rows[r].view);
      for (int x = 0; x < view.width; x++) {
        auto ray  = pixel_ray(view.camera, view.width, view.height, x, y, jitter, vs);
        // same summation as the transmittance evaluator, so a target
        // rendered from this scene gives exactly zero residual
        auto c    = accumulated_cdf(scene.set, ray);
        auto diff = 1 - c - view.transmittance[size_t(y) * view.width + x];
        losses[t] += diff * diff;
        if (!grad || diff == 0) continue;
        auto tape = record_tape(scene.set, ray);
        // dL/dC, and dC/dI = 1/2
        auto scale = -2 * diff / double(total) * 0.5;
        for (auto& e : tape.entries) {
          auto  gi = grad_ray_integral(clamp_flat(scene.primitives[e.id]), ray, e.t_start, e.t_end);
          auto* p  = grads[t].data() + size_t(e.id) * params_per_prim;
          double values[params_per_prim] = {gi.mu.x, gi.mu.y, gi.mu.z,
              gi.rot.w, gi.rot.x, gi.rot.y, gi.rot.z, gi.scales.x,
              gi.scales.y, gi.scales.z, gi.magnitude};
          for (int k = 0; k < params_per_prim; k++) p[k] += scale * values[k];
        }
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; t++) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  double loss = 0;
  for (auto l : losses) loss += l;
  if (grad) {
    grad->assign(n_prims * params_per_prim, 0);
    for (auto& g : grads)
      for (size_t k = 0; k < g.size(); k++) (*grad)[k] += g[k];
  }
  return loss / double(total);
}

}  // namespace

double transmittance_loss(const Scene& scene, std::span<const OptimView> views,
    bool jitter, uint64_t seed) {
  check_views(views);
  return loss_and_gradient(scene, views, jitter, seed, 0, 1, nullptr);
}

OptimResult optimize_transmittance(const Scene& scene,
    std::span<const OptimView> views, const OptimConfig& config) {
  check_views(views);
  if (!(config.lr_rotation > 0 && config.lr_other > 0))
    throw std::invalid_argument("learning rates must be positive");

  auto work    = scene;
  auto threads = resolve_thread_count(config.threads);
  auto n       = work.primitives.size() * params_per_prim;
  std::vector<double> m(n, 0), v(n, 0), grad;

  OptimResult result;
  for (int it = 0; it <= config.iterations; it++) {
    auto last = it == config.iterations;
    auto loss = loss_and_gradient(work, views, config.jitter, config.seed, it,
        threads, last ? nullptr : &grad);
    result.loss_history.push_back(loss);
    if (last) break;

    auto bc1 = 1 - std::pow(config.beta1, it + 1);
    auto bc2 = 1 - std::pow(config.beta2, it + 1);
    for (size_t i = 0; i < work.primitives.size(); i++) {
      auto& g = work.primitives[i];
      double* params[params_per_prim] = {&g.mu.x, &g.mu.y, &g.mu.z, &g.rot.w,
          &g.rot.x, &g.rot.y, &g.rot.z, &g.scales.x, &g.scales.y,
          &g.scales.z, &g.magnitude};
      for (int k = 0; k < params_per_prim; k++) {
        auto j  = i * params_per_prim + k;
        m[j]    = config.beta1 * m[j] + (1 - config.beta1) * grad[j];
        v[j]    = config.beta2 * v[j] + (1 - config.beta2) * grad[j] * grad[j];
        auto lr = k >= 3 && k < 7 ? config.lr_rotation : config.lr_other;
        *params[k] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config.adam_eps);
      }
      auto floor = 1e-9;
      g.scales   = max(g.scales, {floor, floor, floor});
      g.magnitude = std::max(g.magnitude, 0.0);
      if (!(norm2(g.rot) > 0)) g.rot = {1, 0, 0, 0};
      g.rot = normalize(g.rot);
    }
    build_scene(work);
  }
  result.primitives = work.primitives;
  return result;
}

void save_loss_history(const std::string& path, const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  for (size_t i = 0; i < history.size(); i++) out << i << " " << history[i] << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace gaussrt
