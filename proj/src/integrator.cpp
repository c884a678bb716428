#include "gaussrt/integrator.h"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace gaussrt {

std::vector<float> Film::image() const {
  std::vector<float> out(size_t(width) * height * 3);
  for (int y = 0; y < height; y++)
    for (int x = 0; x < width; x++) {
      auto p = pixel(x, y);
      auto i = (size_t(y) * width + x) * 3;
      out[i + 0] = float(p.x);
      out[i + 1] = float(p.y);
      out[i + 2] = float(p.z);
    }
  return out;
}

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (auto env = std::getenv("GAUSSRT_THREADS")) {
    auto n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct LightHit {
  int    index = -1;
  double t     = inf;
};

LightHit nearest_light(const Scene& scene, const Ray& ray) {
  LightHit hit;
  for (int i = 0; i < int(scene.lights.size()); i++) {
    auto t = intersect_light(scene.lights[i], ray);
    if (t < hit.t) hit = {i, t};
  }
  return hit;
}

bool blocked_by_lights(const Scene& scene, const Ray& ray) {
  for (auto& light : scene.lights)
    if (intersect_light(light, ray) < inf) return true;
  return false;
}

}  // namespace

vec3 estimate_path(const Scene& scene, const Ray& camera_ray_, Rng& rng,
    const RenderConfig& config, TransportStats* stats) {
  auto exponential = config.mode == RenderMode::exp_baseline;
  auto max_bounces = config.mode == RenderMode::direct ? 1 : config.max_bounces;
  auto env_nee     = !scene.environment.is_black();
  auto num_nee     = int(scene.lights.size()) + (env_nee ? 1 : 0);
  FreeFlightOptions ff_options{config.rule, stats};
  auto next_uniform = [&rng] { return rng.uniform(); };

  auto   ray = camera_ray_;
  vec3   radiance;
  vec3   beta     = {1, 1, 1};
  int    depth    = 0;
  int    excluded = -1;
  double prev_pdf = 0;
  bool   primary  = true;

  while (true) {
    auto light_hit = nearest_light(scene, ray);
    auto bounded   = ray;
    bounded.t1     = std::min(ray.t1, light_hit.t);

    int    prim = -1;
    double t_hit = 0;
    if (exponential) {
      auto c = sample_free_flight_exponential(scene.set, bounded, rng);
      if (c.hit) prim = c.primitive_id, t_hit = c.t;
    } else {
      auto u = rng.uniform();
      auto e = sample_free_flight(
          scene.set, bounded, u, next_uniform, excluded, ff_options);
      if (e.is_primitive()) prim = e.primitive_id, t_hit = e.t_mid;
    }

    if (prim < 0) {
      vec3   emitted;
      double light_pdf = 0;
      if (light_hit.index >= 0) {
        auto& light = scene.lights[light_hit.index];
        auto  cos_l = -dot(ray.dir, light.normal());
        if (cos_l > 0) {
          emitted   = light.radiance;
          light_pdf = light_hit.t * light_hit.t / (light.area() * cos_l) / num_nee;
        }
      } else {
        emitted = scene.environment.eval(ray.dir);
        if (env_nee) light_pdf = sample_sphere_pdf() / num_nee;
      }
      double weight = 1;
      if (!primary && light_pdf > 0)
        weight = config.mis ? prev_pdf / (prev_pdf + light_pdf) : 0;
      radiance += beta * emitted * weight;
      break;
    }

    auto& material = scene.material_of(prim);
    depth++;
    radiance += beta * material.bsdf.emission;
    if (depth > max_bounces) break;

    auto x          = ray_point(ray, t_hit);
    auto wo         = -ray.dir;
    auto shadow_exc = exponential ? -1 : prim;

    // next-event estimation
    if (num_nee > 0) {
      auto   k = std::min(int(rng.uniform() * num_nee), num_nee - 1);
      vec3   wi, emitted;
      double pdf = 0;
      Ray    shadow;
      if (k < int(scene.lights.size())) {
        auto& light = scene.lights[k];
        auto  uv    = rng.uniform2();
        auto  p     = light.corner + light.edge_u * uv.x + light.edge_v * uv.y;
        auto  d     = p - x;
        auto  dist  = length(d);
        wi          = d / dist;
        auto cos_l  = -dot(wi, light.normal());
        if (cos_l > 0 && dist > 0) {
          pdf     = dist * dist / (light.area() * cos_l) / num_nee;
          emitted = light.radiance;
          shadow  = {x, wi, 0, dist * (1 - 1e-7)};
        }
      } else {
        wi      = sample_sphere(rng.uniform2());
        pdf     = sample_sphere_pdf() / num_nee;
        emitted = scene.environment.eval(wi);
        shadow  = {x, wi, 0, inf};
      }
      auto u_rr = rng.uniform();
      if (pdf > 0 && max_component(emitted) > 0 && !blocked_by_lights(scene, shadow)) {
        auto transmittance =
            exponential
                ? eval_transmittance_exponential(scene.set, shadow)
                : eval_transmittance(scene.set, shadow, config.shadow_rr, u_rr, shadow_exc);
        if (transmittance > 0) {
          auto f      = phase_eval_stochastic(material, wi, wo, rng);
          auto weight = 1.0;
          if (config.mis) {
            auto phase_pdf = phase_pdf_approx(material, wi, wo);
            weight         = pdf / (pdf + phase_pdf);
          }
          radiance += beta * f * emitted * (transmittance * weight / pdf);
        }
      }
    }

    // continue the path
    auto sample = phase_sample(material, wo, rng);
    if (!(max_component(sample.weight) > 0) || !isfinite(sample.weight)) break;
    prev_pdf = phase_pdf_approx(material, sample.wi, wo);
    beta *= sample.weight;
    ray      = {x, sample.wi, 0, inf};
    excluded = exponential ? -1 : prim;
    primary  = false;

    if (depth >= 3) {
      auto q = std::clamp(max_component(beta), 0.05, 1.0);
      if (rng.uniform() >= q) break;
      beta /= q;
    }
  }
  return radiance;
}

static vec3 estimate_sample(const Scene& scene, const RenderConfig& config,
    int x, int y, int s, TransportStats* stats) {
  auto pixel = uint64_t(y) * config.width + x;
  auto rng   = make_rng(sample_seed(config.seed, pixel, s));
  auto j     = rng.uniform2();
  auto ray   = camera_ray(scene.camera, config.width, config.height, x + j.x, y + j.y);
  if (config.mode == RenderMode::transmittance) {
    auto t = eval_transmittance(scene.set, ray);
    return {t, t, t};
  }
  return estimate_path(scene, ray, rng, config, stats);
}

Film render(const Scene& scene, const RenderConfig& config) {
  auto start = std::chrono::steady_clock::now();
  Film film;
  film.width  = config.width;
  film.height = config.height;
  film.sum.assign(size_t(config.width) * config.height, {});
  film.counts.assign(film.sum.size(), 0);

  constexpr int tile = 16;
  auto tiles_x = (config.width + tile - 1) / tile;
  auto tiles_y = (config.height + tile - 1) / tile;
  std::atomic<int>      next_tile{0};
  std::atomic<uint64_t> nan_samples{0};

  auto worker = [&] {
    while (true) {
      auto t = next_tile++;
      if (t >= tiles_x * tiles_y) return;
      auto x0 = (t % tiles_x) * tile, y0 = (t / tiles_x) * tile;
      for (int y = y0; y < std::min(y0 + tile, config.height); y++)
        for (int x = x0; x < std::min(x0 + tile, config.width); x++) {
          auto i = size_t(y) * config.width + x;
          for (int s = 0; s < config.spp; s++) {
            auto l = estimate_sample(scene, config, x, y, s, nullptr);
            if (!isfinite(l)) {
              nan_samples++;
              continue;
            }
            film.sum[i] += l;
            film.counts[i]++;
          }
        }
    }
  };

  auto num_threads = std::min(resolve_thread_count(config.threads), tiles_x * tiles_y);
  if (num_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < num_threads; i++) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  film.stats.nan_samples = nan_samples;
  film.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (config.profile_fraction > 0 && config.mode != RenderMode::transmittance) {
    auto pstart = std::chrono::steady_clock::now();
    auto stride = std::max(1, int(std::lround(1 / config.profile_fraction)));
    auto n      = config.width * config.height;
    for (int i = 0; i < n; i += stride)
      estimate_sample(scene, config, i % config.width, i / config.width, 0,
          &film.stats.transport);
    film.stats.profile_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - pstart).count();
  }
  return film;
}

std::vector<double> render_transmittance(const Scene& scene,
    const Camera& camera, int width, int height, bool jitter, uint64_t seed) {
  std::vector<double> image(size_t(width) * height);
  for (int y = 0; y < height; y++)
    for (int x = 0; x < width; x++) {
      auto pixel = uint64_t(y) * width + x;
      vec2 j     = {0.5, 0.5};
      if (jitter) {
        auto rng = make_rng(sample_seed(seed, pixel, 0));
        j        = rng.uniform2();
      }
      auto ray     = camera_ray(camera, width, height, x + j.x, y + j.y);
      image[pixel] = eval_transmittance(scene.set, ray);
    }
  return image;
}

}  // namespace gaussrt
