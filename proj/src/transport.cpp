#include "gaussrt/transport.h"

#include <algorithm>
#include <chrono>

namespace gaussrt {

PrimitiveSet make_primitive_set(std::span<const GaussianPrimitive> prims,
    double cutoff, const KdConfig& config) {
  PrimitiveSet set;
  set.cutoff = cutoff;
  set.prims  = prepare(prims, cutoff);
  set.accel  = build_accel(std::span<const PreparedGaussian>(set.prims), config);
  return set;
}

TransportStats& TransportStats::operator+=(const TransportStats& o) {
  integral_seconds += o.integral_seconds;
  disambiguation_seconds += o.disambiguation_seconds;
  total_seconds += o.total_seconds;
  leaves += o.leaves;
  integrals += o.integrals;
  disambiguations += o.disambiguations;
  return *this;
}

bool primitive_interval(const PreparedGaussian& g, const Ray& ray,
    double& t_start, double& t_end) {
  auto prof = ray_profile(g, ray.origin, ray.dir);
  if (!prof.ellipsoid_interval(g.cutoff2, t_start, t_end)) return false;
  t_start = std::max(t_start, ray.t0);
  t_end   = std::min(t_end, ray.t1);
  return t_end > t_start;
}

std::vector<Segment> partition_segments(
    std::span<const PrimInterval> intervals, double t0, double t1) {
  struct Endpoint {
    double t;
    bool   start;
    int    index;
  };
  std::vector<Endpoint> events;
  for (int i = 0; i < static_cast<int>(intervals.size()); i++) {
    auto a = std::max(t0, intervals[i].t_start);
    auto b = std::min(t1, intervals[i].t_end);
    if (!(b > a)) continue;
    events.push_back({a, true, i});
    events.push_back({b, false, i});
  }
  std::sort(events.begin(), events.end(), [](auto& x, auto& y) {
    return x.t < y.t || (x.t == y.t && !x.start && y.start);
  });

  std::vector<Segment> segments;
  std::vector<int>     active;
  auto                 cursor = t0;
  auto emit = [&](double t) {
    if (t <= cursor) return;
    if (!segments.empty() && segments.back().active == active)
      segments.back().t_end = t;
    else
      segments.push_back({cursor, t, active});
    cursor = t;
  };
  size_t e = 0;
  while (e < events.size()) {
    auto t = events[e].t;
    emit(t);
    for (; e < events.size() && events[e].t == t; e++) {
      auto id = intervals[events[e].index].id;
      if (events[e].start)
        active.insert(std::lower_bound(active.begin(), active.end(), id), id);
      else
        active.erase(std::lower_bound(active.begin(), active.end(), id));
    }
  }
  emit(t1);
  return segments;
}

namespace {

using clock_type = std::chrono::steady_clock;

struct Timer {
  double* target;
  clock_type::time_point start;
  explicit Timer(double* t) : target(t) {
    if (target) start = clock_type::now();
  }
  ~Timer() {
    if (target)
      *target +=
          std::chrono::duration<double>(clock_type::now() - start).count();
  }
};

// Primitive clipped to one leaf (or segment) of the traversal.
struct LeafItem {
  int        id;
  RayProfile profile;
  double     ta, tb; // support within the leaf
  double     half_mass;
};

}  // namespace

ScatterEvent disambiguate(const PrimitiveSet& scene, const Ray& ray,
    std::span<const int> ids, std::span<const ClippedProfile> clipped,
    double t_prev, double t_end, double cdf_prev, double u, double u2,
    DisambiguationRule rule, double* t_u_out) {
  ScatterEvent event;
  if (ids.empty()) return event;

  double total = 0;
  for (auto& c : clipped)
    total += 0.5 * c.profile.integral(std::max(t_prev, c.ta), std::min(t_end, c.tb));
  auto target = std::clamp(u - cdf_prev, 0.0, total);
  auto t_u    = solve_multi_inversion(clipped, t_prev, t_end, target);
  if (t_u_out) *t_u_out = t_u;

  // selection weights at the solved distance
  std::vector<double> weights(ids.size());
  double              sum = 0;
  auto                fill_interval_mass = [&] {
    sum = 0;
    for (size_t j = 0; j < ids.size(); j++) {
      auto& c    = clipped[j];
      weights[j] = c.profile.integral(
          std::max(t_prev, c.ta), std::min(t_u, c.tb));
      sum += weights[j];
    }
  };
  if (rule == DisambiguationRule::local_density) {
    for (size_t j = 0; j < ids.size(); j++) {
      auto& c    = clipped[j];
      weights[j] = (t_u >= c.ta && t_u <= c.tb) ? c.profile.density(t_u) : 0;
      sum += weights[j];
    }
    if (!(sum > 0)) fill_interval_mass();
  } else {
    fill_interval_mass();
  }

  size_t pick = 0;
  if (sum > 0) {
    auto   threshold = u2 * sum;
    double acc       = 0;
    pick             = ids.size() - 1;
    for (size_t j = 0; j < ids.size(); j++) {
      acc += weights[j];
      if (threshold < acc) {
        pick = j;
        break;
      }
    }
    while (weights[pick] == 0 && pick > 0) pick--;
  }

  event.kind         = ScatterEvent::Kind::primitive;
  event.primitive_id = ids[pick];
  if (!primitive_interval(scene.prims[ids[pick]], ray, event.t_start, event.t_end))
    event.t_start = event.t_end = t_u;
  event.t_mid = 0.5 * (event.t_start + event.t_end);
  return event;
}

ScatterEvent sample_free_flight(const PrimitiveSet& scene, const Ray& ray,
    double u, const std::function<double()>& next_uniform, int excluded_id,
    const FreeFlightOptions& options) {
  auto* stats = options.stats;
  Timer total_timer(stats ? &stats->total_seconds : nullptr);

  ScatterEvent event;
  double       cdf = 0;
  std::vector<LeafItem> items;

  auto make_event = [&](int id) {
    ScatterEvent e;
    e.kind         = ScatterEvent::Kind::primitive;
    e.primitive_id = id;
    primitive_interval(scene.prims[id], ray, e.t_start, e.t_end);
    e.t_mid = 0.5 * (e.t_start + e.t_end);
    return e;
  };

  scene.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1,
      [&](std::span<const int> leaf, double ta, double tb) {
        if (stats) stats->leaves++;
        items.clear();
        double leaf_mass = 0;
        {
          Timer timer(stats ? &stats->integral_seconds : nullptr);
          for (auto id : leaf) {
            if (id == excluded_id) continue;
            auto& g    = scene.prims[id];
            auto  prof = ray_profile(g, ray.origin, ray.dir);
            double ea, eb;
            if (!prof.ellipsoid_interval(g.cutoff2, ea, eb)) continue;
            ea = std::max(ea, ta);
            eb = std::min(eb, tb);
            if (!(eb > ea)) continue;
            auto m = 0.5 * prof.integral(ea, eb);
            items.push_back({id, prof, ea, eb, m});
            leaf_mass += m;
          }
          if (stats) stats->integrals += items.size();
        }

        // cases (1) and (2): plain accumulation
        if (items.size() <= 1 || cdf + leaf_mass < 1) {
          for (auto& item : items) {
            cdf += item.half_mass;
            if (u < cdf) {
              event = make_event(item.id);
              return false;
            }
          }
          return true;
        }

        // case (3): sweep the leaf into segments
        std::vector<PrimInterval> intervals;
        for (int i = 0; i < static_cast<int>(items.size()); i++)
          intervals.push_back({i, items[i].ta, items[i].tb});
        auto segments = partition_segments(intervals, ta, tb);
        for (auto& seg : segments) {
          if (seg.active.empty()) continue;
          double seg_mass = 0;
          std::vector<double> masses;
          {
            Timer timer(stats ? &stats->integral_seconds : nullptr);
            for (auto i : seg.active) {
              masses.push_back(
                  0.5 * items[i].profile.integral(seg.t_start, seg.t_end));
              seg_mass += masses.back();
            }
            if (stats) stats->integrals += seg.active.size();
          }
          if (seg.active.size() == 1 || cdf + seg_mass < 1) {
            for (size_t j = 0; j < seg.active.size(); j++) {
              cdf += masses[j];
              if (u < cdf) {
                event = make_event(items[seg.active[j]].id);
                return false;
              }
            }
            continue;
          }
          // ambiguous: the sample terminates inside this segment
          Timer timer(stats ? &stats->disambiguation_seconds : nullptr);
          if (stats) stats->disambiguations++;
          std::vector<int>            ids;
          std::vector<ClippedProfile> clipped;
          for (auto i : seg.active) {
            ids.push_back(items[i].id);
            clipped.push_back({items[i].profile, seg.t_start, seg.t_end});
          }
          event = disambiguate(scene, ray, ids, clipped, seg.t_start,
              seg.t_end, cdf, u, next_uniform(), options.rule);
          return false;
        }
        return true;
      });
  return event;
}

ScatterEvent sample_free_flight(const PrimitiveSet& scene, const Ray& ray,
    double u, double u2, int excluded_id, const FreeFlightOptions& options) {
  return sample_free_flight(
      scene, ray, u, [u2] { return u2; }, excluded_id, options);
}

template <typename Fn>
static void for_each_clipped(
    const PrimitiveSet& scene, const Ray& ray, int excluded_id, Fn&& fn) {
  scene.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1,
      [&](std::span<const int> leaf, double ta, double tb) {
        for (auto id : leaf) {
          if (id == excluded_id) continue;
          auto& g    = scene.prims[id];
          auto  prof = ray_profile(g, ray.origin, ray.dir);
          double ea, eb;
          if (!prof.ellipsoid_interval(g.cutoff2, ea, eb)) continue;
          ea = std::max(ea, ta);
          eb = std::min(eb, tb);
          if (!(eb > ea)) continue;
          if (!fn(id, prof, ea, eb)) return false;
        }
        return true;
      });
}

double eval_transmittance(const PrimitiveSet& scene, const Ray& ray,
    const RussianRoulette& rr, double u, int excluded_id) {
  double acc = 0, weight = 1;
  bool   rolled = false, killed = false;
  for_each_clipped(scene, ray, excluded_id,
      [&](int, const RayProfile& prof, double ea, double eb) {
        acc += 0.5 * prof.integral(ea, eb);
        if (acc >= 1) return false;
        if (rr.enabled && !rolled && 1 - acc < rr.epsilon) {
          rolled = true;
          if (u < rr.q) {
            killed = true;
            return false;
          }
          weight = 1 / (1 - rr.q);
        }
        return true;
      });
  if (killed) return 0;
  return weight * std::max(0.0, 1 - acc);
}

double accumulated_cdf(const PrimitiveSet& scene, const Ray& ray, int excluded_id) {
  double acc = 0;
  for_each_clipped(scene, ray, excluded_id,
      [&](int, const RayProfile& prof, double ea, double eb) {
        acc += 0.5 * prof.integral(ea, eb);
        return true;
      });
  return acc;
}

ExpCollision sample_free_flight_exponential(
    const PrimitiveSet& scene, const Ray& ray, Rng& rng, int excluded_id) {
  ExpCollision best;
  scene.accel.traverse(ray.origin, ray.dir, ray.t0, ray.t1,
      [&](std::span<const int> leaf, double ta, double tb) {
        for (auto id : leaf) {
          if (id == excluded_id) continue;
          auto& g    = scene.prims[id];
          auto  prof = ray_profile(g, ray.origin, ray.dir);
          double ea, eb;
          if (!prof.ellipsoid_interval(g.cutoff2, ea, eb)) continue;
          ea = std::max(ea, ta);
          eb = std::min(eb, tb);
          if (!(eb > ea)) continue;
          auto target = -std::log1p(-rng.uniform());
          if (target >= prof.integral(ea, eb)) continue;
          auto t = std::clamp(prof.invert(ea, target), ea, eb);
          if (t < best.t) best = {true, t, id};
        }
        // pieces in later leaves lie strictly behind this one
        return !best.hit;
      });
  return best;
}

double eval_transmittance_exponential(
    const PrimitiveSet& scene, const Ray& ray, int excluded_id) {
  return std::exp(-2 * accumulated_cdf(scene, ray, excluded_id));
}

}  // namespace gaussrt
