#include "gaussrt/kdtree.h"

#include <algorithm>
#include <array>

namespace gaussrt {

int default_max_depth(size_t num_prims) {
  if (num_prims <= 1) return 8;
  return static_cast<int>(std::lround(8 + 1.3 * std::log2(double(num_prims))));
}

namespace {

constexpr int    num_bins        = 32;
constexpr double traversal_cost  = 1;
constexpr double intersect_cost  = 20;
constexpr double empty_bonus     = 0.3;
constexpr int    max_bad_refines = 3;

struct Builder {
  std::span<const bbox3> boxes;
  KdConfig               config;
  SceneAccel&            accel;

  int make_leaf(const std::vector<int>& prims) {
    KdNode n;
    n.prim_offset = static_cast<int>(accel.prim_ids.size());
    n.prim_count  = static_cast<int>(prims.size());
    accel.prim_ids.insert(accel.prim_ids.end(), prims.begin(), prims.end());
    accel.nodes.push_back(n);
    return static_cast<int>(accel.nodes.size()) - 1;
  }

  struct Split {
    int    axis = -1;
    double pos  = 0;
    double cost = inf;
    int    below = 0, above = 0;
  };

  Split find_sah_split(const bbox3& cell, const std::vector<int>& prims) {
    Split best;
    auto  area = cell.surface_area();
    auto  d    = cell.diagonal();
    for (int axis = 0; axis < 3; axis++) {
      if (!(d[axis] > 0)) continue;
      // starts[b] / ends[b]: primitives whose clipped min / max lands in bin b
      std::array<int, num_bins + 1> starts{}, ends{};
      auto bin_of = [&](double x) {
        auto f = (x - cell.min[axis]) / d[axis];
        return std::clamp(int(f * num_bins), 0, num_bins - 1);
      };
      for (auto id : prims) {
        starts[bin_of(boxes[id].min[axis])]++;
        ends[bin_of(boxes[id].max[axis])]++;
      }
      // plane j sits between bin j-1 and bin j
      int below = 0, above = static_cast<int>(prims.size());
      for (int j = 1; j < num_bins; j++) {
        below += starts[j - 1];
        above -= ends[j - 1];
        auto pos   = cell.min[axis] + d[axis] * j / num_bins;
        auto left  = cell;
        auto right = cell;
        left.max[axis]  = pos;
        right.min[axis] = pos;
        auto pb    = left.surface_area() / area;
        auto pa    = right.surface_area() / area;
        auto bonus = (below == 0 || above == 0) ? empty_bonus : 0.0;
        auto cost  = traversal_cost +
                    intersect_cost * (1 - bonus) * (pb * below + pa * above);
        if (cost < best.cost) best = {axis, pos, cost, below, above};
      }
    }
    return best;
  }

  Split median_split(const bbox3& cell, const std::vector<int>& prims) {
    auto d    = cell.diagonal();
    int  axis = d.x >= d.y && d.x >= d.z ? 0 : (d.y >= d.z ? 1 : 2);
    std::vector<double> centers;
    for (auto id : prims)
      centers.push_back(0.5 * (boxes[id].min[axis] + boxes[id].max[axis]));
    std::nth_element(
        centers.begin(), centers.begin() + centers.size() / 2, centers.end());
    auto pos = std::clamp(centers[centers.size() / 2], cell.min[axis],
        cell.max[axis]);
    if (pos <= cell.min[axis] || pos >= cell.max[axis])
      pos = 0.5 * (cell.min[axis] + cell.max[axis]);
    Split s;
    s.axis = axis;
    s.pos  = pos;
    for (auto id : prims) {
      if (boxes[id].min[axis] <= pos) s.below++;
      if (boxes[id].max[axis] >= pos) s.above++;
    }
    return s;
  }

  int build(const bbox3& cell, std::vector<int> prims, int depth,
      int bad_refines) {
    accel.depth = std::max(accel.depth, depth);
    auto n      = static_cast<int>(prims.size());
    if (n <= config.max_leaf_prims || depth >= config.max_depth)
      return make_leaf(prims);

    auto split     = find_sah_split(cell, prims);
    auto leaf_cost = intersect_cost * n;
    if (split.axis < 0 || (split.below == n && split.above == n))
      split = median_split(cell, prims);
    else if (split.cost >= leaf_cost) {
      if (bad_refines >= max_bad_refines) return make_leaf(prims);
      bad_refines++;
    }
    if (split.below == n && split.above == n) return make_leaf(prims);

    std::vector<int> below, above;
    for (auto id : prims) {
      if (boxes[id].min[split.axis] <= split.pos) below.push_back(id);
      if (boxes[id].max[split.axis] >= split.pos) above.push_back(id);
    }
    prims.clear();
    prims.shrink_to_fit();

    auto index = static_cast<int>(accel.nodes.size());
    accel.nodes.push_back({split.axis, split.pos});
    auto lcell = cell, rcell = cell;
    lcell.max[split.axis] = split.pos;
    rcell.min[split.axis] = split.pos;
    auto left  = build(lcell, std::move(below), depth + 1, bad_refines);
    auto right = build(rcell, std::move(above), depth + 1, bad_refines);
    accel.nodes[index].children[0] = left;
    accel.nodes[index].children[1] = right;
    return index;
  }
};

}  // namespace

SceneAccel build_accel(std::span<const bbox3> boxes, const KdConfig& config) {
  SceneAccel accel;
  auto       cfg = config;
  if (cfg.max_depth <= 0) cfg.max_depth = default_max_depth(boxes.size());
  cfg.max_depth = std::min(cfg.max_depth, 100);
  cfg.max_leaf_prims = std::max(cfg.max_leaf_prims, 1);

  std::vector<int> all;
  for (int i = 0; i < static_cast<int>(boxes.size()); i++) {
    if (boxes[i].empty()) continue;
    accel.bounds = merge(accel.bounds, boxes[i]);
    all.push_back(i);
  }
  Builder builder{boxes, cfg, accel};
  builder.build(accel.bounds, std::move(all), 0, 0);
  return accel;
}

SceneAccel build_accel(
    std::span<const PreparedGaussian> prims, const KdConfig& config) {
  std::vector<bbox3> boxes;
  boxes.reserve(prims.size());
  for (auto& p : prims) boxes.push_back(p.bounds);
  return build_accel(boxes, config);
}

}  // namespace gaussrt
