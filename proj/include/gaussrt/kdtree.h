// kd-tree over primitive bounding boxes. Cells never overlap, so a ray walks
// leaves strictly front to back; primitives straddling a split are referenced
// from both sides.

#pragma once

#include <span>
#include <vector>

#include "gaussrt/gaussian.h"

namespace gaussrt {

struct KdConfig {
  int max_depth      = 0; // 0 selects 8 + 1.3 log2(N)
  int max_leaf_prims = 4;
};

struct KdNode {
  int    axis = 3; // 0..2 interior split axis, 3 for leaves
  double split = 0;
  int    children[2] = {-1, -1}; // below, above
  int    prim_offset = 0, prim_count = 0;

  bool is_leaf() const { return axis == 3; }
};

struct SceneAccel {
  std::vector<KdNode> nodes;
  std::vector<int>    prim_ids;
  bbox3               bounds;
  int                 depth = 0;

  // Calls visitor(std::span<const int> prims, t_enter, t_exit) for every leaf
  // the ray crosses inside [t0, t1], in front-to-back order. Empty leaves are
  // visited too. The visitor returns false to stop the traversal.
  template <typename Visitor>
  void traverse(const vec3& origin, const vec3& dir, double t0, double t1,
      Visitor&& visitor) const;
};

int default_max_depth(size_t num_prims);

SceneAccel build_accel(std::span<const bbox3> boxes, const KdConfig& config = {});
SceneAccel build_accel(
    std::span<const PreparedGaussian> prims, const KdConfig& config = {});

template <typename Visitor>
void SceneAccel::traverse(const vec3& origin, const vec3& dir, double t0,
    double t1, Visitor&& visitor) const {
  if (nodes.empty()) return;
  auto tmin = t0, tmax = t1;
  if (!intersect_bbox(bounds, origin, dir, tmin, tmax)) return;

  struct Todo {
    int    node;
    double tmin, tmax;
  };
  Todo stack[128];
  int  top  = 0;
  int  node = 0;
  while (true) {
    auto& n = nodes[node];
    if (!n.is_leaf()) {
      auto a = n.axis;
      if (dir[a] == 0) {
        node = n.children[origin[a] <= n.split ? 0 : 1];
        continue;
      }
      auto tsplit = (n.split - origin[a]) / dir[a];
      auto first  = n.children[dir[a] > 0 ? 0 : 1];
      auto second = n.children[dir[a] > 0 ? 1 : 0];
      if (tsplit >= tmax) {
        node = first;
      } else if (tsplit <= tmin) {
        node = second;
      } else {
        stack[top++] = {second, tsplit, tmax};
        node         = first;
        tmax         = tsplit;
      }
      continue;
    }
    std::span<const int> prims{prim_ids.data() + n.prim_offset,
        static_cast<size_t>(n.prim_count)};
    if (!visitor(prims, tmin, tmax)) return;
    if (top == 0) return;
    --top;
    node = stack[top].node;
    tmin = stack[top].tmin;
    tmax = stack[top].tmax;
  }
}

}  // namespace gaussrt
