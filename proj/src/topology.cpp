#include "rfzw/topology.hpp"

#include <deque>

#include <fmt/format.h>

namespace rfzw {

Corner corner_from_string(const std::string& s) {
  if (s == "bottom-right") return Corner::BottomRight;
  if (s == "bottom-left") return Corner::BottomLeft;
  if (s == "top-left") return Corner::TopLeft;
  if (s == "top-right") return Corner::TopRight;
  throw ConfigError(fmt::format("unknown source corner '{}'", s));
}

std::string to_string(Corner c) {
  switch (c) {
    case Corner::BottomRight:
      return "bottom-right";
    case Corner::BottomLeft:
      return "bottom-left";
    case Corner::TopLeft:
      return "top-left";
    case Corner::TopRight:
      return "top-right";
  }
  return "?";
}

Topology make_topology(Eigen::Matrix2Xd positions, int source, double max_range) {
  Topology t;
  t.positions = std::move(positions);
  t.source = source;
  t.max_range = max_range;
  const int n = t.size();
  if (source < 0 || source >= n) throw ConfigError("source index out of range");

  t.adjacency.setConstant(n, n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool linked = t.distance(i, j) <= max_range;
      t.adjacency(i, j) = linked;
      t.adjacency(j, i) = linked;
    }
  }

  t.hop_count.assign(n, -1);
  t.hop_count[source] = 0;
  std::deque<int> queue{source};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < n; ++v) {
      if (t.adjacency(u, v) && t.hop_count[v] < 0) {
        t.hop_count[v] = t.hop_count[u] + 1;
        queue.push_back(v);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (t.hop_count[i] < 0) {
      throw TopologyError(fmt::format("node {} is not reachable from source {} within {:g} m", i,
                                      source, max_range));
    }
    t.h_max = std::max(t.h_max, t.hop_count[i]);
  }
  return t;
}

Topology build_grid(int rows, int cols, double d, double max_range, Corner source_corner) {
  if (rows < 1 || cols < 1) throw ConfigError("grid needs at least one row and one column");
  if (!(d > 0.0)) throw ConfigError("grid distance must be positive");
  Eigen::Matrix2Xd pos(2, rows * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) pos.col(r * cols + c) << c * d, r * d;
  }
  int src_row = 0;
  int src_col = cols - 1;
  switch (source_corner) {
    case Corner::BottomRight:
      break;
    case Corner::BottomLeft:
      src_col = 0;
      break;
    case Corner::TopLeft:
      src_row = rows - 1;
      src_col = 0;
      break;
    case Corner::TopRight:
      src_row = rows - 1;
      break;
  }
  return make_topology(std::move(pos), src_row * cols + src_col, max_range);
}

}  // namespace rfzw
