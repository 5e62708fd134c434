#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfzw/signal.hpp"

namespace rfzw {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Corner { BottomRight, BottomLeft, TopLeft, TopRight };

Corner corner_from_string(const std::string& s);
std::string to_string(Corner c);

/// Node positions, the range graph and BFS hop counts from the source.
struct Topology {
  Eigen::Matrix2Xd positions;
  int source = 0;
  double max_range = 11.0;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> adjacency;
  std::vector<int> hop_count;
  int h_max = 0;

  int size() const { return static_cast<int>(positions.cols()); }
  double distance(int a, int b) const { return (positions.col(a) - positions.col(b)).norm(); }
  int degree(int n) const { return static_cast<int>(adjacency.row(n).count()); }
};

/// Builds adjacency (distance <= max_range) and hop counts; throws
/// TopologyError when some node is unreachable from the source.
Topology make_topology(Eigen::Matrix2Xd positions, int source, double max_range);

/// rows x cols lattice with spacing d; node (row, col) sits at
/// (col * d, row * d) with index row * cols + col. Row 0 is the bottom row.
Topology build_grid(int rows, int cols, double d, double max_range,
                    Corner source_corner = Corner::BottomRight);

}  // namespace rfzw
