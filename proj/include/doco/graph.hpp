#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace doco {

/// Undirected communication graph with 0/1 edge weights.
class Graph {
 public:
  Graph() = default;

  /// Validates 0/1 entries, zero diagonal and symmetry (ValidationError).
  explicit Graph(Eigen::MatrixXi adjacency);

  static Graph ring(int n);
  static Graph complete(int n);
  /// Erdos-Renyi draw with edge probability `edge_prob`, redrawn until
  /// connected (at most 1000 attempts).
  static Graph random_connected(int n, double edge_prob, std::uint64_t seed);

  int size() const { return static_cast<int>(adjacency_.rows()); }
  int weight(int i, int j) const { return adjacency_(i, j); }
  const std::vector<int>& neighbors(int i) const { return neighbors_[static_cast<std::size_t>(i)]; }
  const Eigen::MatrixXi& adjacency() const { return adjacency_; }
  int edge_count() const;

  bool operator==(const Graph& o) const {
    return adjacency_.rows() == o.adjacency_.rows() && adjacency_ == o.adjacency_;
  }

 private:
  Eigen::MatrixXi adjacency_;
  std::vector<std::vector<int>> neighbors_;
};

/// BFS from node 0 reaches every node. Throws StructuralError for an
/// asymmetric matrix.
bool is_connected(const Eigen::MatrixXi& adjacency);
inline bool is_connected(const Graph& g) { return is_connected(g.adjacency()); }

}  // namespace doco
