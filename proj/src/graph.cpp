#include "doco/graph.hpp"

#include <queue>
#include <string>

#include "doco/errors.hpp"
#include "doco/random.hpp"

namespace doco {

Graph::Graph(Eigen::MatrixXi adjacency) : adjacency_(std::move(adjacency)) {
  const auto n = adjacency_.rows();
  if (n == 0 || adjacency_.cols() != n) throw ValidationError("adjacency not square", "empty or non-square matrix");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency_(i, i) != 0)
      throw ValidationError("adjacency diagonal not zero", "node " + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      const int a = adjacency_(i, j);
      if (a != 0 && a != 1)
        throw ValidationError("weighted graph", "edge weights must be 0 or 1");
      if (a != adjacency_(j, i))
        throw ValidationError("adjacency not symmetric",
                              "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
  neighbors_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (adjacency_(i, j)) neighbors_[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
}

Graph Graph::ring(int n) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
  if (n == 2) {
    a(0, 1) = a(1, 0) = 1;
  } else if (n > 2) {
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      a(i, j) = a(j, i) = 1;
    }
  }
  return Graph(std::move(a));
}

Graph Graph::complete(int n) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Ones(n, n);
  a.diagonal().setZero();
  return Graph(std::move(a));
}

Graph Graph::random_connected(int n, double edge_prob, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("random_connected: need at least one node");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0))
    throw PreconditionError("random_connected: edge probability must lie in (0, 1]");
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < edge_prob) a(i, j) = a(j, i) = 1;
    if (is_connected(a)) return Graph(std::move(a));
  }
  throw ValidationError("graph not connected", "no connected draw in 1000 attempts; raise edge_prob");
}

int Graph::edge_count() const { return adjacency_.sum() / 2; }

bool is_connected(const Eigen::MatrixXi& adjacency) {
  const auto n = adjacency.rows();
  if (adjacency.cols() != n) throw StructuralError("is_connected: adjacency not square");
  if (adjacency != adjacency.transpose()) throw StructuralError("is_connected: adjacency not symmetric");
  if (n <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Eigen::Index reached = 1;
  while (!frontier.empty()) {
    const auto i = frontier.front();
    frontier.pop();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) != 0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        frontier.push(j);
      }
    }
  }
  return reached == n;
}

}  // namespace doco
