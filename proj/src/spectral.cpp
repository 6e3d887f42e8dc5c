#include "lspkit/spectral.hpp"

#include "lspkit/error.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <queue>

namespace lspkit {

NodeEmbedding laplacian_embedding(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  if (num_nodes < 5) throw Error("TOO_SMALL", "spectral embedding needs at least 5 nodes");
  const auto n = static_cast<Eigen::Index>(num_nodes);
  Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) throw Error("UNKNOWN_NODE", "edge endpoint out of range");
    if (a == b) continue;
    adjacency(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
    adjacency(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
  }

  std::vector<bool> seen(num_nodes, false);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (adjacency(u, v) != 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  if (reached != num_nodes) throw Error("DISCONNECTED", "graph Laplacian of a disconnected network");

  Eigen::MatrixXd laplacian = -adjacency;
  laplacian.diagonal() = adjacency.rowwise().sum();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
  if (solver.info() != Eigen::Success) throw Error("SINGULAR_SYSTEM", "Laplacian eigendecomposition failed");

  NodeEmbedding out;
  out.spectrum = solver.eigenvalues();
  out.coords.resize(n, 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(k + 1);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    out.coords.col(k) = v;
    out.eigenvalues[static_cast<std::size_t>(k)] = out.spectrum[k + 1];
  }
  return out;
}

NodeEmbedding spectral_embedding(const NetworkModel& model) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& link : model.links()) edges.emplace_back(link.from, link.to);
  return laplacian_embedding(model.node_count(), edges);
}

std::size_t nearest_node(const NodeEmbedding& embedding, std::span<const std::size_t> candidates,
                         const EmbeddingPoint& point) {
  if (candidates.empty()) throw Error("EMPTY_SPACE", "no candidate nodes for nearest-neighbour lookup");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_dist = std::numeric_limits<double>::infinity();
  for (auto node : candidates) {
    const double dist = (embedding.point(node) - point).squaredNorm();
    if (dist < best_dist || (dist == best_dist && node < best)) {
      best = node;
      best_dist = dist;
    }
  }
  return best;
}

} // namespace lspkit
