#pragma once

#include "lspkit/network.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace lspkit {

using EmbeddingPoint = Eigen::Vector4d;

/// Rows are nodes; columns are Laplacian eigenvectors 2..5 (ascending eigenvalue).
/// Each eigenvector is oriented so that its largest-magnitude entry is positive.
struct NodeEmbedding {
  Eigen::MatrixXd coords;           // N x 4
  std::array<double, 4> eigenvalues{}; // lambda_2 .. lambda_5
  Eigen::VectorXd spectrum;         // all eigenvalues, ascending

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
  EmbeddingPoint point(std::size_t node) const { return coords.row(static_cast<Eigen::Index>(node)).transpose(); }
};

/// Embedding of an undirected, unweighted graph with L = D - A.
/// Throws Error{"TOO_SMALL"} for fewer than 5 nodes and Error{"DISCONNECTED"}.
NodeEmbedding laplacian_embedding(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges);

/// Embedding over every node and link of the network.
NodeEmbedding spectral_embedding(const NetworkModel& model);

/// Candidate closest to `point` in Euclidean distance; ties go to the smaller index.
std::size_t nearest_node(const NodeEmbedding& embedding, std::span<const std::size_t> candidates,
                         const EmbeddingPoint& point);

} // namespace lspkit
