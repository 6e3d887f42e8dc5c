#include "lspkit/error.hpp"
#include "lspkit/inp_parser.hpp"
#include "lspkit/spectral.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

using namespace lspkit;
using Catch::Approx;

namespace {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

Edges path(std::size_t n) {
  Edges e;
  for (std::size_t k = 0; k + 1 < n; ++k) e.emplace_back(k, k + 1);
  return e;
}

} // namespace

TEST_CASE("star graph spectrum") {
  const Edges star{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const auto emb = laplacian_embedding(5, star);
  // Independent check: eigenvalues of the hand-built Laplacian.
  Eigen::MatrixXd L(5, 5);
  L << 4, -1, -1, -1, -1, -1, 1, 0, 0, 0, -1, 0, 1, 0, 0, -1, 0, 0, 1, 0, -1, 0, 0, 0, 1;
  const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(L).eigenvalues();
  const std::array<double, 5> expected{0, 1, 1, 1, 5};
  for (Eigen::Index k = 0; k < 5; ++k) {
    CHECK(emb.spectrum[k] == Approx(expected[k]).margin(1e-12));
    CHECK(ref[k] == Approx(expected[k]).margin(1e-12));
  }
  CHECK(emb.eigenvalues[3] == Approx(5.0));
}

TEST_CASE("path graph closed form") {
  const auto emb = laplacian_embedding(6, path(6));
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(emb.eigenvalues[k] == Approx(2.0 * (1.0 - std::cos((k + 1) * std::numbers::pi / 6.0))).margin(1e-12));
  const Eigen::VectorXd fiedler = emb.coords.col(0);
  const bool increasing = (fiedler.tail(5) - fiedler.head(5)).minCoeff() > 0;
  const bool decreasing = (fiedler.tail(5) - fiedler.head(5)).maxCoeff() < 0;
  CHECK((increasing || decreasing));
}

TEST_CASE("embedding properties on a network") {
  auto m = load_inp(testing::data("hanoi.inp"));
  const auto emb = spectral_embedding(m);
  REQUIRE(emb.size() == m.node_count());
  CHECK(emb.spectrum[0] == Approx(0.0).margin(1e-10));
  CHECK(emb.eigenvalues[0] > 1e-9);
  for (std::size_t k = 0; k + 1 < 4; ++k) CHECK(emb.eigenvalues[k] <= emb.eigenvalues[k + 1]);
  const Eigen::Matrix4d gram = emb.coords.transpose() * emb.coords;
  CHECK((gram - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  // Orthogonal to the constant vector.
  CHECK(emb.coords.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index c = 0; c < 4; ++c) {
    Eigen::Index arg = 0;
    emb.coords.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(emb.coords(arg, c) > 0);
  }
}

TEST_CASE("relabelling permutes the embedding") {
  auto m = load_inp(testing::data("hanoi.inp"));
  Edges edges;
  for (const auto& l : m.links()) edges.emplace_back(l.from, l.to);
  const auto emb = laplacian_embedding(m.node_count(), edges);

  std::vector<std::size_t> perm(m.node_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(17));
  Edges relabelled;
  for (auto [a, b] : edges) relabelled.emplace_back(perm[a], perm[b]);
  auto other = laplacian_embedding(m.node_count(), relabelled);

  for (std::size_t k = 0; k < 4; ++k) CHECK(other.eigenvalues[k] == Approx(emb.eigenvalues[k]).margin(1e-10));
  // Same vectors up to sign.
  for (Eigen::Index c = 0; c < 4; ++c) {
    double dot = 0.0;
    for (std::size_t v = 0; v < m.node_count(); ++v)
      dot += other.coords(static_cast<Eigen::Index>(perm[v]), c) * emb.coords(static_cast<Eigen::Index>(v), c);
    CHECK(std::abs(dot) == Approx(1.0).margin(1e-9));
    if (dot < 0) other.coords.col(c) *= -1.0;
  }

  std::vector<std::size_t> all(m.node_count()), all_other(m.node_count());
  std::iota(all.begin(), all.end(), 0);
  std::iota(all_other.begin(), all_other.end(), 0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    const EmbeddingPoint p(n(rng), n(rng), n(rng), n(rng));
    CHECK(perm[nearest_node(emb, all, p)] == nearest_node(other, all_other, p));
  }
}

TEST_CASE("nearest node") {
  NodeEmbedding emb;
  emb.coords = Eigen::MatrixXd::Zero(4, 4);
  emb.coords.row(0) << -1, 0, 0, 0;
  emb.coords.row(1) << 1, 0, 0, 0;
  emb.coords.row(2) << 0.05, 0.1, 0, 0;
  emb.coords.row(3) << 0.05, -0.1, 0, 0;
  const std::vector<std::size_t> all{0, 1, 2, 3};
  CHECK(nearest_node(emb, all, emb.point(1)) == 1);
  // Midpoint of the two far nodes: the nodes near it win, ties go to the smaller index.
  CHECK(nearest_node(emb, all, EmbeddingPoint(0, 0, 0, 0)) == 2);
  const std::vector<std::size_t> without_two{0, 1, 3};
  CHECK(nearest_node(emb, without_two, emb.point(2)) == 3);
  CHECK_THROWS_AS(nearest_node(emb, std::vector<std::size_t>{}, emb.point(0)), Error);
}

TEST_CASE("embedding errors") {
  CHECK_THROWS_AS(laplacian_embedding(4, path(4)), Error);
  Edges split = path(3);
  split.emplace_back(3, 4);
  split.emplace_back(4, 5);
  try {
    laplacian_embedding(6, split);
    FAIL("expected DISCONNECTED");
  } catch (const Error& e) {
    CHECK(e.code() == "DISCONNECTED");
  }
}
