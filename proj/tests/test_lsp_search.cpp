#include "lspkit/error.hpp"
#include "lspkit/experiment.hpp"
#include "lspkit/lsp_search.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

using namespace lspkit;
using Catch::Approx;

namespace {

// Experiment, detector and search context kept at fixed addresses.
struct Setup {
  Experiment exp;
  DetectorModel detector;
  SearchSpace space;
  std::unique_ptr<SearchContext> ctx;

  SearchContext context(unsigned threads = 1) const {
    SearchContext c = *ctx;
    c.threads = threads;
    return c;
  }
};

std::unique_ptr<Setup> make_setup(const std::string& config, const std::string& rule) {
  auto cfg = load_config(testing::data(config));
  cfg.rule = rule;
  auto s = std::make_unique<Setup>();
  s->exp = prepare_experiment(cfg);
  s->detector = train_experiment_detector(s->exp).model;
  s->space = make_search_space(s->exp);
  s->ctx = std::make_unique<SearchContext>(
      SearchContext{s->exp.model, s->exp.demands, s->exp.baseline, s->detector, cfg.window_steps()});
  return s;
}

const Setup& grid() {
  static const auto s = make_setup("toy_grid.json", "weighted_sum");
  return *s;
}

const Setup& grid_threshold() {
  static const auto s = make_setup("toy_grid.json", "max_threshold");
  return *s;
}

const Setup& toy3() {
  static const auto s = make_setup("toy3.json", "max_threshold");
  return *s;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("pruning keeps rows and columns with a hidden pair") {
  const auto [rows, cols] = prune_detection_matrix({{true, true}, {false, true}});
  CHECK(rows == std::vector<std::size_t>{1});
  CHECK(cols == std::vector<std::size_t>{0});
  const auto [r2, c2] = prune_detection_matrix({{true, true}, {true, true}});
  CHECK(r2.empty());
  CHECK(c2.empty());
}

TEST_CASE("single pair search matches the line search") {
  const auto& s = grid();
  SearchSpace one = s.space;
  one.candidate_nodes = {s.exp.model.node_index("J9")};
  one.candidate_starts = {s.space.candidate_starts[10]};
  const auto out = bisection_search(one, s.context());
  const auto ctx = s.context();
  const LeakOracle oracle(ctx, one.window);
  const auto line = max_undetected_area(oracle, one, one.candidate_nodes[0], one.candidate_starts[0]);
  CHECK(out.lsp_node == one.candidate_nodes[0]);
  CHECK(std::abs(out.max_undetected_area - line.area) <= one.epsilon);
}

TEST_CASE("line search agrees with a grid scan") {
  const auto& s = grid();
  const auto ctx = s.context();
  const LeakOracle oracle(ctx, s.space.window);
  const auto node = s.exp.model.node_index("J9");
  const auto start = s.space.candidate_starts[20];
  // Largest hidden area on a 0.1 cm2 grid; the scan also checks monotonicity.
  double scanned = 0.0;
  bool seen_detection = false;
  for (double a = s.space.area_min; a <= 80.0; a += 0.1) {
    const bool hit = oracle.detected(node, start, a);
    if (!hit) {
      CHECK_FALSE(seen_detection);
      scanned = a;
    }
    seen_detection = seen_detection || hit;
  }
  REQUIRE(seen_detection);
  const auto line = max_undetected_area(oracle, s.space, node, start);
  CHECK(std::abs(line.area - scanned) <= s.space.epsilon + 0.1);
  CHECK_FALSE(oracle.detected(node, start, line.area));
}

TEST_CASE("floor and ceiling of the area bracket") {
  const auto& s = grid();
  SECTION("detected at the smallest area") {
    SearchSpace space = s.space;
    space.area_min = 400.0;
    const auto out = bisection_search(space, s.context());
    CHECK(out.max_undetected_area == 0.0);
    CHECK_FALSE(out.unbounded);
    CHECK(out.lsp_node == *std::min_element(space.candidate_nodes.begin(), space.candidate_nodes.end()));
    CHECK(brute_force_lsp(space, s.context()).max_undetected_area == 0.0);
  }
  SECTION("hidden at the largest area") {
    DetectorModel deaf = s.detector;
    for (auto& q : deaf.residual_weights) q *= 1e-9;
    SearchContext ctx{s.exp.model, s.exp.demands, s.exp.baseline, deaf, s.ctx->leak_duration_steps};
    SearchSpace space = s.space;
    space.area_max = 50.0;
    const auto out = bisection_search(space, ctx);
    CHECK(out.unbounded);
    CHECK(out.max_undetected_area == 50.0);
    REQUIRE_FALSE(out.warnings.empty());
    CHECK(out.warnings[0].rfind("UNBOUNDED", 0) == 0);
  }
}

TEST_CASE("bisection agrees with the oracle") {
  for (const Setup* s : {&toy3(), &grid(), &grid_threshold()}) {
    const auto oracle = brute_force_lsp(s->space, s->context());
    for (bool pruning : {true, false}) {
      INFO(s->exp.config.network << " pruning " << pruning);
      const auto bis = bisection_search(s->space, s->context(), pruning);
      CHECK(bis.lsp_node == oracle.lsp_node);
      CHECK(bis.best_start == oracle.best_start);
      CHECK(std::abs(bis.max_undetected_area - oracle.max_undetected_area) <= s->space.epsilon);
    }
  }
}

TEST_CASE("pruned pairs are detected at the pruning area") {
  for (const Setup* s : {&toy3(), &grid(), &grid_threshold()}) {
    const auto bis = bisection_search(s->space, s->context());
    const auto ctx = s->context();
    const LeakOracle oracle(ctx, s->space.window);
    for (std::size_t k = 0; k + 1 < bis.detections.size(); ++k) {
      const auto& snap = bis.detections[k];
      const auto& next = bis.detections[k + 1];
      for (std::size_t i = 0; i < snap.nodes.size(); ++i)
        for (std::size_t j = 0; j < snap.starts.size(); ++j) {
          const bool kept = std::count(next.nodes.begin(), next.nodes.end(), snap.nodes[i]) &&
                            std::count(next.starts.begin(), next.starts.end(), snap.starts[j]);
          if (kept) continue;
          // A dropped pair must be detected at this area, and so at every larger one.
          CHECK(snap.detected[i][j]);
          CHECK(oracle.detected(snap.nodes[i], snap.starts[j], std::min(snap.alpha * 1.5, s->space.area_max)));
        }
    }
  }
}

TEST_CASE("the oracle dominates every other method") {
  const auto& s = grid();
  const auto oracle = brute_force_lsp(s.space, s.context());
  for (const auto& [node, area] : oracle.node_areas) CHECK(area <= oracle.max_undetected_area);
  for (auto variant : {GaVariant::Basic, GaVariant::Spectral}) {
    GaConfig cfg;
    cfg.variant = variant;
    cfg.seed = 3;
    const auto ga = genetic_search(s.space, s.context(), cfg);
    CHECK(ga.max_undetected_area <= oracle.max_undetected_area + s.space.epsilon);
    for (const auto& [node, area] : ga.node_areas) CHECK(area <= oracle.max_undetected_area + s.space.epsilon);
  }
}

TEST_CASE("incumbent shortcut is consistent with the full line search") {
  const auto& s = grid();
  const auto ctx = s.context();
  const LeakOracle oracle(ctx, s.space.window);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto node = s.space.candidate_nodes[rng() % s.space.candidate_nodes.size()];
    const auto start = s.space.candidate_starts[rng() % s.space.candidate_starts.size()];
    const double incumbent = 1.0 + static_cast<double>(rng() % 40);
    const auto full = max_undetected_area(oracle, s.space, node, start);
    const auto quick = max_undetected_area(oracle, s.space, node, start, incumbent);
    if (quick.shortcut) {
      CHECK(quick.area == 0.0);
      CHECK(full.area < incumbent);
    } else {
      CHECK(std::abs(quick.area - full.area) <= s.space.epsilon);
    }
  }
}

TEST_CASE("genetic search is deterministic and elitist") {
  const auto& s = grid();
  for (auto variant : {GaVariant::Basic, GaVariant::Spectral}) {
    GaConfig cfg;
    cfg.variant = variant;
    cfg.seed = 11;
    const auto a = genetic_search(s.space, s.context(), cfg);
    const auto b = genetic_search(s.space, s.context(4), cfg);
    CHECK(outcome_to_json(s.exp.model, a) == outcome_to_json(s.exp.model, b));
    CHECK(node_areas_to_csv(s.exp.model, a) == node_areas_to_csv(s.exp.model, b));
    REQUIRE(a.trace.size() == cfg.generations);
    for (std::size_t g = 1; g < a.trace.size(); ++g) CHECK(a.trace[g].alpha >= a.trace[g - 1].alpha);
    CHECK(a.trace.back().alpha == a.max_undetected_area);
  }
}

TEST_CASE("genetic search finds the grid's least sensitive point") {
  const auto& s = grid();
  const auto oracle = brute_force_lsp(s.space, s.context());
  for (auto variant : {GaVariant::Basic, GaVariant::Spectral}) {
    int found = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      GaConfig cfg;
      cfg.variant = variant;
      cfg.seed = seed;
      found += genetic_search(s.space, s.context(), cfg).lsp_node == oracle.lsp_node;
    }
    INFO((variant == GaVariant::Basic ? "basic" : "spectral"));
    CHECK(found >= 4);
  }
}

TEST_CASE("excluded nodes are never reported") {
  auto cfg = load_config(testing::data("toy_grid.json"));
  cfg.exclude_nodes = {"J9"};
  const auto exp = prepare_experiment(cfg);
  const auto detector = train_experiment_detector(exp).model;
  const auto j9 = exp.model.node_index("J9");
  for (const std::string method : {"oracle", "bisection", "ga-basic", "ga-spectral"}) {
    const auto out = run_search(exp, detector, method);
    CHECK(out.lsp_node != j9);
    for (const auto& [node, area] : out.node_areas) CHECK(node != j9);
  }
  cfg.exclude_nodes = {"R1"};
  CHECK_THROWS_AS(make_search_space(prepare_experiment(cfg)), Error);
}

TEST_CASE("oracle ignores candidate order and thread count") {
  const auto& s = grid();
  const auto ref = brute_force_lsp(s.space, s.context());
  SearchSpace shuffled = s.space;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.candidate_nodes.begin(), shuffled.candidate_nodes.end(), rng);
  std::shuffle(shuffled.candidate_starts.begin(), shuffled.candidate_starts.end(), rng);
  const auto again = brute_force_lsp(shuffled, s.context(4));
  CHECK(outcome_to_json(s.exp.model, again) == outcome_to_json(s.exp.model, ref));
  const auto bis1 = bisection_search(s.space, s.context(1));
  const auto bis4 = bisection_search(shuffled, s.context(4));
  CHECK(outcome_to_json(s.exp.model, bis1) == outcome_to_json(s.exp.model, bis4));
  CHECK(detections_to_csv(s.exp.model, bis1) == detections_to_csv(s.exp.model, bis4));
}

TEST_CASE("search space errors") {
  const auto& s = grid();
  SearchSpace empty = s.space;
  empty.candidate_nodes.clear();
  try {
    bisection_search(empty, s.context());
    FAIL("expected EMPTY_SPACE");
  } catch (const Error& e) {
    CHECK(e.code() == "EMPTY_SPACE");
  }

  // 10 junctions x 1001 starts is one pair over the limit.
  const auto demands = generate_demands(s.exp.model, 1, 1010);
  Baseline unused;
  SearchContext big{s.exp.model, demands, unused, s.detector, 1};
  SearchSpace space = s.space;
  space.window = 1;
  space.candidate_starts.clear();
  for (std::size_t t = 0; t < 1001; ++t) space.candidate_starts.push_back(t);
  try {
    brute_force_lsp(space, big);
    FAIL("expected SPACE_TOO_LARGE");
  } catch (const Error& e) {
    CHECK(e.code() == "SPACE_TOO_LARGE");
  }

  SearchSpace late = s.space;
  late.candidate_starts.push_back(s.exp.demands.num_steps() - 2);
  CHECK_THROWS_AS(bisection_search(late, s.context()), Error);
  SearchSpace bracket = s.space;
  bracket.area_min = bracket.area_max;
  CHECK_THROWS_AS(bisection_search(bracket, s.context()), Error);
  GaConfig bad;
  bad.population = 1;
  CHECK_THROWS_AS(genetic_search(s.space, s.context(), bad), Error);
}

TEST_CASE("golden grid outputs") {
  const auto& s = grid();
  const auto search = s.exp.baseline.measurements.rows(s.exp.search_first_step(), 48);
  const auto golden = measurements_from_csv(read_file(std::filesystem::path(LSPKIT_GOLDEN_DIR) / "toy_grid_pressures.csv"));
  REQUIRE(golden.num_steps() == 48);
  CHECK(golden.sensors == search.sensors);
  CHECK((golden.values - search.values).cwiseAbs().maxCoeff() <= 1e-6);

  const auto expected = nlohmann::json::parse(read_file(std::filesystem::path(LSPKIT_GOLDEN_DIR) / "toy_grid_oracle.json"));
  const auto actual = nlohmann::json::parse(outcome_to_json(s.exp.model, brute_force_lsp(s.space, s.context())));
  CHECK(actual["lsp_node"] == expected["lsp_node"]);
  CHECK(actual["best_start"] == expected["best_start"]);
  CHECK(actual["max_undetected_area_cm2"].get<double>() ==
        Approx(expected["max_undetected_area_cm2"].get<double>()).margin(1e-6));
  CHECK(actual["evaluations"] == expected["evaluations"]);
}
