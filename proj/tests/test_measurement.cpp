#include "lspkit/error.hpp"
#include "lspkit/inp_parser.hpp"
#include "lspkit/measurement.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace lspkit;
using Catch::Approx;

TEST_CASE("demand series is deterministic") {
  auto m = load_inp(testing::data("hanoi.inp"));
  const auto a = generate_demands(m, 42, 96);
  CHECK(a == generate_demands(m, 42, 96));
  CHECK_FALSE(a == generate_demands(m, 43, 96));
  CHECK(a.num_steps() == 96);
  CHECK_THROWS_AS(generate_demands(m, 42, 0), Error);
}

TEST_CASE("each draw depends only on its own key") {
  auto m = load_inp(testing::data("toy_grid.inp"));
  const auto shorter = generate_demands(m, 5, 20);
  const auto longer = generate_demands(m, 5, 200);
  for (std::size_t k = 0; k < 20; ++k) CHECK(shorter.values[k] == longer.values[k]);
}

TEST_CASE("junction without demand stays dry") {
  auto m = load_inp(testing::data("toy3.inp"));
  m.junctions[1].base_demand = 0.0;
  const auto d = generate_demands(m, 9, 48);
  for (const auto& row : d.values) CHECK(row[1] == 0.0);
}

TEST_CASE("two weeks of demand average to the profile mean") {
  auto m = load_inp(testing::data("toy_grid.inp"));
  const std::size_t steps = 14 * 48;
  const auto d = generate_demands(m, 11, steps);
  // Mean of the daily profile times the weekly factor, sampled on the same grid.
  double shape = 0.0;
  for (std::size_t k = 0; k < steps; ++k) shape += diurnal_factor((k % 48) * 0.5) * weekly_factor(k / 48);
  shape /= static_cast<double>(steps);
  for (std::size_t j = 0; j < m.junctions.size(); ++j) {
    double sum = 0.0;
    for (const auto& row : d.values) sum += row[j];
    const double expected = m.junctions[j].base_demand * shape;
    CHECK(std::abs(sum / steps - expected) <= 0.15 * expected);
  }
}

TEST_CASE("profile shape") {
  CHECK(diurnal_factor(7.5) > diurnal_factor(3.0));
  CHECK(diurnal_factor(19.5) > diurnal_factor(14.0));
  CHECK(diurnal_factor(7.5) == Approx(1.0).margin(0.01));
  CHECK(weekly_factor(0) == 1.0);
  CHECK(weekly_factor(5) == 0.93);
  CHECK(weekly_factor(13) == 0.88);
}

TEST_CASE("measurements project the simulation") {
  auto m = testing::with_sensors("toy3.inp", "toy3_sensors.json");
  m.duration = 47 * 1800.0;
  const auto d = generate_demands(m, 1, step_count(m));
  const auto sim = run_eps(m, d.values);

  SECTION("single sensor column") {
    attach_sensors(m, {"J2"});
    const auto y = measure(m, d);
    REQUIRE(y.num_sensors() == 1);
    REQUIRE(y.num_steps() == 48);
    for (std::size_t k = 0; k < 48; ++k) CHECK(y.values(k, 0) == sim.states[k].pressures[m.node_index("J2")]);
  }
  SECTION("permuted sensors permute columns") {
    const auto y = measure(m, d);
    attach_sensors(m, {"J2", "J1"});
    const auto z = measure(m, d);
    CHECK(z.values.col(0) == y.values.col(1));
    CHECK(z.values.col(1) == y.values.col(0));
  }
  SECTION("leak on a tankless network leaves the other steps untouched") {
    const LeakScenario leak{m.node_index("J1"), 4.0, 10, 6};
    const auto wet = measure(m, d, leak);
    const auto dry = measure(m, d);
    for (Eigen::Index k = 0; k < 48; ++k) {
      if (k >= 10 && k < 16) CHECK((wet.values.row(k).array() < dry.values.row(k).array()).all());
      else CHECK(wet.values.row(k) == dry.values.row(k));
    }
    CHECK(wet.values.allFinite());
  }
}

TEST_CASE("hidden-node leak reaches the sensors") {
  auto m = testing::with_sensors("toy_grid.inp", "toy_grid_sensors.json");
  m.duration = 47 * 1800.0;
  const auto d = generate_demands(m, 2, step_count(m));
  const auto dry = measure(m, d);
  const auto wet = measure(m, d, LeakScenario{m.node_index("J5"), 10.0, 20, 6});
  bool differs = false;
  for (Eigen::Index k = 20; k < 26; ++k) differs = differs || wet.values.row(k) != dry.values.row(k);
  CHECK(differs);
}

TEST_CASE("window measurement equals the full run") {
  auto m = testing::with_sensors("toy_grid.inp", "toy_grid_sensors.json");
  m.duration = 47 * 1800.0;
  const auto d = generate_demands(m, 4, step_count(m));
  const auto base = make_baseline(m, d);
  for (std::size_t start : {0u, 13u, 30u}) {
    const LeakScenario leak{m.node_index("J4"), 12.0, start, 6};
    const auto full = measure(m, d, leak);
    const auto window = measure_window(m, d, base, leak, start, 48);
    CHECK(window == full.values.bottomRows(48 - static_cast<Eigen::Index>(start)));
  }
  SECTION("early stop returns the rows seen so far") {
    const LeakScenario leak{m.node_index("J4"), 12.0, 5, 6};
    std::size_t calls = 0;
    const auto rows = measure_window(m, d, base, leak, 5, 20, {}, [&](std::size_t, const Eigen::VectorXd&) {
      return ++calls < 3;
    });
    CHECK(rows.rows() == 3);
  }
}

TEST_CASE("CSV round trips") {
  auto m = testing::with_sensors("toy_grid.inp", "toy_grid_sensors.json");
  m.duration = 11 * 1800.0;
  const auto d = generate_demands(m, 8, step_count(m));
  CHECK(demands_from_csv(m, demands_to_csv(m, d), d.seed, d.timestep) == d);
  const auto y = measure(m, d);
  CHECK(measurements_from_csv(measurements_to_csv(y)) == y);
  CHECK(y.rows(2, 3).values == y.values.middleRows(2, 3));
  CHECK_THROWS_AS(y.rows(10, 5), Error);
}
