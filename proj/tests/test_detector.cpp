#include "lspkit/detector.hpp"
#include "lspkit/error.hpp"
#include "lspkit/measurement.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace lspkit;
using Catch::Approx;

namespace {

MeasurementSeries series(const Eigen::MatrixXd& values) {
  MeasurementSeries m;
  m.values = values;
  for (Eigen::Index s = 0; s < values.cols(); ++s) m.sensors.push_back("S" + std::to_string(s));
  for (Eigen::Index k = 0; k < values.rows(); ++k) m.times.push_back(1800.0 * k);
  return m;
}

DetectorModel two_sensor(AlarmRule rule) {
  DetectorModel d;
  d.sensors = {"A", "B"};
  d.regressions = {{{2.0}, 3.0}, {{0.5}, -1.5}};
  d.rule = rule;
  d.residual_weights = {0.5, 0.5};
  d.thresholds = {0.2, 0.3};
  return d;
}

// Network measurements from the bundled grid: 5 training days then 1 validation day.
struct GridData {
  MeasurementSeries train, validation;
};

const GridData& grid_data() {
  static const GridData data = [] {
    auto m = testing::with_sensors("toy_grid.inp", "toy_grid_sensors.json");
    m.duration = (6 * 48 - 1) * 1800.0;
    const auto y = measure(m, generate_demands(m, 21, step_count(m)));
    return GridData{y.rows(0, 5 * 48), y.rows(5 * 48, 48)};
  }();
  return data;
}

} // namespace

TEST_CASE("recovers an exact linear relation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(50.0, 5.0);
  Eigen::MatrixXd y(100, 3);
  for (Eigen::Index k = 0; k < 100; ++k) {
    y(k, 1) = n(rng);
    y(k, 2) = n(rng);
    y(k, 0) = 2.0 * y(k, 1) + 3.0;
  }
  const auto trained = train_detector(series(y), std::nullopt, {AlarmRule::MaxThreshold});
  const auto& reg = trained.model.regressions[0];
  CHECK(reg.weights[0] == Approx(2.0).margin(1e-9));
  CHECK(reg.weights[1] == Approx(0.0).margin(1e-9));
  CHECK(reg.bias == Approx(3.0).margin(1e-7));
  const std::vector<double> row{y(5, 0), y(5, 1), y(5, 2)};
  CHECK(residuals(trained.model, row)[0] == Approx(0.0).margin(1e-8));
}

TEST_CASE("constant data hits the residual floor") {
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(30, 3, 40.0);
  const auto trained = train_detector(series(y), std::nullopt, {AlarmRule::MaxThreshold});
  bool zero = false, rank = false;
  for (const auto& w : trained.warnings) {
    zero = zero || w.code == "ZERO_RESIDUAL";
    rank = rank || w.code == "RANK_DEFICIENT";
  }
  CHECK(zero);
  CHECK(rank);
  for (double t : trained.model.thresholds) CHECK(t == Approx(1.5e-9));
}

TEST_CASE("hand-computed residuals") {
  const auto d = two_sensor(AlarmRule::WeightedSum);
  const std::vector<double> y{7.0, 2.0};
  const auto r = residuals(d, y);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == Approx(0.0)); // 0.5 * 7 - 1.5 = 2
  CHECK_THROWS_AS(residuals(d, std::vector<double>{1.0}), Error);
}

TEST_CASE("alarm rules") {
  const auto ws = two_sensor(AlarmRule::WeightedSum);
  const auto mt = two_sensor(AlarmRule::MaxThreshold);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_FALSE(alarm_from_residuals(ws, zero));
  CHECK_FALSE(alarm_from_residuals(mt, zero));
  CHECK(alarm_from_residuals(ws, std::vector<double>{1.5, 1.0}));
  CHECK(alarm_from_residuals(mt, std::vector<double>{0.25, 0.0}));
  // Ties do not alarm.
  CHECK_FALSE(alarm_from_residuals(ws, std::vector<double>{1.0, 1.0}));
  CHECK_FALSE(alarm_from_residuals(mt, std::vector<double>{0.2, 0.3}));
}

TEST_CASE("alarms are monotone in the residuals") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto rule : {AlarmRule::WeightedSum, AlarmRule::MaxThreshold}) {
    const auto d = two_sensor(rule);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::vector<double> r{u(rng), u(rng)};
      const std::vector<double> bigger{r[0] + u(rng), r[1] + u(rng)};
      CHECK((!alarm_from_residuals(d, r) || alarm_from_residuals(d, bigger)));
    }
  }
}

TEST_CASE("detection window is inclusive") {
  const auto d = two_sensor(AlarmRule::MaxThreshold);
  // Quiet rows lie on both fitted lines: y0 = 2 y1 + 3 and y1 = 0.5 y0 - 1.5.
  Eigen::MatrixXd y(12, 2);
  for (Eigen::Index k = 0; k < 12; ++k) y.row(k) << 7.0, 2.0;
  auto loud = y;
  loud(8, 0) = 9.0;
  const auto quiet = series(y);
  const auto alarm = series(loud);
  CHECK_FALSE(detect_window(d, quiet, 2, 6));
  CHECK(detect_window(d, alarm, 2, 6));  // alarm at exactly start + K
  CHECK_FALSE(detect_window(d, alarm, 9, 2)); // alarm at start - 1
  CHECK(detect_window(d, alarm, 8, 0) == detect(d, Eigen::VectorXd(loud.row(8).transpose())));
  CHECK_THROWS_AS(detect_window(d, quiet, 6, 6), Error);
}

TEST_CASE("no false alarms on calibration data") {
  const auto& data = grid_data();
  SECTION("threshold rule on training data") {
    const auto t = train_detector(data.train, data.validation, {AlarmRule::MaxThreshold, 1.1, 1.5});
    CHECK(count_alarms(t.model, data.train) == 0);
    for (double tau : t.model.thresholds) CHECK(tau > 0.0);
  }
  SECTION("weighted rule on validation data") {
    const auto t = train_detector(data.train, data.validation, {AlarmRule::WeightedSum, 1.1, 1.5});
    CHECK(count_alarms(t.model, data.validation) == 0);
  }
}

TEST_CASE("training is deterministic and serializable") {
  const auto& data = grid_data();
  const auto a = train_detector(data.train, data.validation, {AlarmRule::WeightedSum});
  const auto b = train_detector(data.train, data.validation, {AlarmRule::WeightedSum});
  CHECK(a.model == b.model);
  const auto text = detector_to_json(a.model);
  CHECK(detector_to_json(detector_from_json(text)) == text);
  CHECK_THROWS_AS(detector_from_json("{\"sensors\": []}"), Error);
  CHECK_THROWS_AS(train_detector(data.train, std::nullopt, {AlarmRule::WeightedSum}), Error);
}
