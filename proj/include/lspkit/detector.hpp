#pragma once

#include "lspkit/inp_parser.hpp"
#include "lspkit/measurement.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lspkit {

enum class AlarmRule {
  WeightedSum,  // alarm iff sum_s q_s r_s > 1
  MaxThreshold, // alarm iff some r_s > tau_s
};

std::string to_string(AlarmRule rule);
AlarmRule alarm_rule_from_string(const std::string& name);

/// Linear prediction of one sensor from all the others: y_hat = w . y_{-s} + b.
struct SensorRegression {
  std::vector<double> weights; // over the other sensors, in sensor order
  double bias = 0.0;

  bool operator==(const SensorRegression&) const = default;
};

struct TrainingInfo {
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingInfo&) const = default;
};

/// Residual-based leakage detector. Immutable once trained.
struct DetectorModel {
  std::vector<std::string> sensors;
  std::vector<SensorRegression> regressions;
  AlarmRule rule = AlarmRule::MaxThreshold;
  std::vector<double> residual_weights; // q_s, WeightedSum only
  std::vector<double> thresholds;       // tau_s (m), MaxThreshold only
  double gamma = 1.1;
  double threshold_factor = 1.5;
  TrainingInfo info;

  std::size_t num_sensors() const { return sensors.size(); }
  bool operator==(const DetectorModel&) const = default;
};

struct TrainOptions {
  AlarmRule rule = AlarmRule::MaxThreshold;
  double gamma = 1.1;            // WeightedSum safety factor, > 1
  double threshold_factor = 1.5; // MaxThreshold multiplier c, > 0
  std::uint64_t seed = 0;        // recorded in the training metadata
};

struct TrainResult {
  DetectorModel model;
  std::vector<Diagnostic> warnings; // RANK_DEFICIENT, ZERO_RESIDUAL
};

/// Fits one least-squares regression per sensor on `train` and calibrates the
/// alarm rule: residual weights from `validation` (WeightedSum, required) or
/// thresholds from the training residuals (MaxThreshold).
TrainResult train_detector(const MeasurementSeries& train, const std::optional<MeasurementSeries>& validation,
                           const TrainOptions& options = {});

/// r_s = |y_hat_s - y_s|. Throws Error{"DIM_MISMATCH"}.
std::vector<double> residuals(const DetectorModel& detector, std::span<const double> pressures);

/// Applies the alarm rule to a residual vector; inequalities are strict.
bool alarm_from_residuals(const DetectorModel& detector, std::span<const double> residual);

bool detect(const DetectorModel& detector, std::span<const double> pressures);
bool detect(const DetectorModel& detector, const Eigen::VectorXd& pressures);

/// True iff any step in {start_step, ..., start_step + window} raises an alarm.
/// Throws Error{"RANGE"} if the window runs past the series.
bool detect_window(const DetectorModel& detector, const MeasurementSeries& series, std::size_t start_step,
                   std::size_t window);

/// Number of rows of `series` on which the detector raises an alarm.
std::size_t count_alarms(const DetectorModel& detector, const MeasurementSeries& series);

std::string detector_to_json(const DetectorModel& detector);
DetectorModel detector_from_json(const std::string& text);

} // namespace lspkit
