#pragma once

#include "lspkit/hydraulics.hpp"
#include "lspkit/network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lspkit {

struct DemandOptions {
  double noise_sigma = 0.1; // lognormal sigma of the multiplicative noise
};

/// Synthetic consumption: values[step][junction] in m^3/s.
struct DemandSeries {
  DemandMatrix values;
  std::uint64_t seed = 0;
  double timestep = 1800.0;

  std::size_t num_steps() const { return values.size(); }
  bool operator==(const DemandSeries&) const = default;
};

/// Two-peak daily profile, peak value 1 near 07:30 with a smaller evening peak.
double diurnal_factor(double hour_of_day);
/// Weekday 1.0, Saturday 0.93, Sunday 0.88 (day 0 is a Monday).
double weekly_factor(std::size_t day);

/// Deterministic demand series. Junctions with an INP pattern use it in place of
/// the built-in daily profile. The noise draw for (seed, junction, step) does not
/// depend on any other draw.
DemandSeries generate_demands(const NetworkModel& model, std::uint64_t seed, std::size_t num_steps,
                              const DemandOptions& options = {});

/// Pressure heads at the sensor nodes, one row per step, columns in sensor order.
struct MeasurementSeries {
  Eigen::MatrixXd values;
  std::vector<std::string> sensors;
  std::vector<double> times;

  std::size_t num_steps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_sensors() const { return static_cast<std::size_t>(values.cols()); }
  MeasurementSeries rows(std::size_t first, std::size_t count) const;
  bool operator==(const MeasurementSeries& other) const;
};

/// Projects simulated pressures onto the model's sensors.
MeasurementSeries project_to_sensors(const NetworkModel& model, const SimulationResult& result);

/// The measurement function: runs the extended-period simulation (optionally with
/// a single-node leak) and reads the sensors.
MeasurementSeries measure(const NetworkModel& model, const DemandSeries& demands,
                          std::optional<LeakScenario> leak = std::nullopt,
                          const SolverOptions& options = {});

/// No-leak reference run used to evaluate many short leak windows cheaply.
struct Baseline {
  SimulationResult simulation;
  MeasurementSeries measurements;
};

Baseline make_baseline(const NetworkModel& model, const DemandSeries& demands, const SolverOptions& options = {});

/// Sensor readings for steps [first_step, end_step) under `leak`, continuing from
/// the baseline's tank levels at first_step. Equal to the matching rows of
/// `measure(model, demands, leak)` as long as the leak starts no earlier than
/// first_step. Steps where the leak is inactive and tank levels match the
/// baseline reuse the baseline rows. `on_row(step, row)` may stop the scan early
/// by returning false; the rows produced so far are returned.
Eigen::MatrixXd measure_window(const NetworkModel& model, const DemandSeries& demands, const Baseline& baseline,
                               const LeakScenario& leak, std::size_t first_step, std::size_t end_step,
                               const SolverOptions& options = {},
                               const std::function<bool(std::size_t, const Eigen::VectorXd&)>& on_row = {});

std::string demands_to_csv(const NetworkModel& model, const DemandSeries& demands);
DemandSeries demands_from_csv(const NetworkModel& model, std::string_view text, std::uint64_t seed,
                              double timestep);
std::string measurements_to_csv(const MeasurementSeries& series);
MeasurementSeries measurements_from_csv(std::string_view text);

} // namespace lspkit
