#pragma once

#include "lspkit/network.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lspkit {

inline constexpr double kGravity = 9.81;

/// Hazen-Williams headloss (m) along a pipe; odd in `flow`.
double hazen_williams_headloss(double flow, double length, double diameter, double roughness);

/// Orifice leak outflow (m^3/s) through an opening of `area_cm2` under `pressure_head`.
/// Zero for non-positive pressure.
double leak_outflow(double area_cm2, double pressure_head, double discharge_coefficient);

struct SolverOptions {
  double discharge_coefficient = 0.75;
  int max_iterations = 100;
  // One decade below the mass (1e-6 m^3/s) and energy (1e-4 m) checks.
  double mass_tolerance = 1e-7;
  double head_tolerance = 1e-5;
};

enum class ValveStatus : std::uint8_t { Active, Open, Closed };

struct HydraulicState {
  std::vector<double> heads;      // per node (m)
  std::vector<double> pressures;  // per node, head - elevation (m); zero at reservoirs
  std::vector<double> flows;      // per link (m^3/s), positive from -> to
  std::vector<double> leak_flows; // per node (m^3/s)
  std::vector<ValveStatus> valve_status;
  bool converged = false;
  int iterations = 0;

  bool operator==(const HydraulicState&) const = default;
};

/// Single-node leak active during one solve.
struct PointLeak {
  std::size_t node = 0;
  double area_cm2 = 0.0;
};

/// A leak of `area` cm^2 at `node_index`, active for steps [start_step, start_step + duration_steps).
struct LeakScenario {
  std::size_t node_index = 0;
  double area = 0.0;
  std::size_t start_step = 0;
  std::size_t duration_steps = 0;

  bool active_at(std::size_t step) const {
    return step >= start_step && step < start_step + duration_steps;
  }
};

/// Throws Error{"BAD_LEAK"} when the scenario violates its invariants for a
/// horizon of `num_steps` steps or targets a node that is not a junction.
void validate_leak(const NetworkModel& model, const LeakScenario& leak, std::size_t num_steps);

/// Demand-driven steady state via the global gradient (Newton) method.
///
/// `junction_demands` has one entry per junction, `tank_heads` one total head per
/// tank. Returns the best iterate with `converged == false` after max_iterations;
/// throws Error{"SINGULAR_SYSTEM"} if the linearised system cannot be factored.
HydraulicState solve_steady_state(const NetworkModel& model, std::span<const double> junction_demands,
                                  std::span<const double> tank_heads,
                                  std::optional<PointLeak> leak = std::nullopt,
                                  const SolverOptions& options = {});

struct TankEvent {
  std::size_t step;
  std::size_t tank;
  bool overflow; // false: drained to min_level

  bool operator==(const TankEvent&) const = default;
};

struct SimulationResult {
  std::size_t first_step = 0;
  std::vector<HydraulicState> states;
  std::vector<double> times;                    // s, absolute
  std::vector<std::vector<double>> tank_levels; // [step][tank], level at the start of the step
  std::vector<TankEvent> tank_events;
  std::vector<double> final_tank_levels;        // after the last simulated step

  std::size_t size() const { return states.size(); }
  bool all_converged() const;

  bool operator==(const SimulationResult&) const = default;
};

/// Demand matrix consumed by the simulator: demands[step][junction] in m^3/s.
using DemandMatrix = std::vector<std::vector<double>>;

/// Number of hydraulic steps implied by the model horizon: floor(duration / dt) + 1.
std::size_t step_count(const NetworkModel& model);

/// Extended-period simulation over the model horizon.
SimulationResult run_eps(const NetworkModel& model, const DemandMatrix& demands,
                         std::optional<LeakScenario> leak = std::nullopt,
                         const SolverOptions& options = {});

/// Simulates steps [first_step, end_step) starting from the given tank levels.
///
/// `keep_going`, when set, is called after every step with (step, state) and can
/// stop the run early by returning false. Running a range from the levels a full
/// run recorded at `first_step` reproduces that run's states exactly.
SimulationResult simulate_range(const NetworkModel& model, const DemandMatrix& demands,
                                std::optional<LeakScenario> leak, std::size_t first_step,
                                std::size_t end_step, std::span<const double> initial_tank_levels,
                                const SolverOptions& options = {},
                                const std::function<bool(std::size_t, const HydraulicState&)>& keep_going = {});

std::vector<double> initial_tank_levels(const NetworkModel& model);

/// Largest |inflow - outflow - demand - leak| over junctions.
double max_mass_imbalance(const NetworkModel& model, const HydraulicState& state,
                          std::span<const double> junction_demands);

/// Largest |h_from - h_to - headloss(q)| over pipes.
double max_pipe_energy_error(const NetworkModel& model, const HydraulicState& state);

/// One row per step: time_s, head per node, pressure per node, flow per link, leak flow per node.
std::string simulation_to_csv(const NetworkModel& model, const SimulationResult& result);

} // namespace lspkit
