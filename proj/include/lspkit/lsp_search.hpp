#pragma once

#include "lspkit/detector.hpp"
#include "lspkit/hydraulics.hpp"
#include "lspkit/measurement.hpp"
#include "lspkit/network.hpp"
#include "lspkit/parallel.hpp"
#include "lspkit/spectral.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lspkit {

/// Node/start candidates and the leak-area bracket for the least sensitive point
/// search. Starts are absolute step indices into the demand series.
struct SearchSpace {
  std::vector<std::size_t> candidate_nodes;
  std::vector<std::size_t> candidate_starts;
  std::size_t window = 6; // K: detection covers steps start .. start + K
  double area_min = 0.1;  // cm^2
  double area_max = 500.0;
  double epsilon = 0.5;

  /// Throws Error{"EMPTY_SPACE"} or Error{"BAD_CONFIG"}; with a horizon, also
  /// Error{"RANGE"} when a window or leak runs past the last step.
  void validate(std::size_t horizon = 0, std::size_t leak_duration = 0) const;
};

/// Everything needed to decide whether a leak stays hidden. Holds references;
/// the referenced objects must outlive the context.
struct SearchContext {
  const NetworkModel& model;
  const DemandSeries& demands;
  const Baseline& baseline;
  const DetectorModel& detector;
  std::size_t leak_duration_steps = 6;
  SolverOptions solver{};
  unsigned threads = 1;
  /// Grid points for the optional monotonicity audit of each line search; 0 disables it.
  std::size_t audit_points = 0;
};

/// Runs the leak simulations behind every detection query and counts them.
class LeakOracle {
public:
  /// Throws Error{"DIM_MISMATCH"} when the detector and the sensors disagree.
  LeakOracle(const SearchContext& ctx, std::size_t window);

  /// Simulates a leak of `area` at (node, start) and reports whether any step of
  /// start .. start + window raises an alarm.
  bool detected(std::size_t node, std::size_t start, double area) const;

  std::size_t evaluations() const { return evaluations_.load(); }
  const SearchContext& context() const { return ctx_; }
  std::size_t window() const { return window_; }

private:
  const SearchContext& ctx_;
  std::size_t window_;
  mutable std::atomic<std::size_t> evaluations_{0};
};

struct AreaResult {
  double area = 0.0;
  bool unbounded = false;      // still hidden at area_max
  bool shortcut = false;       // incumbent detected, line search skipped
  bool nonmonotone = false;    // audit found hidden-above-detected
};

/// Largest hidden leak area at one (node, start) pair via bisection on
/// [area_min, area_max]. With an incumbent, that area is tested first and a
/// detection there returns 0 without further search.
AreaResult max_undetected_area(const LeakOracle& oracle, const SearchSpace& space, std::size_t node,
                               std::size_t start, std::optional<double> incumbent = std::nullopt);

struct TraceEntry {
  std::size_t iteration = 0;
  double alpha = 0.0; // tested area (bisection) or best area (GA)
  double lo = 0.0;
  double hi = 0.0;
  std::size_t surviving_nodes = 0;
  std::size_t surviving_starts = 0;
  std::size_t undetected_pairs = 0;
  std::size_t best_node = 0;
  std::size_t best_start = 0;
};

/// Detection matrix recorded at one bisection step (rows: nodes, columns: starts).
struct DetectionSnapshot {
  std::size_t iteration = 0;
  double alpha = 0.0;
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> starts;
  std::vector<std::vector<bool>> detected;
};

enum class AreaBound { Exact, LowerBound, Sampled };

struct SearchOutcome {
  std::string method;
  std::size_t lsp_node = 0;
  std::size_t best_start = 0;
  double max_undetected_area = 0.0;
  bool unbounded = false;
  std::size_t evaluations = 0;
  std::vector<TraceEntry> trace;
  std::vector<DetectionSnapshot> detections;
  /// Best known hidden area per candidate node, for map plots.
  std::vector<std::pair<std::size_t, double>> node_areas;
  AreaBound node_area_kind = AreaBound::Exact;
  std::vector<std::string> warnings;
};

/// Global bisection over the area with node/start pruning: after a step where
/// some pair stayed hidden, nodes detected at every surviving start and starts
/// detected at every surviving node are dropped.
SearchOutcome bisection_search(const SearchSpace& space, const SearchContext& ctx, bool pruning = true);

/// Exhaustive per-pair line search; at most 10,000 pairs (Error{"SPACE_TOO_LARGE"}).
SearchOutcome brute_force_lsp(const SearchSpace& space, const SearchContext& ctx);

/// One pruning pass over a detection matrix (rows: nodes, columns: starts).
/// Returns the indices (into the given rows / columns) that survive.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
prune_detection_matrix(const std::vector<std::vector<bool>>& detected);

enum class GaVariant { Basic, Spectral };

struct GaConfig {
  std::size_t population = 20;
  std::size_t generations = 30;
  std::size_t tournament_size = 3;
  double mutation_rate = 0.1;
  double mutation_sigma = 0.2;
  std::uint64_t seed = 0;
  GaVariant variant = GaVariant::Basic;

  void validate() const;
};

/// Seeded genetic search over (node, start). The Basic variant treats the node
/// as one gene; the Spectral variant evolves the node's Laplacian embedding
/// coordinates and snaps offspring to the nearest candidate node.
SearchOutcome genetic_search(const SearchSpace& space, const SearchContext& ctx, const GaConfig& config);

std::string outcome_to_json(const NetworkModel& model, const SearchOutcome& outcome);
std::string trace_to_csv(const NetworkModel& model, const SearchOutcome& outcome);
std::string node_areas_to_csv(const NetworkModel& model, const SearchOutcome& outcome);
std::string detections_to_csv(const NetworkModel& model, const SearchOutcome& outcome);

} // namespace lspkit
