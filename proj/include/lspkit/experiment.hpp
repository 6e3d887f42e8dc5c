#pragma once

#include "lspkit/detector.hpp"
#include "lspkit/lsp_search.hpp"
#include "lspkit/measurement.hpp"
#include "lspkit/network.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lspkit {

/// One experiment: the network, the simulated days (training, validation,
/// search), the detector and the search method. JSON keys match the field names.
struct ExperimentConfig {
  std::string network;
  std::string sensors;
  std::uint64_t seed = 1; // demand seed
  std::optional<std::uint64_t> ga_seed; // defaults to `seed`
  std::size_t train_days = 5;
  std::size_t val_days = 1;
  std::size_t search_days = 2;
  double timestep = 1800.0; // s
  std::string rule = "weighted_sum";
  double gamma = 1.1;
  double threshold_factor = 1.5;
  double leak_hours = 3.0; // K = leak_hours / timestep steps
  std::string method = "bisection";
  std::size_t population = 20;
  std::size_t generations = 30;
  std::size_t tournament_size = 3;
  double mutation_rate = 0.1;
  double mutation_sigma = 0.2;
  double area_min = 0.1;
  double area_max = 500.0;
  double epsilon = 0.5;
  std::vector<std::string> exclude_nodes;
  std::string detector; // trained detector file; empty = train on the fly
  std::string output_dir = "out";
  bool pruning = true;
  std::size_t audit_points = 0;
  unsigned threads = 1; // not part of the manifest

  void validate() const;
  std::size_t steps_per_day() const;
  std::size_t window_steps() const;
  std::size_t total_steps() const { return (train_days + val_days + search_days) * steps_per_day(); }
};

/// Reads flat-key JSON. Relative paths are resolved against `base_dir`.
/// Unknown keys are rejected with Error{"BAD_CONFIG"}.
ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Sorted-key JSON of every field except `threads`.
std::string config_to_json(const ExperimentConfig& config);

/// Network, demands and baseline measurements for the whole timeline.
struct Experiment {
  ExperimentConfig config;
  NetworkModel model;
  DemandSeries demands;
  Baseline baseline;

  MeasurementSeries train_rows() const;
  MeasurementSeries validation_rows() const;
  std::size_t search_first_step() const;
};

Experiment prepare_experiment(const ExperimentConfig& config);
TrainResult train_experiment_detector(const Experiment& exp);
/// Junctions minus the exclusion list; starts cover the search days.
SearchSpace make_search_space(const Experiment& exp);
SearchOutcome run_search(const Experiment& exp, const DetectorModel& detector, const std::string& method);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);
std::string manifest_json(const ExperimentConfig& config);

// Commands. Each writes manifest.json next to its outputs and returns the exit code.
int cmd_simulate(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_lsp(const ExperimentConfig& config, std::ostream& log);
/// Compares the configured method against the brute-force oracle; 1 on mismatch.
int cmd_oracle_check(const ExperimentConfig& config, std::ostream& log);

} // namespace lspkit
