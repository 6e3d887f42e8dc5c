#include "lspkit/error.hpp"
#include "lspkit/experiment.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

namespace {

// Codes caused by bad input files or flags; everything else is a run failure.
const std::set<std::string> kInputErrors{
    "BAD_CONFIG", "BAD_CURVE", "BAD_DETECTOR", "BAD_FORMAT", "BAD_NUMBER", "BAD_PUMP",    "BAD_SENSOR",
    "BAD_UNITS",  "BAD_VALUE", "BAD_VALVE",    "DISCONNECTED", "DUP_ID",  "IO_ERROR",    "NO_SOURCE",
    "UNKNOWN_CURVE", "UNKNOWN_NODE", "UNKNOWN_PATTERN", "DIM_MISMATCH", "EMPTY_SPACE", "RANGE", "SPACE_TOO_LARGE"};

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> ids;
  std::stringstream in(list);
  for (std::string id; std::getline(in, id, ',');)
    if (!id.empty()) ids.push_back(id);
  return ids;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least sensitive point search for leak detectors in water networks"};
  app.require_subcommand(1, 1);

  std::string config_path, network, sensors, detector, method, rule, output_dir, exclude;
  std::optional<std::uint64_t> seed, ga_seed;
  std::optional<std::size_t> train_days, val_days, search_days, population, generations, tournament;
  std::optional<double> leak_hours, epsilon, area_min, area_max, mutation_rate, mutation_sigma;
  std::optional<unsigned> threads;
  bool no_pruning = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "experiment config (JSON)");
    cmd->add_option("--network", network, "INP file");
    cmd->add_option("--sensors", sensors, "sensors JSON file");
    cmd->add_option("--seed", seed, "demand seed");
    cmd->add_option("--train-days", train_days);
    cmd->add_option("--val-days", val_days);
    cmd->add_option("--search-days", search_days);
    cmd->add_option("--rule", rule, "weighted_sum | max_threshold");
    cmd->add_option("-o,--output-dir", output_dir);
    cmd->add_option("--threads", threads, "worker threads (default: $LSPKIT_THREADS or 1)");
  };
  auto add_search = [&](CLI::App* cmd) {
    cmd->add_option("--method", method, "bisection | ga-basic | ga-spectral | oracle");
    cmd->add_option("--ga-seed", ga_seed, "GA seed (default: --seed)");
    cmd->add_option("--exclude-nodes", exclude, "comma-separated junction ids");
    cmd->add_option("--detector", detector, "trained detector JSON (default: train on the fly)");
    cmd->add_option("--leak-hours", leak_hours);
    cmd->add_option("--epsilon", epsilon);
    cmd->add_option("--area-min", area_min);
    cmd->add_option("--area-max", area_max);
    cmd->add_option("--population", population);
    cmd->add_option("--generations", generations);
    cmd->add_option("--tournament-size", tournament);
    cmd->add_option("--mutation-rate", mutation_rate);
    cmd->add_option("--mutation-sigma", mutation_sigma);
    cmd->add_flag("--no-pruning", no_pruning, "disable bisection pruning");
  };

  auto* simulate = app.add_subcommand("simulate", "write demands.csv and measurements.csv");
  auto* train = app.add_subcommand("train", "train the detector and write detector.json");
  auto* lsp = app.add_subcommand("lsp", "search the least sensitive point");
  auto* check = app.add_subcommand("oracle-check", "compare a method with the brute-force oracle");
  for (auto* cmd : {simulate, train, lsp, check}) add_common(cmd);
  for (auto* cmd : {lsp, check}) add_search(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    lspkit::ExperimentConfig cfg = config_path.empty() ? lspkit::ExperimentConfig{} : lspkit::load_config(config_path);
    if (!network.empty()) cfg.network = network;
    if (!sensors.empty()) cfg.sensors = sensors;
    if (!detector.empty()) cfg.detector = detector;
    if (!method.empty()) cfg.method = method;
    if (!rule.empty()) cfg.rule = rule;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!exclude.empty()) cfg.exclude_nodes = split_ids(exclude);
    if (seed) cfg.seed = *seed;
    if (ga_seed) cfg.ga_seed = *ga_seed;
    if (train_days) cfg.train_days = *train_days;
    if (val_days) cfg.val_days = *val_days;
    if (search_days) cfg.search_days = *search_days;
    if (population) cfg.population = *population;
    if (generations) cfg.generations = *generations;
    if (tournament) cfg.tournament_size = *tournament;
    if (mutation_rate) cfg.mutation_rate = *mutation_rate;
    if (mutation_sigma) cfg.mutation_sigma = *mutation_sigma;
    if (leak_hours) cfg.leak_hours = *leak_hours;
    if (epsilon) cfg.epsilon = *epsilon;
    if (area_min) cfg.area_min = *area_min;
    if (area_max) cfg.area_max = *area_max;
    if (no_pruning) cfg.pruning = false;
    if (threads) cfg.threads = *threads;
    else if (const char* env = std::getenv("LSPKIT_THREADS")) cfg.threads = static_cast<unsigned>(std::stoul(env));

    if (*simulate) return lspkit::cmd_simulate(cfg, std::cout);
    if (*train) return lspkit::cmd_train(cfg, std::cout);
    if (*lsp) return lspkit::cmd_lsp(cfg, std::cout);
    return lspkit::cmd_oracle_check(cfg, std::cout);
  } catch (const lspkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputErrors.count(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
