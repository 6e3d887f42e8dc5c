#include "lspkit/experiment.hpp"

#include "lspkit/error.hpp"
#include "lspkit/inp_parser.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace lspkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kMethods{"bisection", "ga-basic", "ga-spectral", "oracle"};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("IO_ERROR", "cannot write " + path.string());
}

std::string resolve(const std::string& value, const fs::path& base) {
  if (value.empty() || base.empty() || fs::path(value).is_absolute()) return value;
  return (base / value).lexically_normal().string();
}

fs::path prepare_output(const ExperimentConfig& config) {
  fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_file(dir / "manifest.json", manifest_json(config));
  return dir;
}

void print_warnings(std::ostream& log, const std::vector<Diagnostic>& warnings) {
  for (const auto& w : warnings) log << "warning: " << w.code << ": " << w.message << '\n';
}

DetectorModel obtain_detector(const Experiment& exp, std::ostream& log) {
  if (!exp.config.detector.empty()) {
    auto d = detector_from_json(read_text_file(exp.config.detector));
    if (d.sensors != exp.model.sensors) throw Error("DIM_MISMATCH", "detector sensors differ from the sensors file");
    return d;
  }
  auto trained = train_experiment_detector(exp);
  print_warnings(log, trained.warnings);
  return trained.model;
}

} // namespace

void ExperimentConfig::validate() const {
  if (network.empty()) throw Error("BAD_CONFIG", "no network file given");
  if (sensors.empty()) throw Error("BAD_CONFIG", "no sensors file given");
  if (train_days < 1 || val_days < 1 || search_days < 1) throw Error("BAD_CONFIG", "every phase needs at least one day");
  if (!kMethods.count(method))
    throw Error("BAD_CONFIG", "unknown method '" + method + "' (bisection | ga-basic | ga-spectral | oracle)");
  alarm_rule_from_string(rule);
  steps_per_day();
  window_steps();
}

std::size_t ExperimentConfig::steps_per_day() const {
  const double per_day = 86400.0 / timestep;
  if (!(timestep > 0.0) || per_day != std::floor(per_day))
    throw Error("BAD_CONFIG", "timestep must divide one day evenly");
  return static_cast<std::size_t>(per_day);
}

std::size_t ExperimentConfig::window_steps() const {
  const double k = leak_hours * 3600.0 / timestep;
  if (!(k >= 0.0) || k != std::floor(k)) throw Error("BAD_CONFIG", "leak_hours must be a whole number of timesteps");
  const auto steps = static_cast<std::size_t>(k);
  if (steps >= search_days * steps_per_day()) throw Error("BAD_CONFIG", "leak window longer than the search period");
  return steps;
}

ExperimentConfig config_from_json(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig c;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("BAD_CONFIG", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("BAD_CONFIG", "config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "network") c.network = resolve(value.get<std::string>(), base_dir);
      else if (key == "sensors") c.sensors = resolve(value.get<std::string>(), base_dir);
      else if (key == "detector") c.detector = resolve(value.get<std::string>(), base_dir);
      else if (key == "output_dir") c.output_dir = resolve(value.get<std::string>(), base_dir);
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "ga_seed") c.ga_seed = value.is_null() ? std::nullopt : std::optional(value.get<std::uint64_t>());
      else if (key == "train_days") c.train_days = value.get<std::size_t>();
      else if (key == "val_days") c.val_days = value.get<std::size_t>();
      else if (key == "search_days") c.search_days = value.get<std::size_t>();
      else if (key == "timestep") c.timestep = value.get<double>();
      else if (key == "rule") c.rule = value.get<std::string>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "threshold_factor") c.threshold_factor = value.get<double>();
      else if (key == "leak_hours") c.leak_hours = value.get<double>();
      else if (key == "method") c.method = value.get<std::string>();
      else if (key == "population") c.population = value.get<std::size_t>();
      else if (key == "generations") c.generations = value.get<std::size_t>();
      else if (key == "tournament_size") c.tournament_size = value.get<std::size_t>();
      else if (key == "mutation_rate") c.mutation_rate = value.get<double>();
      else if (key == "mutation_sigma") c.mutation_sigma = value.get<double>();
      else if (key == "area_min") c.area_min = value.get<double>();
      else if (key == "area_max") c.area_max = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "exclude_nodes") c.exclude_nodes = value.get<std::vector<std::string>>();
      else if (key == "pruning") c.pruning = value.get<bool>();
      else if (key == "audit_points") c.audit_points = value.get<std::size_t>();
      else if (key == "threads") c.threads = value.get<unsigned>();
      else throw Error("BAD_CONFIG", "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error("BAD_CONFIG", std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_text_file(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json doc = {
      {"network", c.network},
      {"sensors", c.sensors},
      {"detector", c.detector},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"ga_seed", c.ga_seed ? json(*c.ga_seed) : json(nullptr)},
      {"train_days", c.train_days},
      {"val_days", c.val_days},
      {"search_days", c.search_days},
      {"timestep", c.timestep},
      {"rule", c.rule},
      {"gamma", c.gamma},
      {"threshold_factor", c.threshold_factor},
      {"leak_hours", c.leak_hours},
      {"method", c.method},
      {"population", c.population},
      {"generations", c.generations},
      {"tournament_size", c.tournament_size},
      {"mutation_rate", c.mutation_rate},
      {"mutation_sigma", c.mutation_sigma},
      {"area_min", c.area_min},
      {"area_max", c.area_max},
      {"epsilon", c.epsilon},
      {"exclude_nodes", c.exclude_nodes},
      {"pruning", c.pruning},
      {"audit_points", c.audit_points},
  };
  return doc.dump(2);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("IO_ERROR", "SHA-256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string manifest_json(const ExperimentConfig& config) {
  const auto cfg = config_to_json(config);
  json inputs = {{"network", sha256_hex(read_text_file(config.network))},
                 {"sensors", sha256_hex(read_text_file(config.sensors))}};
  if (!config.detector.empty()) inputs["detector"] = sha256_hex(read_text_file(config.detector));
  json doc = {{"config", json::parse(cfg)}, {"config_sha256", sha256_hex(cfg)}, {"inputs_sha256", inputs}};
  return doc.dump(2) + "\n";
}

MeasurementSeries Experiment::train_rows() const {
  return baseline.measurements.rows(0, config.train_days * config.steps_per_day());
}

MeasurementSeries Experiment::validation_rows() const {
  return baseline.measurements.rows(config.train_days * config.steps_per_day(),
                                    config.val_days * config.steps_per_day());
}

std::size_t Experiment::search_first_step() const {
  return (config.train_days + config.val_days) * config.steps_per_day();
}

Experiment prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  Experiment exp;
  exp.config = config;
  exp.model = load_inp(config.network);
  attach_sensors(exp.model, load_sensors(config.sensors));
  exp.model.hydraulic_timestep = config.timestep;
  exp.model.duration = static_cast<double>(config.total_steps() - 1) * config.timestep;
  exp.demands = generate_demands(exp.model, config.seed, config.total_steps());
  exp.baseline = make_baseline(exp.model, exp.demands);
  if (!exp.baseline.simulation.all_converged())
    throw Error("NOT_CONVERGED", "baseline simulation did not converge at every step");
  return exp;
}

TrainResult train_experiment_detector(const Experiment& exp) {
  TrainOptions opts;
  opts.rule = alarm_rule_from_string(exp.config.rule);
  opts.gamma = exp.config.gamma;
  opts.threshold_factor = exp.config.threshold_factor;
  opts.seed = exp.config.seed;
  return train_detector(exp.train_rows(), exp.validation_rows(), opts);
}

SearchSpace make_search_space(const Experiment& exp) {
  const auto& c = exp.config;
  std::set<std::size_t> excluded;
  for (const auto& id : c.exclude_nodes) {
    const auto node = exp.model.node_index(id);
    if (exp.model.node_kind(node) != NodeKind::Junction)
      throw Error("BAD_CONFIG", "excluded node '" + id + "' is not a junction");
    excluded.insert(node);
  }
  SearchSpace space;
  for (std::size_t j = 0; j < exp.model.junctions.size(); ++j)
    if (!excluded.count(j)) space.candidate_nodes.push_back(j);
  space.window = c.window_steps();
  const std::size_t total = c.total_steps();
  for (std::size_t t = exp.search_first_step(); t + space.window < total; ++t) space.candidate_starts.push_back(t);
  space.area_min = c.area_min;
  space.area_max = c.area_max;
  space.epsilon = c.epsilon;
  return space;
}

SearchOutcome run_search(const Experiment& exp, const DetectorModel& detector, const std::string& method) {
  const auto& c = exp.config;
  SearchContext ctx{exp.model, exp.demands, exp.baseline, detector};
  ctx.leak_duration_steps = c.window_steps();
  ctx.threads = c.threads;
  ctx.audit_points = c.audit_points;
  const auto space = make_search_space(exp);
  if (method == "bisection") return bisection_search(space, ctx, c.pruning);
  if (method == "oracle") return brute_force_lsp(space, ctx);
  if (method != "ga-basic" && method != "ga-spectral") throw Error("BAD_CONFIG", "unknown method '" + method + "'");
  GaConfig ga;
  ga.population = c.population;
  ga.generations = c.generations;
  ga.tournament_size = c.tournament_size;
  ga.mutation_rate = c.mutation_rate;
  ga.mutation_sigma = c.mutation_sigma;
  ga.seed = c.ga_seed.value_or(c.seed);
  ga.variant = method == "ga-spectral" ? GaVariant::Spectral : GaVariant::Basic;
  return genetic_search(space, ctx, ga);
}

int cmd_simulate(const ExperimentConfig& config, std::ostream& log) {
  const auto exp = prepare_experiment(config);
  const auto dir = prepare_output(config);
  write_file(dir / "demands.csv", demands_to_csv(exp.model, exp.demands));
  write_file(dir / "measurements.csv", measurements_to_csv(exp.baseline.measurements));
  log << "simulated " << exp.demands.num_steps() << " steps of '" << exp.model.title << "' ("
      << exp.model.node_count() << " nodes, " << exp.model.sensors.size() << " sensors) -> " << dir.string() << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  const auto exp = prepare_experiment(config);
  const auto trained = train_experiment_detector(exp);
  print_warnings(log, trained.warnings);
  const auto dir = prepare_output(config);
  write_file(dir / "detector.json", detector_to_json(trained.model));
  log << "false alarms: train " << count_alarms(trained.model, exp.train_rows()) << " / "
      << exp.train_rows().num_steps() << ", validation " << count_alarms(trained.model, exp.validation_rows())
      << " / " << exp.validation_rows().num_steps() << '\n';
  return 0;
}

int cmd_lsp(const ExperimentConfig& config, std::ostream& log) {
  const auto exp = prepare_experiment(config);
  const auto detector = obtain_detector(exp, log);
  const auto outcome = run_search(exp, detector, config.method);
  const auto dir = prepare_output(config);
  write_file(dir / "outcome.json", outcome_to_json(exp.model, outcome));
  write_file(dir / "trace.csv", trace_to_csv(exp.model, outcome));
  write_file(dir / "node_areas.csv", node_areas_to_csv(exp.model, outcome));
  write_file(dir / "detections.csv", detections_to_csv(exp.model, outcome));
  for (const auto& w : outcome.warnings) log << "warning: " << w << '\n';
  log << outcome.method << ": least sensitive point " << exp.model.node_id(outcome.lsp_node) << " at step "
      << outcome.best_start << ", max undetected area " << outcome.max_undetected_area << " cm2 ("
      << outcome.evaluations << " simulations)\n";
  return 0;
}

int cmd_oracle_check(const ExperimentConfig& config, std::ostream& log) {
  const auto exp = prepare_experiment(config);
  const auto detector = obtain_detector(exp, log);
  const auto oracle = run_search(exp, detector, "oracle");
  const auto found = config.method == "oracle" ? oracle : run_search(exp, detector, config.method);
  const bool node_ok = found.lsp_node == oracle.lsp_node;
  const bool area_ok = std::abs(found.max_undetected_area - oracle.max_undetected_area) <= config.epsilon;
  log << "oracle: " << exp.model.node_id(oracle.lsp_node) << " area " << oracle.max_undetected_area << '\n'
      << config.method << ": " << exp.model.node_id(found.lsp_node) << " area " << found.max_undetected_area << '\n'
      << (node_ok && area_ok ? "MATCH" : "MISMATCH") << '\n';
  return node_ok && area_ok ? 0 : 1;
}

} // namespace lspkit
