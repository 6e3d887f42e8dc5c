#include "lspkit/measurement.hpp"

#include "lspkit/error.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lspkit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t bits) {
  // 53 random mantissa bits, strictly inside (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal draw keyed by (seed, junction, step).
double keyed_normal(std::uint64_t seed, std::uint64_t junction, std::uint64_t step) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ junction) ^ step);
  const double u1 = unit_interval(splitmix64(key));
  const double u2 = unit_interval(splitmix64(key ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double wrapped_bump(double hour, double centre, double width) {
  double d = std::fmod(std::abs(hour - centre), 24.0);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * (d / width) * (d / width));
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_cell(const std::string& cell, std::size_t row) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw Error("BAD_NUMBER", "malformed CSV value '" + cell + "' in row " + std::to_string(row));
  return v;
}

} // namespace

double diurnal_factor(double hour_of_day) {
  return 0.35 + 0.65 * wrapped_bump(hour_of_day, 7.5, 1.8) + 0.5 * wrapped_bump(hour_of_day, 19.5, 2.2);
}

double weekly_factor(std::size_t day) {
  switch (day % 7) {
  case 5:
    return 0.93;
  case 6:
    return 0.88;
  default:
    return 1.0;
  }
}

DemandSeries generate_demands(const NetworkModel& model, std::uint64_t seed, std::size_t num_steps,
                              const DemandOptions& options) {
  if (num_steps == 0) throw Error("BAD_CONFIG", "demand series needs at least one step");
  DemandSeries series;
  series.seed = seed;
  series.timestep = model.hydraulic_timestep;
  series.values.assign(num_steps, std::vector<double>(model.junctions.size(), 0.0));
  const double sigma = options.noise_sigma;
  for (std::size_t k = 0; k < num_steps; ++k) {
    const double t = static_cast<double>(k) * model.hydraulic_timestep;
    const double hour = std::fmod(t / 3600.0, 24.0);
    const auto day = static_cast<std::size_t>(t / 86400.0);
    const double builtin = diurnal_factor(hour) * weekly_factor(day);
    for (std::size_t j = 0; j < model.junctions.size(); ++j) {
      const auto& junction = model.junctions[j];
      if (junction.base_demand == 0.0) continue;
      double shape = builtin;
      if (junction.pattern_id) {
        const auto& mult = model.patterns.at(*junction.pattern_id);
        const auto slot = static_cast<std::size_t>(t / model.pattern_timestep) % mult.size();
        shape = mult[slot] * weekly_factor(day);
      }
      const double noise = std::exp(sigma * keyed_normal(seed, j, k) - 0.5 * sigma * sigma);
      series.values[k][j] = std::max(0.0, junction.base_demand * shape * noise);
    }
  }
  return series;
}

MeasurementSeries MeasurementSeries::rows(std::size_t first, std::size_t count) const {
  if (first + count > num_steps()) throw Error("RANGE", "row slice exceeds the series");
  MeasurementSeries out;
  out.values = values.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
  out.sensors = sensors;
  out.times.assign(times.begin() + static_cast<std::ptrdiff_t>(first),
                   times.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

bool MeasurementSeries::operator==(const MeasurementSeries& other) const {
  return sensors == other.sensors && times == other.times && values.rows() == other.values.rows() &&
         values.cols() == other.values.cols() && values == other.values;
}

MeasurementSeries project_to_sensors(const NetworkModel& model, const SimulationResult& result) {
  const auto columns = model.sensor_indices();
  MeasurementSeries out;
  out.sensors = model.sensors;
  out.times = result.times;
  out.values.resize(static_cast<Eigen::Index>(result.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < result.size(); ++k)
    for (std::size_t s = 0; s < columns.size(); ++s)
      out.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) = result.states[k].pressures[columns[s]];
  return out;
}

MeasurementSeries measure(const NetworkModel& model, const DemandSeries& demands, std::optional<LeakScenario> leak,
                          const SolverOptions& options) {
  return project_to_sensors(model, run_eps(model, demands.values, leak, options));
}

Baseline make_baseline(const NetworkModel& model, const DemandSeries& demands, const SolverOptions& options) {
  Baseline b;
  b.simulation = run_eps(model, demands.values, std::nullopt, options);
  b.measurements = project_to_sensors(model, b.simulation);
  return b;
}

Eigen::MatrixXd measure_window(const NetworkModel& model, const DemandSeries& demands, const Baseline& baseline,
                               const LeakScenario& leak, std::size_t first_step, std::size_t end_step,
                               const SolverOptions& options,
                               const std::function<bool(std::size_t, const Eigen::VectorXd&)>& on_row) {
  const std::size_t horizon = baseline.simulation.size();
  if (first_step > end_step || end_step > horizon) throw Error("RANGE", "window exceeds the baseline horizon");
  if (leak.start_step < first_step) throw Error("RANGE", "leak starts before the measured window");
  validate_leak(model, leak, horizon);

  const auto columns = model.sensor_indices();
  const auto& base_levels = baseline.simulation.tank_levels;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(end_step - first_step), static_cast<Eigen::Index>(columns.size()));
  std::vector<double> levels = base_levels[first_step];
  std::size_t produced = 0;
  for (std::size_t step = first_step; step < end_step; ++step) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(columns.size()));
    const bool leak_on = leak.active_at(step) && leak.area > 0.0;
    if (!leak_on && levels == base_levels[step]) {
      row = baseline.measurements.values.row(static_cast<Eigen::Index>(step)).transpose();
      levels = step + 1 < horizon ? base_levels[step + 1] : baseline.simulation.final_tank_levels;
    } else {
      auto sim = simulate_range(model, demands.values, leak, step, step + 1, levels, options);
      for (std::size_t s = 0; s < columns.size(); ++s)
        row[static_cast<Eigen::Index>(s)] = sim.states.front().pressures[columns[s]];
      levels = std::move(sim.final_tank_levels);
    }
    rows.row(static_cast<Eigen::Index>(produced++)) = row.transpose();
    if (on_row && !on_row(step, row)) break;
  }
  rows.conservativeResize(static_cast<Eigen::Index>(produced), Eigen::NoChange);
  return rows;
}

std::string demands_to_csv(const NetworkModel& model, const DemandSeries& demands) {
  std::ostringstream out;
  out << "step";
  for (const auto& j : model.junctions) out << ',' << j.id;
  out << '\n';
  for (std::size_t k = 0; k < demands.num_steps(); ++k) {
    out << k;
    for (double v : demands.values[k]) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

DemandSeries demands_from_csv(const NetworkModel& model, std::string_view text, std::uint64_t seed, double timestep) {
  auto rows = split_csv(text);
  if (rows.empty()) throw Error("BAD_FORMAT", "empty demand CSV");
  const auto& header = rows.front();
  if (header.size() != model.junctions.size() + 1)
    throw Error("BAD_FORMAT", "demand CSV must have one column per junction");
  for (std::size_t j = 0; j < model.junctions.size(); ++j)
    if (header[j + 1] != model.junctions[j].id)
      throw Error("BAD_FORMAT", "demand CSV column '" + header[j + 1] + "' does not match junction order");
  DemandSeries series;
  series.seed = seed;
  series.timestep = timestep;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) throw Error("BAD_FORMAT", "ragged demand CSV row " + std::to_string(r));
    std::vector<double> step(model.junctions.size());
    for (std::size_t j = 0; j < step.size(); ++j) step[j] = parse_cell(rows[r][j + 1], r);
    series.values.push_back(std::move(step));
  }
  return series;
}

std::string measurements_to_csv(const MeasurementSeries& series) {
  std::ostringstream out;
  out << "step,time_s";
  for (const auto& s : series.sensors) out << ',' << s;
  out << '\n';
  for (std::size_t k = 0; k < series.num_steps(); ++k) {
    out << k << ',' << fmt(series.times[k]);
    for (std::size_t s = 0; s < series.num_sensors(); ++s)
      out << ',' << fmt(series.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)));
    out << '\n';
  }
  return out.str();
}

MeasurementSeries measurements_from_csv(std::string_view text) {
  auto rows = split_csv(text);
  if (rows.empty() || rows.front().size() < 2) throw Error("BAD_FORMAT", "measurement CSV needs a header");
  MeasurementSeries series;
  series.sensors.assign(rows.front().begin() + 2, rows.front().end());
  series.values.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(series.sensors.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw Error("BAD_FORMAT", "ragged measurement CSV row " + std::to_string(r));
    series.times.push_back(parse_cell(rows[r][1], r));
    for (std::size_t s = 0; s < series.sensors.size(); ++s)
      series.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(s)) = parse_cell(rows[r][s + 2], r);
  }
  return series;
}

} // namespace lspkit
