#include "lspkit/inp_parser.hpp"

#include "lspkit/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lspkit {

namespace {

// INP files carry LPS flows and millimetre pipe diameters.
constexpr double kLpsPerCms = 1000.0;
constexpr double kMmPerM = 1000.0;

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::optional<double> to_number(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

// Decimal text t such that parse(t) / scale reproduces `value` bit for bit.
std::string format_scaled(double value, double scale) {
  double candidate = value * scale;
  for (int step = 0; step < 8; ++step) {
    for (double probe : {candidate, std::nextafter(candidate, -INFINITY),
                         std::nextafter(candidate, INFINITY)}) {
      if (probe / scale == value) return shortest(probe);
    }
    candidate = std::nextafter(candidate, value * scale > candidate ? INFINITY : -INFINITY);
  }
  return shortest(candidate);
}

std::optional<double> parse_clock(const std::vector<std::string>& tokens, std::size_t first) {
  if (first >= tokens.size()) return std::nullopt;
  const std::string& value = tokens[first];
  if (value.find(':') != std::string::npos) {
    double total = 0.0;
    double unit = 3600.0;
    std::size_t start = 0;
    while (start <= value.size()) {
      const auto colon = value.find(':', start);
      const auto part = std::string_view(value).substr(
          start, colon == std::string::npos ? std::string::npos : colon - start);
      auto number = to_number(part);
      if (!number || unit < 1.0) return std::nullopt;
      total += *number * unit;
      unit /= 60.0;
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    return total;
  }
  auto number = to_number(value);
  if (!number) return std::nullopt;
  double unit = 3600.0;
  if (first + 1 < tokens.size()) {
    const std::string u = upper(tokens[first + 1]);
    if (u.rfind("SEC", 0) == 0) unit = 1.0;
    else if (u.rfind("MIN", 0) == 0) unit = 60.0;
    else if (u.rfind("HOUR", 0) == 0) unit = 3600.0;
    else if (u.rfind("DAY", 0) == 0) unit = 86400.0;
    else return std::nullopt;
  }
  return *number * unit;
}

class InpReader {
public:
  ParseResult run(std::string_view text);

private:
  void error(std::string code, std::string message, std::size_t line) {
    report_.errors.push_back({std::move(code), std::move(message), "line " + std::to_string(line), line});
  }
  void warn(std::string code, std::string message, std::size_t line) {
    report_.warnings.push_back({std::move(code), std::move(message), "line " + std::to_string(line), line});
  }

  bool need(const std::vector<std::string>& tok, std::size_t count, std::size_t line) {
    if (tok.size() >= count) return true;
    error("BAD_FORMAT", "expected at least " + std::to_string(count) + " fields, found " +
                            std::to_string(tok.size()),
          line);
    return false;
  }

  std::optional<double> number(const std::string& token, std::size_t line) {
    auto value = to_number(token);
    if (!value) error("BAD_NUMBER", "malformed number '" + token + "'", line);
    return value;
  }

  bool claim_node(const std::string& id, std::size_t line) {
    if (!node_lines_.emplace(id, line).second) {
      error("DUP_ID", "duplicate node id '" + id + "'", line);
      return false;
    }
    return true;
  }
  bool claim_link(const std::string& id, std::size_t line) {
    if (!link_lines_.emplace(id, line).second) {
      error("DUP_ID", "duplicate link id '" + id + "'", line);
      return false;
    }
    return true;
  }

  void on_junction(const std::vector<std::string>& t, std::size_t line);
  void on_reservoir(const std::vector<std::string>& t, std::size_t line);
  void on_tank(const std::vector<std::string>& t, std::size_t line);
  void on_pipe(const std::vector<std::string>& t, std::size_t line);
  void on_pump(const std::vector<std::string>& t, std::size_t line);
  void on_valve(const std::vector<std::string>& t, std::size_t line);
  void on_demand(const std::vector<std::string>& t, std::size_t line);
  void on_pattern(const std::vector<std::string>& t, std::size_t line);
  void on_curve(const std::vector<std::string>& t, std::size_t line);
  void on_time(const std::vector<std::string>& t, std::size_t line);
  void on_coordinate(const std::vector<std::string>& t, std::size_t line);
  void on_option(const std::vector<std::string>& t, std::size_t line);
  void finish_pumps();
  void finish_demands();

  NetworkModel model_;
  ValidationReport report_;
  std::map<std::string, std::size_t> node_lines_;
  std::map<std::string, std::size_t> link_lines_;
  std::map<std::string, std::vector<std::pair<double, double>>> curves_;
  std::vector<std::pair<std::string, std::size_t>> pump_curve_refs_; // curve id, line
  struct DemandEntry {
    std::string junction;
    double demand;
    std::optional<std::string> pattern;
    std::size_t line;
  };
  std::vector<DemandEntry> demand_entries_;
  bool units_declared_ = false;
};

void InpReader::on_junction(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 2, line)) return;
  Junction j;
  j.id = t[0];
  auto elev = number(t[1], line);
  std::optional<double> demand = 0.0;
  if (t.size() > 2) demand = number(t[2], line);
  if (!elev || !demand) return;
  j.elevation = *elev;
  j.base_demand = *demand / kLpsPerCms;
  if (t.size() > 3) j.pattern_id = t[3];
  if (t.size() > 4) warn("IGNORED_FIELD", "extra junction fields ignored", line);
  if (claim_node(j.id, line)) model_.junctions.push_back(std::move(j));
}

void InpReader::on_reservoir(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 2, line)) return;
  auto head = number(t[1], line);
  if (!head) return;
  if (t.size() > 2) warn("IGNORED_FIELD", "reservoir head patterns are not supported", line);
  if (claim_node(t[0], line)) model_.reservoirs.push_back({t[0], *head});
}

void InpReader::on_tank(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 6, line)) return;
  std::array<double, 5> v{};
  for (std::size_t k = 0; k < 5; ++k) {
    auto x = number(t[k + 1], line);
    if (!x) return;
    v[k] = *x;
  }
  if (t.size() > 6) warn("IGNORED_FIELD", "tank volume fields ignored", line);
  if (claim_node(t[0], line)) model_.tanks.push_back({t[0], v[0], v[1], v[2], v[3], v[4]});
}

void InpReader::on_pipe(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 6, line)) return;
  auto length = number(t[3], line);
  auto diameter = number(t[4], line);
  auto roughness = number(t[5], line);
  if (!length || !diameter || !roughness) return;
  if (t.size() > 6) {
    auto minor = number(t[6], line);
    if (!minor) return;
    if (*minor != 0.0) warn("IGNORED_FIELD", "pipe minor losses are not modelled", line);
  }
  if (t.size() > 7 && upper(t[7]) != "OPEN")
    warn("IGNORED_FIELD", "pipe status '" + t[7] + "' ignored; pipe treated as open", line);
  if (claim_link(t[0], line))
    model_.pipes.push_back({t[0], t[1], t[2], *length, *diameter / kMmPerM, *roughness});
}

void InpReader::on_pump(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 5, line)) return;
  if (upper(t[3]) != "HEAD") {
    error("BAD_PUMP", "only HEAD curve pumps are supported", line);
    return;
  }
  if (t.size() > 5) warn("IGNORED_FIELD", "pump speed/pattern fields ignored", line);
  if (!claim_link(t[0], line)) return;
  Pump p{t[0], t[1], t[2], PumpCurve{t[4], 0.0, 0.0}};
  model_.pumps.push_back(std::move(p));
  pump_curve_refs_.emplace_back(t[4], line);
}

void InpReader::on_valve(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 6, line)) return;
  if (upper(t[4]) != "PRV") {
    error("BAD_VALVE", "valve type '" + t[4] + "' is not supported (PRV only)", line);
    return;
  }
  auto diameter = number(t[3], line);
  auto setting = number(t[5], line);
  std::optional<double> minor = 0.0;
  if (t.size() > 6) minor = number(t[6], line);
  if (!diameter || !setting || !minor) return;
  if (claim_link(t[0], line))
    model_.valves.push_back({t[0], t[1], t[2], *diameter / kMmPerM, *setting, *minor});
}

void InpReader::on_demand(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 2, line)) return;
  auto demand = number(t[1], line);
  if (!demand) return;
  DemandEntry entry{t[0], *demand / kLpsPerCms, std::nullopt, line};
  if (t.size() > 2) entry.pattern = t[2];
  demand_entries_.push_back(std::move(entry));
}

void InpReader::on_pattern(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 1, line)) return;
  auto& values = model_.patterns[t[0]];
  for (std::size_t k = 1; k < t.size(); ++k) {
    auto v = number(t[k], line);
    if (!v) return;
    values.push_back(*v);
  }
}

void InpReader::on_curve(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 3, line)) return;
  auto x = number(t[1], line);
  auto y = number(t[2], line);
  if (x && y) curves_[t[0]].emplace_back(*x, *y);
}

void InpReader::on_time(const std::vector<std::string>& t, std::size_t line) {
  if (t.empty()) return;
  const std::string key = upper(t[0]);
  std::size_t value_at = 1;
  double* target = nullptr;
  if (key == "DURATION") {
    target = &model_.duration;
  } else if ((key == "HYDRAULIC" || key == "PATTERN") && t.size() > 1 &&
             upper(t[1]) == "TIMESTEP") {
    target = key == "HYDRAULIC" ? &model_.hydraulic_timestep : &model_.pattern_timestep;
    value_at = 2;
  } else {
    warn("IGNORED_OPTION", "time option '" + t[0] + "' ignored", line);
    return;
  }
  auto seconds = parse_clock(t, value_at);
  if (!seconds) {
    error("BAD_NUMBER", "malformed time value", line);
    return;
  }
  *target = *seconds;
}

void InpReader::on_coordinate(const std::vector<std::string>& t, std::size_t line) {
  if (!need(t, 3, line)) return;
  auto x = number(t[1], line);
  auto y = number(t[2], line);
  if (x && y) model_.coordinates[t[0]] = {*x, *y};
}

void InpReader::on_option(const std::vector<std::string>& t, std::size_t line) {
  if (t.empty()) return;
  const std::string key = upper(t[0]);
  if (key == "UNITS") {
    if (t.size() < 2 || upper(t[1]) != "LPS") {
      error("BAD_UNITS", "only LPS flow units are supported", line);
      return;
    }
    units_declared_ = true;
  } else if (key == "HEADLOSS") {
    if (t.size() < 2 || upper(t[1]) != "H-W")
      error("BAD_UNITS", "only the Hazen-Williams (H-W) headloss formula is supported", line);
  } else {
    warn("IGNORED_OPTION", "option '" + t[0] + "' ignored", line);
  }
}

void InpReader::finish_pumps() {
  for (std::size_t k = 0; k < model_.pumps.size(); ++k) {
    const auto& [curve_id, line] = pump_curve_refs_[k];
    auto it = curves_.find(curve_id);
    if (it == curves_.end()) {
      error("UNKNOWN_CURVE", "pump curve '" + curve_id + "' is not defined", line);
      continue;
    }
    if (it->second.size() != 1) {
      error("BAD_CURVE", "pump curve '" + curve_id + "' must be a single design point", line);
      continue;
    }
    model_.pumps[k].curve.design_flow = it->second.front().first / kLpsPerCms;
    model_.pumps[k].curve.design_head = it->second.front().second;
  }
}

void InpReader::finish_demands() {
  // The first [DEMANDS] entry for a junction replaces its [JUNCTIONS] demand;
  // further categories are summed onto it and keep the first pattern.
  std::set<std::string> seen;
  for (const auto& entry : demand_entries_) {
    auto it = std::find_if(model_.junctions.begin(), model_.junctions.end(),
                           [&](const Junction& j) { return j.id == entry.junction; });
    if (it == model_.junctions.end()) {
      error("UNKNOWN_NODE", "demand for unknown junction '" + entry.junction + "'", entry.line);
      continue;
    }
    if (seen.insert(entry.junction).second) {
      it->base_demand = entry.demand;
      it->pattern_id = entry.pattern;
    } else {
      it->base_demand += entry.demand;
      warn("MERGED_DEMAND", "multiple demand categories merged into one", entry.line);
    }
  }
}

ParseResult InpReader::run(std::string_view text) {
  std::string section;
  std::set<std::string> warned_sections;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool ended = false;
  while (pos <= text.size() && !ended) {
    auto eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (auto semi = raw.find(';'); semi != std::string_view::npos) raw = raw.substr(0, semi);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

    auto tokens = tokenize(raw);
    if (tokens.empty()) continue;
    if (tokens[0].front() == '[') {
      section = upper(tokens[0]);
      if (section == "[END]") ended = true;
      continue;
    }
    if (section == "[TITLE]") {
      std::string joined;
      for (const auto& tok : tokens) joined += (joined.empty() ? "" : " ") + tok;
      model_.title += (model_.title.empty() ? "" : "\n") + joined;
    } else if (section == "[JUNCTIONS]") on_junction(tokens, line_no);
    else if (section == "[RESERVOIRS]") on_reservoir(tokens, line_no);
    else if (section == "[TANKS]") on_tank(tokens, line_no);
    else if (section == "[PIPES]") on_pipe(tokens, line_no);
    else if (section == "[PUMPS]") on_pump(tokens, line_no);
    else if (section == "[VALVES]") on_valve(tokens, line_no);
    else if (section == "[DEMANDS]") on_demand(tokens, line_no);
    else if (section == "[PATTERNS]") on_pattern(tokens, line_no);
    else if (section == "[CURVES]") on_curve(tokens, line_no);
    else if (section == "[TIMES]") on_time(tokens, line_no);
    else if (section == "[COORDINATES]") on_coordinate(tokens, line_no);
    else if (section == "[OPTIONS]") on_option(tokens, line_no);
    else if (section.empty()) warn("IGNORED_LINE", "content outside any section", line_no);
    else if (warned_sections.insert(section).second)
      warn("UNSUPPORTED_SECTION", "section " + section + " is not supported and was skipped", line_no);
  }

  if (!units_declared_)
    report_.warnings.push_back({"UNITS_ASSUMED", "no Units option; LPS assumed", "", 0});
  finish_pumps();
  finish_demands();
  model_.rebuild_index();

  if (report_.errors.empty()) {
    auto structural = validate(model_);
    for (auto& d : structural.errors) {
      // Point element-level findings back at their source line when we know it.
      for (const auto* lines : {&link_lines_, &node_lines_}) {
        auto quote = d.location.find('\'');
        if (quote == std::string::npos) break;
        auto id = d.location.substr(quote + 1, d.location.rfind('\'') - quote - 1);
        if (auto it = lines->find(id); it != lines->end() && d.line == 0) {
          d.line = it->second;
          d.location += " at line " + std::to_string(d.line);
        }
      }
      report_.errors.push_back(std::move(d));
    }
    for (auto& d : structural.warnings) report_.warnings.push_back(std::move(d));
  }

  ParseResult result;
  if (report_.errors.empty()) result.model = std::move(model_);
  result.report = std::move(report_);
  return result;
}

} // namespace

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const Diagnostic& d) { return d.code == code; });
}

bool ValidationReport::has_warning(std::string_view code) const {
  return std::any_of(warnings.begin(), warnings.end(), [&](const Diagnostic& d) { return d.code == code; });
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  auto emit = [&](const char* level, const Diagnostic& d) {
    out << level << ' ' << d.code;
    if (!d.location.empty()) out << " (" << d.location << ')';
    out << ": " << d.message << '\n';
  };
  for (const auto& d : errors) emit("error", d);
  for (const auto& d : warnings) emit("warning", d);
  return out.str();
}

ParseResult parse_inp(std::string_view text) { return InpReader{}.run(text); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO_ERROR", "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

NetworkModel load_inp(const std::filesystem::path& path) {
  auto result = parse_inp(read_text_file(path));
  if (!result.ok()) {
    const auto& first = result.report.errors.front();
    throw Error(first.code, path.string() + " (" + first.location + "): " + first.message);
  }
  return std::move(*result.model);
}

ValidationReport validate(const NetworkModel& model) {
  ValidationReport report;
  auto fail = [&](std::string code, std::string message, std::string location) {
    report.errors.push_back({std::move(code), std::move(message), std::move(location), 0});
  };
  auto quoted = [](const char* kind, const std::string& id) { return std::string(kind) + " '" + id + "'"; };

  if (model.reservoirs.empty() && model.tanks.empty())
    fail("NO_SOURCE", "network has no reservoir or tank to fix a boundary head", "network");
  if (model.node_count() == 0) return report;

  std::set<std::string> node_ids;
  for (std::size_t i = 0; i < model.node_count(); ++i)
    if (!node_ids.insert(model.node_id(i)).second)
      fail("DUP_ID", "duplicate node id", quoted("node", model.node_id(i)));
  std::set<std::string> link_ids;
  for (std::size_t k = 0; k < model.link_count(); ++k)
    if (!link_ids.insert(model.link_id(k)).second)
      fail("DUP_ID", "duplicate link id", quoted("link", model.link_id(k)));

  auto check_endpoints = [&](const char* kind, const std::string& id, const std::string& a,
                             const std::string& b) {
    for (const auto* end : {&a, &b})
      if (!model.find_node(*end))
        fail("UNKNOWN_NODE", "endpoint '" + *end + "' is not a defined node", quoted(kind, id));
    if (a == b) fail("BAD_VALUE", "link connects a node to itself", quoted(kind, id));
  };
  for (const auto& p : model.pipes) {
    check_endpoints("pipe", p.id, p.from_node, p.to_node);
    if (!(p.length > 0 && p.diameter > 0 && p.roughness > 0))
      fail("BAD_VALUE", "length, diameter and roughness must be positive", quoted("pipe", p.id));
  }
  for (const auto& p : model.pumps) {
    check_endpoints("pump", p.id, p.from_node, p.to_node);
    if (!(p.curve.design_flow > 0 && p.curve.design_head > 0))
      fail("BAD_CURVE", "pump design point must be positive", quoted("pump", p.id));
  }
  for (const auto& v : model.valves) {
    check_endpoints("valve", v.id, v.from_node, v.to_node);
    if (!(v.diameter > 0) || v.minor_loss < 0)
      fail("BAD_VALUE", "valve diameter must be positive", quoted("valve", v.id));
    if (auto to = model.find_node(v.to_node); to && model.node_kind(*to) != NodeKind::Junction)
      fail("BAD_VALUE", "PRV must discharge into a junction", quoted("valve", v.id));
  }
  for (const auto& t : model.tanks) {
    if (!(t.diameter > 0) || !(t.min_level <= t.init_level && t.init_level <= t.max_level) ||
        t.min_level < 0)
      fail("BAD_VALUE", "tank needs diameter > 0 and 0 <= min <= init <= max level", quoted("tank", t.id));
  }
  for (const auto& j : model.junctions) {
    if (j.base_demand < 0) fail("BAD_VALUE", "negative base demand", quoted("junction", j.id));
    if (j.pattern_id && !model.patterns.count(*j.pattern_id))
      fail("UNKNOWN_PATTERN", "pattern '" + *j.pattern_id + "' is not defined", quoted("junction", j.id));
  }
  for (const auto& [id, values] : model.patterns)
    if (values.empty()) fail("BAD_VALUE", "pattern has no multipliers", quoted("pattern", id));
  if (!(model.hydraulic_timestep > 0) || !(model.pattern_timestep > 0) || model.duration < 0)
    fail("BAD_VALUE", "timesteps must be positive and duration non-negative", "times");

  std::set<std::string> sensor_ids;
  for (const auto& s : model.sensors) {
    auto idx = model.find_node(s);
    if (!idx || model.node_kind(*idx) != NodeKind::Junction)
      fail("BAD_SENSOR", "sensor must sit on a junction", quoted("sensor", s));
    if (!sensor_ids.insert(s).second) fail("BAD_SENSOR", "duplicate sensor", quoted("sensor", s));
  }

  if (report.errors.empty()) {
    const auto dist = hop_distances(model, 0);
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] == std::numeric_limits<std::size_t>::max()) {
        fail("DISCONNECTED", "node is not connected to the rest of the network",
             quoted("node", model.node_id(i)));
        break;
      }
    }
  }
  return report;
}

std::string to_inp(const NetworkModel& model) {
  std::ostringstream out;
  out << "[TITLE]\n";
  if (!model.title.empty()) out << model.title << '\n';

  out << "\n[OPTIONS]\nUnits LPS\nHeadloss H-W\n";
  out << "\n[TIMES]\n"
      << "Duration " << shortest(model.duration) << " SEC\n"
      << "Hydraulic Timestep " << shortest(model.hydraulic_timestep) << " SEC\n"
      << "Pattern Timestep " << shortest(model.pattern_timestep) << " SEC\n";

  out << "\n[JUNCTIONS]\n";
  for (const auto& j : model.junctions) {
    out << j.id << ' ' << shortest(j.elevation) << ' ' << format_scaled(j.base_demand, kLpsPerCms);
    if (j.pattern_id) out << ' ' << *j.pattern_id;
    out << '\n';
  }
  out << "\n[RESERVOIRS]\n";
  for (const auto& r : model.reservoirs) out << r.id << ' ' << shortest(r.total_head) << '\n';
  out << "\n[TANKS]\n";
  for (const auto& t : model.tanks)
    out << t.id << ' ' << shortest(t.elevation) << ' ' << shortest(t.init_level) << ' '
        << shortest(t.min_level) << ' ' << shortest(t.max_level) << ' ' << shortest(t.diameter) << '\n';
  out << "\n[PIPES]\n";
  for (const auto& p : model.pipes)
    out << p.id << ' ' << p.from_node << ' ' << p.to_node << ' ' << shortest(p.length) << ' '
        << format_scaled(p.diameter, kMmPerM) << ' ' << shortest(p.roughness) << '\n';
  out << "\n[PUMPS]\n";
  for (const auto& p : model.pumps)
    out << p.id << ' ' << p.from_node << ' ' << p.to_node << " HEAD " << p.curve.id << '\n';
  out << "\n[CURVES]\n";
  std::set<std::string> written;
  for (const auto& p : model.pumps)
    if (written.insert(p.curve.id).second)
      out << p.curve.id << ' ' << format_scaled(p.curve.design_flow, kLpsPerCms) << ' '
          << shortest(p.curve.design_head) << '\n';
  out << "\n[VALVES]\n";
  for (const auto& v : model.valves)
    out << v.id << ' ' << v.from_node << ' ' << v.to_node << ' ' << format_scaled(v.diameter, kMmPerM)
        << " PRV " << shortest(v.setting) << ' ' << shortest(v.minor_loss) << '\n';
  out << "\n[PATTERNS]\n";
  for (const auto& [id, values] : model.patterns) {
    for (std::size_t k = 0; k < values.size(); k += 6) {
      out << id;
      for (std::size_t m = k; m < std::min(values.size(), k + 6); ++m) out << ' ' << shortest(values[m]);
      out << '\n';
    }
  }
  out << "\n[COORDINATES]\n";
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    auto it = model.coordinates.find(model.node_id(i));
    if (it != model.coordinates.end())
      out << it->first << ' ' << shortest(it->second.x) << ' ' << shortest(it->second.y) << '\n';
  }
  for (const auto& [id, xy] : model.coordinates)
    if (!model.find_node(id)) out << id << ' ' << shortest(xy.x) << ' ' << shortest(xy.y) << '\n';
  out << "\n[END]\n";
  return out.str();
}

std::vector<std::string> parse_sensors_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_SENSOR", std::string("sensors file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("sensors") || !doc["sensors"].is_array())
    throw Error("BAD_SENSOR", "sensors file must be an object with a \"sensors\" array");
  std::vector<std::string> ids;
  for (const auto& item : doc["sensors"]) {
    if (!item.is_string()) throw Error("BAD_SENSOR", "sensor ids must be strings");
    ids.push_back(item.get<std::string>());
  }
  return ids;
}

std::vector<std::string> load_sensors(const std::filesystem::path& path) {
  return parse_sensors_json(read_text_file(path));
}

std::string sensors_to_json(const std::vector<std::string>& sensors) {
  return nlohmann::json{{"sensors", sensors}}.dump(2) + "\n";
}

void attach_sensors(NetworkModel& model, std::vector<std::string> sensors) {
  std::set<std::string> seen;
  for (const auto& id : sensors) {
    auto idx = model.find_node(id);
    if (!idx || model.node_kind(*idx) != NodeKind::Junction)
      throw Error("BAD_SENSOR", "sensor '" + id + "' is not a junction of the network");
    if (!seen.insert(id).second) throw Error("BAD_SENSOR", "sensor '" + id + "' listed twice");
  }
  model.sensors = std::move(sensors);
}

} // namespace lspkit
