#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lspkit {

// All quantities are SI: metres, cubic metres per second, seconds.

struct Junction {
  std::string id;
  double elevation = 0.0;
  double base_demand = 0.0;
  std::optional<std::string> pattern_id;

  bool operator==(const Junction&) const = default;
};

struct Reservoir {
  std::string id;
  double total_head = 0.0;

  bool operator==(const Reservoir&) const = default;
};

struct Tank {
  std::string id;
  double elevation = 0.0;
  double init_level = 0.0;
  double min_level = 0.0;
  double max_level = 0.0;
  double diameter = 0.0;

  double cross_section() const;

  bool operator==(const Tank&) const = default;
};

struct Pipe {
  std::string id;
  std::string from_node;
  std::string to_node;
  double length = 0.0;
  double diameter = 0.0;
  double roughness = 0.0; // Hazen-Williams C

  bool operator==(const Pipe&) const = default;
};

/// Single-point pump curve as EPANET defines it: the design point (flow, head)
/// expands to h_gain(q) = h0 - r * q^n with h0 = 4/3 head, r = head / (3 flow^2), n = 2.
struct PumpCurve {
  std::string id;
  double design_flow = 0.0;
  double design_head = 0.0;

  double shutoff_head() const { return 4.0 / 3.0 * design_head; }
  double resistance() const { return design_head / (3.0 * design_flow * design_flow); }
  double exponent() const { return 2.0; }

  bool operator==(const PumpCurve&) const = default;
};

struct Pump {
  std::string id;
  std::string from_node;
  std::string to_node;
  PumpCurve curve;

  bool operator==(const Pump&) const = default;
};

/// Pressure reducing valve. `setting` is the downstream pressure head (m).
struct Valve {
  std::string id;
  std::string from_node;
  std::string to_node;
  double diameter = 0.0;
  double setting = 0.0;
  double minor_loss = 0.0;

  bool operator==(const Valve&) const = default;
};

struct Coordinate {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Coordinate&) const = default;
};

enum class NodeKind { Junction, Reservoir, Tank };
enum class LinkKind { Pipe, Pump, Valve };

struct LinkRef {
  LinkKind kind;
  std::size_t slot; // index within the kind-specific vector
  std::size_t from;
  std::size_t to;
};

/// Static description of a water distribution network.
///
/// Node indices enumerate junctions, then reservoirs, then tanks, each group in
/// file order. Link indices enumerate pipes, then pumps, then valves.
/// Call `rebuild_index()` after editing any of the element vectors.
struct NetworkModel {
  std::string title;
  std::vector<Junction> junctions;
  std::vector<Reservoir> reservoirs;
  std::vector<Tank> tanks;
  std::vector<Pipe> pipes;
  std::vector<Pump> pumps;
  std::vector<Valve> valves;
  std::map<std::string, std::vector<double>> patterns;
  std::map<std::string, Coordinate> coordinates;
  std::vector<std::string> sensors;
  double hydraulic_timestep = 1800.0;
  double pattern_timestep = 3600.0;
  double duration = 86400.0;

  std::size_t node_count() const { return junctions.size() + reservoirs.size() + tanks.size(); }
  std::size_t link_count() const { return pipes.size() + pumps.size() + valves.size(); }

  /// Throws Error{"UNKNOWN_NODE"} for ids that are not in the model.
  std::size_t node_index(const std::string& id) const;
  std::optional<std::size_t> find_node(const std::string& id) const;
  const std::string& node_id(std::size_t index) const;
  NodeKind node_kind(std::size_t index) const;
  double node_elevation(std::size_t index) const;

  /// Resolved links; only complete after `rebuild_index()` on a valid model.
  const std::vector<LinkRef>& links() const { return links_; }
  const std::string& link_id(std::size_t index) const;

  /// Node indices of the sensor list, in sensor order.
  std::vector<std::size_t> sensor_indices() const;

  /// Undirected adjacency over all nodes; parallel links collapse to one edge.
  std::vector<std::vector<std::size_t>> adjacency() const;

  void rebuild_index();

  /// Field-by-field comparison of the network description (indices excluded).
  bool operator==(const NetworkModel& other) const;

private:
  std::unordered_map<std::string, std::size_t> node_lookup_;
  std::vector<LinkRef> links_;
};

/// Breadth-first hop distances from `source` over the undirected graph.
/// Unreachable nodes get SIZE_MAX.
std::vector<std::size_t> hop_distances(const NetworkModel& model, std::size_t source);

} // namespace lspkit
