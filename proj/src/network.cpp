#include "lspkit/network.hpp"

#include "lspkit/error.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <queue>

namespace lspkit {

namespace {
constexpr std::size_t kUnresolved = std::numeric_limits<std::size_t>::max();
}

double Tank::cross_section() const { return std::numbers::pi / 4.0 * diameter * diameter; }

std::optional<std::size_t> NetworkModel::find_node(const std::string& id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t NetworkModel::node_index(const std::string& id) const {
  if (auto idx = find_node(id)) return *idx;
  throw Error("UNKNOWN_NODE", "node '" + id + "' is not part of the network");
}

const std::string& NetworkModel::node_id(std::size_t index) const {
  if (index < junctions.size()) return junctions[index].id;
  index -= junctions.size();
  if (index < reservoirs.size()) return reservoirs[index].id;
  index -= reservoirs.size();
  if (index < tanks.size()) return tanks[index].id;
  throw Error("UNKNOWN_NODE", "node index out of range");
}

NodeKind NetworkModel::node_kind(std::size_t index) const {
  if (index < junctions.size()) return NodeKind::Junction;
  if (index < junctions.size() + reservoirs.size()) return NodeKind::Reservoir;
  if (index < node_count()) return NodeKind::Tank;
  throw Error("UNKNOWN_NODE", "node index out of range");
}

double NetworkModel::node_elevation(std::size_t index) const {
  switch (node_kind(index)) {
  case NodeKind::Junction:
    return junctions[index].elevation;
  case NodeKind::Reservoir:
    // Reservoirs have no ground level of their own; pressure there is reported as zero.
    return reservoirs[index - junctions.size()].total_head;
  case NodeKind::Tank:
    return tanks[index - junctions.size() - reservoirs.size()].elevation;
  }
  return 0.0;
}

const std::string& NetworkModel::link_id(std::size_t index) const {
  if (index < pipes.size()) return pipes[index].id;
  index -= pipes.size();
  if (index < pumps.size()) return pumps[index].id;
  index -= pumps.size();
  if (index < valves.size()) return valves[index].id;
  throw Error("UNKNOWN_LINK", "link index out of range");
}

std::vector<std::size_t> NetworkModel::sensor_indices() const {
  std::vector<std::size_t> out;
  out.reserve(sensors.size());
  for (const auto& id : sensors) out.push_back(node_index(id));
  return out;
}

std::vector<std::vector<std::size_t>> NetworkModel::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(node_count());
  for (const auto& link : links_) {
    if (link.from == kUnresolved || link.to == kUnresolved || link.from == link.to) continue;
    adj[link.from].push_back(link.to);
    adj[link.to].push_back(link.from);
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

void NetworkModel::rebuild_index() {
  node_lookup_.clear();
  const std::size_t n = node_count();
  for (std::size_t i = 0; i < n; ++i) node_lookup_.emplace(node_id(i), i);

  auto resolve = [&](const std::string& id) {
    auto it = node_lookup_.find(id);
    return it == node_lookup_.end() ? kUnresolved : it->second;
  };
  links_.clear();
  links_.reserve(link_count());
  for (std::size_t k = 0; k < pipes.size(); ++k)
    links_.push_back({LinkKind::Pipe, k, resolve(pipes[k].from_node), resolve(pipes[k].to_node)});
  for (std::size_t k = 0; k < pumps.size(); ++k)
    links_.push_back({LinkKind::Pump, k, resolve(pumps[k].from_node), resolve(pumps[k].to_node)});
  for (std::size_t k = 0; k < valves.size(); ++k)
    links_.push_back({LinkKind::Valve, k, resolve(valves[k].from_node), resolve(valves[k].to_node)});
}

bool NetworkModel::operator==(const NetworkModel& other) const {
  return title == other.title && junctions == other.junctions && reservoirs == other.reservoirs &&
         tanks == other.tanks && pipes == other.pipes && pumps == other.pumps &&
         valves == other.valves && patterns == other.patterns &&
         coordinates == other.coordinates && sensors == other.sensors &&
         hydraulic_timestep == other.hydraulic_timestep &&
         pattern_timestep == other.pattern_timestep && duration == other.duration;
}

std::vector<std::size_t> hop_distances(const NetworkModel& model, std::size_t source) {
  const auto adj = model.adjacency();
  std::vector<std::size_t> dist(adj.size(), kUnresolved);
  std::queue<std::size_t> frontier;
  dist.at(source) = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (dist[v] != kUnresolved) continue;
      dist[v] = dist[u] + 1;
      frontier.push(v);
    }
  }
  return dist;
}

} // namespace lspkit
