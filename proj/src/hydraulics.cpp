#include "lspkit/hydraulics.hpp"

#include "lspkit/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lspkit {

namespace {

constexpr double kHwCoefficient = 10.667;
constexpr double kHwExponent = 1.852;
constexpr double kMinFlowForSlope = 1e-6; // laminar regularisation of dh/dq
constexpr double kMinSlope = 1e-7;
constexpr double kClosedSlope = 1e8; // closed links keep a 1e-8 conductance
constexpr double kMinLeakPressure = 1e-4;
constexpr double kStatusHeadTol = 1e-4;
constexpr double kStatusFlowTol = 1e-9;
constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();

struct LinkLaw {
  double headloss; // from - to
  double slope;    // d headloss / d flow, > 0
};

double hw_resistance(const Pipe& p) {
  return kHwCoefficient * std::pow(p.roughness, -kHwExponent) * std::pow(p.diameter, -4.871) * p.length;
}

double open_valve_resistance(const Valve& v) {
  // Minor-loss form h = K v^2 / 2g expressed in flow.
  const double d2 = v.diameter * v.diameter;
  return 8.0 * v.minor_loss / (std::numbers::pi * std::numbers::pi * kGravity * d2 * d2);
}

class SteadySolver {
public:
  SteadySolver(const NetworkModel& model, std::span<const double> demands, std::span<const double> tank_heads,
               std::optional<PointLeak> leak, const SolverOptions& options)
      : model_(model), demands_(demands), leak_(leak), opt_(options),
        nj_(model.junctions.size()), nn_(model.node_count()), links_(model.links()) {
    if (demands.size() != nj_)
      throw Error("DIM_MISMATCH", "expected one demand per junction");
    if (tank_heads.size() != model.tanks.size())
      throw Error("DIM_MISMATCH", "expected one head per tank");
    if (leak_ && leak_->node >= nj_)
      throw Error("BAD_LEAK", "leaks can only be placed at junctions");
    resistance_.resize(links_.size(), 0.0);
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto& ref = links_[l];
      if (ref.kind == LinkKind::Pipe) resistance_[l] = hw_resistance(model.pipes[ref.slot]);
      else if (ref.kind == LinkKind::Valve) resistance_[l] = open_valve_resistance(model.valves[ref.slot]);
    }
    state_.heads.assign(nn_, 0.0);
    double source_head = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < model.reservoirs.size(); ++r) {
      state_.heads[nj_ + r] = model.reservoirs[r].total_head;
      source_head = std::max(source_head, model.reservoirs[r].total_head);
    }
    for (std::size_t t = 0; t < model.tanks.size(); ++t) {
      state_.heads[nj_ + model.reservoirs.size() + t] = tank_heads[t];
      source_head = std::max(source_head, tank_heads[t]);
    }
    for (std::size_t j = 0; j < nj_; ++j) state_.heads[j] = source_head;

    state_.flows.assign(links_.size(), 0.0);
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto& ref = links_[l];
      switch (ref.kind) {
      case LinkKind::Pipe: {
        const double d = model.pipes[ref.slot].diameter;
        state_.flows[l] = 0.3 * std::numbers::pi / 4.0 * d * d; // 0.3 m/s start velocity
        break;
      }
      case LinkKind::Pump:
        state_.flows[l] = model.pumps[ref.slot].curve.design_flow;
        break;
      case LinkKind::Valve: {
        const double d = model.valves[ref.slot].diameter;
        state_.flows[l] = 0.3 * std::numbers::pi / 4.0 * d * d;
        break;
      }
      }
    }
    state_.valve_status.assign(model.valves.size(), ValveStatus::Active);
    state_.leak_flows.assign(nn_, 0.0);
  }

  HydraulicState solve();

private:
  LinkLaw law(std::size_t l, double q) const;
  double leak_at(std::size_t node, double head) const;
  double residual_metric(std::span<const double> heads, std::span<const double> flows) const;
  void newton_step(std::vector<double>& heads, std::vector<double>& flows);
  bool update_valve_status();

  bool valve_active(std::size_t l) const {
    return links_[l].kind == LinkKind::Valve &&
           state_.valve_status[links_[l].slot] == ValveStatus::Active;
  }
  double valve_set_head(const Valve& v, std::size_t to) const {
    return model_.node_elevation(to) + v.setting;
  }

  const NetworkModel& model_;
  std::span<const double> demands_;
  std::optional<PointLeak> leak_;
  SolverOptions opt_;
  std::size_t nj_;
  std::size_t nn_;
  const std::vector<LinkRef>& links_;
  std::vector<double> resistance_;
  HydraulicState state_;
};

LinkLaw SteadySolver::law(std::size_t l, double q) const {
  const auto& ref = links_[l];
  const double aq = std::max(std::abs(q), kMinFlowForSlope);
  switch (ref.kind) {
  case LinkKind::Pipe: {
    const double k = resistance_[l];
    const double h = k * std::copysign(std::pow(std::abs(q), kHwExponent), q);
    return {h, std::max(kHwExponent * k * std::pow(aq, kHwExponent - 1.0), kMinSlope)};
  }
  case LinkKind::Pump: {
    const auto& c = model_.pumps[ref.slot].curve;
    const double r = c.resistance();
    return {r * q * std::abs(q) - c.shutoff_head(), std::max(2.0 * r * aq, kMinSlope)};
  }
  case LinkKind::Valve: {
    if (state_.valve_status[ref.slot] == ValveStatus::Closed) return {kClosedSlope * q, kClosedSlope};
    const double m = resistance_[l];
    return {m * q * std::abs(q), std::max(2.0 * m * aq, kMinSlope)};
  }
  }
  return {0.0, 1.0};
}

double SteadySolver::leak_at(std::size_t node, double head) const {
  if (!leak_ || leak_->node != node) return 0.0;
  return leak_outflow(leak_->area_cm2, head - model_.node_elevation(node), opt_.discharge_coefficient);
}

double SteadySolver::residual_metric(std::span<const double> heads, std::span<const double> flows) const {
  std::vector<double> net(nj_, 0.0);
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (links_[l].to < nj_) net[links_[l].to] += flows[l];
    if (links_[l].from < nj_) net[links_[l].from] -= flows[l];
  }
  double mass = 0.0;
  for (std::size_t j = 0; j < nj_; ++j)
    mass = std::max(mass, std::abs(net[j] - demands_[j] - leak_at(j, heads[j])));
  double energy = 0.0;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (valve_active(l)) continue;
    if (links_[l].kind == LinkKind::Valve && state_.valve_status[links_[l].slot] == ValveStatus::Closed) continue;
    const double err = heads[links_[l].from] - heads[links_[l].to] - law(l, flows[l]).headloss;
    energy = std::max(energy, std::abs(err));
  }
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (!valve_active(l)) continue;
    const auto& v = model_.valves[links_[l].slot];
    energy = std::max(energy, std::abs(heads[links_[l].to] - valve_set_head(v, links_[l].to)));
  }
  return std::max(mass / opt_.mass_tolerance, energy / opt_.head_tolerance);
}

void SteadySolver::newton_step(std::vector<double>& heads, std::vector<double>& flows) {
  // Junctions downstream of an active PRV are held at the valve setting.
  std::vector<double> held(nj_, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (!valve_active(l)) continue;
    const auto to = links_[l].to;
    if (!std::isnan(held[to]))
      throw Error("SINGULAR_SYSTEM", "junction '" + model_.node_id(to) + "' is fed by two active PRVs");
    held[to] = valve_set_head(model_.valves[links_[l].slot], to);
  }
  std::vector<std::size_t> unknown(nj_, kFree);
  std::size_t nu = 0;
  for (std::size_t j = 0; j < nj_; ++j)
    if (std::isnan(held[j])) unknown[j] = nu++;

  auto fixed_head = [&](std::size_t node) {
    return node < nj_ ? held[node] : heads[node];
  };

  std::vector<double> conductance(links_.size(), 0.0);
  std::vector<double> offset(links_.size(), 0.0);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * links_.size() + nj_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nu));

  for (std::size_t l = 0; l < links_.size(); ++l) {
    const auto i = links_[l].from;
    const auto j = links_[l].to;
    if (valve_active(l)) {
      // Lagged: the upstream node sees last iteration's valve flow as a withdrawal.
      if (i < nj_ && unknown[i] != kFree) rhs[static_cast<Eigen::Index>(unknown[i])] -= flows[l];
      continue;
    }
    const auto lw = law(l, flows[l]);
    const double p = 1.0 / lw.slope;
    const double c = flows[l] - p * lw.headloss;
    conductance[l] = p;
    offset[l] = c;
    const bool iu = i < nj_ && unknown[i] != kFree;
    const bool ju = j < nj_ && unknown[j] != kFree;
    if (iu) {
      const auto ii = static_cast<Eigen::Index>(unknown[i]);
      triplets.emplace_back(ii, ii, p);
      rhs[ii] -= c;
      if (!ju) rhs[ii] += p * fixed_head(j);
    }
    if (ju) {
      const auto jj = static_cast<Eigen::Index>(unknown[j]);
      triplets.emplace_back(jj, jj, p);
      rhs[jj] += c;
      if (!iu) rhs[jj] += p * fixed_head(i);
    }
    if (iu && ju) {
      const auto ii = static_cast<Eigen::Index>(unknown[i]);
      const auto jj = static_cast<Eigen::Index>(unknown[j]);
      triplets.emplace_back(ii, jj, -p);
      triplets.emplace_back(jj, ii, -p);
    }
  }
  for (std::size_t n = 0; n < nj_; ++n) {
    if (unknown[n] == kFree) continue;
    const auto nn = static_cast<Eigen::Index>(unknown[n]);
    rhs[nn] -= demands_[n];
    if (leak_ && leak_->node == n && leak_->area_cm2 > 0.0) {
      const double elev = model_.node_elevation(n);
      const double pressure = heads[n] - elev;
      const double cq = opt_.discharge_coefficient * leak_->area_cm2 * 1e-4;
      if (pressure > kMinLeakPressure) {
        const double q0 = cq * std::sqrt(2.0 * kGravity * pressure);
        const double slope = cq * std::sqrt(kGravity / (2.0 * pressure));
        triplets.emplace_back(nn, nn, slope);
        rhs[nn] += -q0 + slope * heads[n];
      } else {
        // Secant through zero outflow at zero pressure.
        const double slope = cq * std::sqrt(2.0 * kGravity * kMinLeakPressure) / kMinLeakPressure;
        triplets.emplace_back(nn, nn, slope);
        rhs[nn] += slope * elev;
      }
    }
  }

  std::vector<double> next_heads = heads;
  if (nu > 0) {
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nu));
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    if (ldlt.info() != Eigen::Success)
      throw Error("SINGULAR_SYSTEM", "network equations could not be factored");
    const auto& d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(d.minCoeff() > 1e-14 * dmax))
      throw Error("SINGULAR_SYSTEM", "network equations are numerically singular");
    const Eigen::VectorXd x = ldlt.solve(rhs);
    for (std::size_t n = 0; n < nj_; ++n)
      if (unknown[n] != kFree) next_heads[n] = x[static_cast<Eigen::Index>(unknown[n])];
  }
  for (std::size_t n = 0; n < nj_; ++n)
    if (unknown[n] == kFree) next_heads[n] = held[n];

  std::vector<double> next_flows = flows;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (valve_active(l)) continue;
    next_flows[l] = offset[l] + conductance[l] * (next_heads[links_[l].from] - next_heads[links_[l].to]);
  }
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (!valve_active(l)) continue;
    const auto d = links_[l].to;
    double through = demands_[d] + leak_at(d, next_heads[d]);
    for (std::size_t m = 0; m < links_.size(); ++m) {
      if (m == l) continue;
      if (links_[m].from == d) through += next_flows[m];
      if (links_[m].to == d) through -= next_flows[m];
    }
    next_flows[l] = through;
  }
  heads = std::move(next_heads);
  flows = std::move(next_flows);
}

bool SteadySolver::update_valve_status() {
  bool changed = false;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (links_[l].kind != LinkKind::Valve) continue;
    const auto& v = model_.valves[links_[l].slot];
    auto& status = state_.valve_status[links_[l].slot];
    const double hu = state_.heads[links_[l].from];
    const double hd = state_.heads[links_[l].to];
    const double hset = valve_set_head(v, links_[l].to);
    const double q = state_.flows[l];
    ValveStatus next = status;
    switch (status) {
    case ValveStatus::Active:
      if (q < -kStatusFlowTol) next = ValveStatus::Closed;
      else if (hu < hset - kStatusHeadTol) next = ValveStatus::Open;
      break;
    case ValveStatus::Open:
      if (q < -kStatusFlowTol) next = ValveStatus::Closed;
      else if (hd > hset + kStatusHeadTol) next = ValveStatus::Active;
      break;
    case ValveStatus::Closed:
      if (hu >= hset + kStatusHeadTol && hd < hset - kStatusHeadTol) next = ValveStatus::Active;
      else if (hu < hset - kStatusHeadTol && hu > hd + kStatusHeadTol) next = ValveStatus::Open;
      break;
    }
    if (next != status) {
      status = next;
      changed = true;
    }
  }
  return changed;
}

HydraulicState SteadySolver::solve() {
  double metric = residual_metric(state_.heads, state_.flows);
  for (int iter = 1; iter <= opt_.max_iterations; ++iter) {
    state_.iterations = iter;
    auto heads = state_.heads;
    auto flows = state_.flows;
    newton_step(heads, flows);
    double next_metric = residual_metric(heads, flows);
    if (next_metric > metric && iter > 1) {
      for (std::size_t n = 0; n < nj_; ++n) heads[n] = 0.5 * (heads[n] + state_.heads[n]);
      for (std::size_t l = 0; l < flows.size(); ++l) flows[l] = 0.5 * (flows[l] + state_.flows[l]);
      next_metric = residual_metric(heads, flows);
    }
    state_.heads = std::move(heads);
    state_.flows = std::move(flows);
    metric = next_metric;
    if (metric <= 1.0) {
      if (!update_valve_status()) {
        state_.converged = true;
        break;
      }
      metric = residual_metric(state_.heads, state_.flows);
    }
  }

  state_.pressures.assign(nn_, 0.0);
  for (std::size_t n = 0; n < nn_; ++n) {
    if (model_.node_kind(n) != NodeKind::Reservoir)
      state_.pressures[n] = state_.heads[n] - model_.node_elevation(n);
  }
  for (std::size_t n = 0; n < nj_; ++n) state_.leak_flows[n] = leak_at(n, state_.heads[n]);
  return std::move(state_);
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace

double hazen_williams_headloss(double flow, double length, double diameter, double roughness) {
  const double k = kHwCoefficient * std::pow(roughness, -kHwExponent) * std::pow(diameter, -4.871) * length;
  return k * std::copysign(std::pow(std::abs(flow), kHwExponent), flow);
}

double leak_outflow(double area_cm2, double pressure_head, double discharge_coefficient) {
  if (area_cm2 <= 0.0 || pressure_head <= 0.0) return 0.0;
  return discharge_coefficient * area_cm2 * 1e-4 * std::sqrt(2.0 * kGravity * pressure_head);
}

void validate_leak(const NetworkModel& model, const LeakScenario& leak, std::size_t num_steps) {
  if (leak.node_index >= model.junctions.size())
    throw Error("BAD_LEAK", "leak node must be a junction");
  if (!(leak.area >= 0.0) || !std::isfinite(leak.area))
    throw Error("BAD_LEAK", "leak area must be finite and non-negative");
  if (leak.start_step + leak.duration_steps > num_steps)
    throw Error("BAD_LEAK", "leak extends beyond the simulation horizon");
}

HydraulicState solve_steady_state(const NetworkModel& model, std::span<const double> junction_demands,
                                  std::span<const double> tank_heads, std::optional<PointLeak> leak,
                                  const SolverOptions& options) {
  for (double d : junction_demands)
    if (!(d >= 0.0) || !std::isfinite(d)) throw Error("BAD_DEMAND", "demands must be finite and non-negative");
  return SteadySolver(model, junction_demands, tank_heads, leak, options).solve();
}

bool SimulationResult::all_converged() const {
  return std::all_of(states.begin(), states.end(), [](const HydraulicState& s) { return s.converged; });
}

std::size_t step_count(const NetworkModel& model) {
  return static_cast<std::size_t>(std::floor(model.duration / model.hydraulic_timestep)) + 1;
}

std::vector<double> initial_tank_levels(const NetworkModel& model) {
  std::vector<double> levels;
  levels.reserve(model.tanks.size());
  for (const auto& t : model.tanks) levels.push_back(t.init_level);
  return levels;
}

SimulationResult simulate_range(const NetworkModel& model, const DemandMatrix& demands,
                                std::optional<LeakScenario> leak, std::size_t first_step,
                                std::size_t end_step, std::span<const double> initial_levels,
                                const SolverOptions& options,
                                const std::function<bool(std::size_t, const HydraulicState&)>& keep_going) {
  if (end_step > demands.size())
    throw Error("DIM_MISMATCH", "demand series shorter than the simulated horizon");
  if (initial_levels.size() != model.tanks.size())
    throw Error("DIM_MISMATCH", "expected one initial level per tank");
  if (leak) validate_leak(model, *leak, demands.size());

  SimulationResult result;
  result.first_step = first_step;
  std::vector<double> levels(initial_levels.begin(), initial_levels.end());
  const std::size_t tank_base = model.junctions.size() + model.reservoirs.size();
  const double dt = model.hydraulic_timestep;

  for (std::size_t step = first_step; step < end_step; ++step) {
    std::vector<double> tank_heads(model.tanks.size());
    for (std::size_t t = 0; t < model.tanks.size(); ++t) tank_heads[t] = model.tanks[t].elevation + levels[t];

    std::optional<PointLeak> point;
    if (leak && leak->active_at(step) && leak->area > 0.0) point = PointLeak{leak->node_index, leak->area};

    HydraulicState state;
    try {
      state = solve_steady_state(model, demands[step], tank_heads, point, options);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
    }

    result.tank_levels.push_back(levels);
    result.times.push_back(static_cast<double>(step) * dt);

    for (std::size_t t = 0; t < model.tanks.size(); ++t) {
      const std::size_t node = tank_base + t;
      double inflow = 0.0;
      for (std::size_t l = 0; l < model.links().size(); ++l) {
        if (model.links()[l].to == node) inflow += state.flows[l];
        if (model.links()[l].from == node) inflow -= state.flows[l];
      }
      const auto& tank = model.tanks[t];
      double next = levels[t] + inflow * dt / tank.cross_section();
      if (next > tank.max_level) {
        next = tank.max_level;
        result.tank_events.push_back({step, t, true});
      } else if (next < tank.min_level) {
        next = tank.min_level;
        result.tank_events.push_back({step, t, false});
      }
      levels[t] = next;
    }
    result.states.push_back(std::move(state));
    if (keep_going && !keep_going(step, result.states.back())) break;
  }
  result.final_tank_levels = std::move(levels);
  return result;
}

SimulationResult run_eps(const NetworkModel& model, const DemandMatrix& demands,
                         std::optional<LeakScenario> leak, const SolverOptions& options) {
  const auto steps = step_count(model);
  if (demands.size() < steps)
    throw Error("DIM_MISMATCH", "demand series has " + std::to_string(demands.size()) + " steps, model needs " +
                                    std::to_string(steps));
  if (leak) validate_leak(model, *leak, steps);
  const auto levels = initial_tank_levels(model);
  return simulate_range(model, demands, leak, 0, steps, levels, options);
}

double max_mass_imbalance(const NetworkModel& model, const HydraulicState& state,
                          std::span<const double> junction_demands) {
  const std::size_t nj = model.junctions.size();
  std::vector<double> net(nj, 0.0);
  const auto& links = model.links();
  for (std::size_t l = 0; l < links.size(); ++l) {
    if (links[l].to < nj) net[links[l].to] += state.flows[l];
    if (links[l].from < nj) net[links[l].from] -= state.flows[l];
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < nj; ++j)
    worst = std::max(worst, std::abs(net[j] - junction_demands[j] - state.leak_flows[j]));
  return worst;
}

double max_pipe_energy_error(const NetworkModel& model, const HydraulicState& state) {
  double worst = 0.0;
  const auto& links = model.links();
  for (std::size_t l = 0; l < links.size(); ++l) {
    if (links[l].kind != LinkKind::Pipe) continue;
    const auto& p = model.pipes[links[l].slot];
    const double h = hazen_williams_headloss(state.flows[l], p.length, p.diameter, p.roughness);
    worst = std::max(worst, std::abs(state.heads[links[l].from] - state.heads[links[l].to] - h));
  }
  return worst;
}

std::string simulation_to_csv(const NetworkModel& model, const SimulationResult& result) {
  std::ostringstream out;
  out << "time_s";
  for (std::size_t n = 0; n < model.node_count(); ++n) out << ",head_" << model.node_id(n);
  for (std::size_t n = 0; n < model.node_count(); ++n) out << ",pressure_" << model.node_id(n);
  for (std::size_t l = 0; l < model.link_count(); ++l) out << ",flow_" << model.link_id(l);
  for (std::size_t n = 0; n < model.junctions.size(); ++n) out << ",leak_" << model.node_id(n);
  out << '\n';
  for (std::size_t k = 0; k < result.size(); ++k) {
    const auto& s = result.states[k];
    out << fmt(result.times[k]);
    for (double v : s.heads) out << ',' << fmt(v);
    for (double v : s.pressures) out << ',' << fmt(v);
    for (double v : s.flows) out << ',' << fmt(v);
    for (std::size_t n = 0; n < model.junctions.size(); ++n) out << ',' << fmt(s.leak_flows[n]);
    out << '\n';
  }
  return out.str();
}

} // namespace lspkit
