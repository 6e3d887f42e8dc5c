#include "lspkit/lsp_search.hpp"

#include "lspkit/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace lspkit {

namespace {

constexpr std::size_t kMaxOraclePairs = 10000;

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Does any audit grid point show a hidden leak above a detected one?
bool audit_monotone(const LeakOracle& oracle, const SearchSpace& space, std::size_t node, std::size_t start,
                    std::size_t points) {
  bool seen_detected = false;
  for (std::size_t k = 0; k < points; ++k) {
    const double alpha =
        space.area_min + (space.area_max - space.area_min) * static_cast<double>(k) / static_cast<double>(points - 1);
    const bool hit = oracle.detected(node, start, alpha);
    if (seen_detected && !hit) return false;
    seen_detected = seen_detected || hit;
  }
  return true;
}

std::string node_label(const NetworkModel& model, std::size_t node) { return model.node_id(node); }

} // namespace

void SearchSpace::validate(std::size_t horizon, std::size_t leak_duration) const {
  if (candidate_nodes.empty() || candidate_starts.empty())
    throw Error("EMPTY_SPACE", "search space has no candidate nodes or no candidate starts");
  if (!(area_min < area_max) || !(area_min > 0.0))
    throw Error("BAD_CONFIG", "area bounds need 0 < area_min < area_max");
  if (!(epsilon > 0.0)) throw Error("BAD_CONFIG", "area tolerance must be positive");
  if (horizon == 0) return;
  const std::size_t last = *std::max_element(candidate_starts.begin(), candidate_starts.end());
  if (last + window >= horizon || last + leak_duration > horizon)
    throw Error("RANGE", "leak starting at step " + std::to_string(last) + " runs past the " +
                             std::to_string(horizon) + "-step horizon");
}

LeakOracle::LeakOracle(const SearchContext& ctx, std::size_t window) : ctx_(ctx), window_(window) {
  if (ctx.baseline.measurements.sensors != ctx.detector.sensors)
    throw Error("DIM_MISMATCH", "detector sensors differ from the model's sensors");
}

bool LeakOracle::detected(std::size_t node, std::size_t start, double area) const {
  ++evaluations_;
  const LeakScenario leak{node, area, start, ctx_.leak_duration_steps};
  bool alarm = false;
  measure_window(ctx_.model, ctx_.demands, ctx_.baseline, leak, start, start + window_ + 1, ctx_.solver,
                 [&](std::size_t, const Eigen::VectorXd& row) {
                   alarm = detect(ctx_.detector, row);
                   return !alarm;
                 });
  return alarm;
}

AreaResult max_undetected_area(const LeakOracle& oracle, const SearchSpace& space, std::size_t node,
                               std::size_t start, std::optional<double> incumbent) {
  AreaResult result;
  double lo = space.area_min;
  if (incumbent && *incumbent > space.area_min) {
    const double probe = std::min(*incumbent, space.area_max);
    if (oracle.detected(node, start, probe)) {
      result.shortcut = true;
      return result;
    }
    lo = probe;
  } else if (oracle.detected(node, start, space.area_min)) {
    return result;
  }
  if (!oracle.detected(node, start, space.area_max)) {
    result.area = space.area_max;
    result.unbounded = true;
    return result;
  }
  double hi = space.area_max;
  while (hi - lo > space.epsilon) {
    const double mid = 0.5 * (lo + hi);
    if (oracle.detected(node, start, mid)) hi = mid;
    else lo = mid;
  }
  result.area = lo;
  const auto points = oracle.context().audit_points;
  if (points >= 2) result.nonmonotone = !audit_monotone(oracle, space, node, start, points);
  return result;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
prune_detection_matrix(const std::vector<std::vector<bool>>& detected) {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  if (detected.empty()) return {rows, cols};
  const std::size_t ncols = detected.front().size();
  for (std::size_t r = 0; r < detected.size(); ++r)
    if (!std::all_of(detected[r].begin(), detected[r].end(), [](bool b) { return b; })) rows.push_back(r);
  for (std::size_t c = 0; c < ncols; ++c) {
    bool all = true;
    for (const auto& row : detected) all = all && row[c];
    if (!all) cols.push_back(c);
  }
  return {rows, cols};
}

SearchOutcome bisection_search(const SearchSpace& space, const SearchContext& ctx, bool pruning) {
  space.validate(ctx.demands.num_steps(), ctx.leak_duration_steps);
  LeakOracle oracle(ctx, space.window);
  SearchOutcome out;
  out.method = pruning ? "bisection" : "bisection-unpruned";
  out.node_area_kind = AreaBound::LowerBound;

  std::vector<std::size_t> nodes = sorted_unique(space.candidate_nodes);
  std::vector<std::size_t> starts = sorted_unique(space.candidate_starts);
  std::map<std::size_t, double> node_best;
  for (auto n : nodes) node_best[n] = 0.0;

  std::size_t iteration = 0;
  auto evaluate = [&](double alpha) {
    std::vector<std::vector<bool>> hit(nodes.size(), std::vector<bool>(starts.size()));
    std::vector<char> flat(nodes.size() * starts.size());
    parallel_for(flat.size(), ctx.threads, [&](std::size_t k) {
      flat[k] = oracle.detected(nodes[k / starts.size()], starts[k % starts.size()], alpha) ? 1 : 0;
    });
    for (std::size_t k = 0; k < flat.size(); ++k) hit[k / starts.size()][k % starts.size()] = flat[k] != 0;
    out.detections.push_back({iteration, alpha, nodes, starts, hit});
    return hit;
  };
  // Smallest hidden (node, start) of a matrix, if any.
  auto first_hidden = [&](const std::vector<std::vector<bool>>& hit) -> std::optional<std::pair<std::size_t, std::size_t>> {
    for (std::size_t r = 0; r < nodes.size(); ++r)
      for (std::size_t c = 0; c < starts.size(); ++c)
        if (!hit[r][c]) return std::make_pair(nodes[r], starts[c]);
    return std::nullopt;
  };
  auto count_hidden = [](const std::vector<std::vector<bool>>& hit) {
    std::size_t n = 0;
    for (const auto& row : hit) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), false));
    return n;
  };
  auto record_hidden = [&](const std::vector<std::vector<bool>>& hit, double alpha) {
    for (std::size_t r = 0; r < nodes.size(); ++r)
      if (std::find(hit[r].begin(), hit[r].end(), false) != hit[r].end())
        node_best[nodes[r]] = std::max(node_best[nodes[r]], alpha);
  };
  auto apply_pruning = [&](const std::vector<std::vector<bool>>& hit) {
    if (!pruning) return;
    auto [keep_rows, keep_cols] = prune_detection_matrix(hit);
    std::vector<std::size_t> next_nodes, next_starts;
    for (auto r : keep_rows) next_nodes.push_back(nodes[r]);
    for (auto c : keep_cols) next_starts.push_back(starts[c]);
    nodes = std::move(next_nodes);
    starts = std::move(next_starts);
  };
  auto finish = [&](std::size_t node, std::size_t start, double area) {
    out.lsp_node = node;
    out.best_start = start;
    out.max_undetected_area = area;
    out.evaluations = oracle.evaluations();
    for (const auto& [n, a] : node_best) out.node_areas.emplace_back(n, a);
    return out;
  };

  double lo = space.area_min;
  double hi = space.area_max;
  auto hit = evaluate(lo);
  auto hidden = first_hidden(hit);
  out.trace.push_back({iteration, lo, lo, hi, nodes.size(), starts.size(), count_hidden(hit),
                       hidden ? hidden->first : 0, hidden ? hidden->second : 0});
  if (!hidden) return finish(nodes.front(), starts.front(), 0.0);
  record_hidden(hit, lo);
  auto best = *hidden;
  apply_pruning(hit);

  ++iteration;
  hit = evaluate(hi);
  hidden = first_hidden(hit);
  out.trace.push_back({iteration, hi, lo, hi, nodes.size(), starts.size(), count_hidden(hit),
                       hidden ? hidden->first : best.first, hidden ? hidden->second : best.second});
  if (hidden) {
    record_hidden(hit, hi);
    out.unbounded = true;
    out.warnings.push_back("UNBOUNDED: a leak of area_max stays hidden");
    return finish(hidden->first, hidden->second, hi);
  }

  while (hi - lo > space.epsilon) {
    ++iteration;
    const double mid = 0.5 * (lo + hi);
    hit = evaluate(mid);
    hidden = first_hidden(hit);
    if (hidden) {
      lo = mid;
      best = *hidden;
      record_hidden(hit, mid);
      apply_pruning(hit);
    } else {
      hi = mid;
    }
    out.trace.push_back({iteration, mid, lo, hi, nodes.size(), starts.size(), count_hidden(hit), best.first,
                         best.second});
  }
  return finish(best.first, best.second, lo);
}

SearchOutcome brute_force_lsp(const SearchSpace& space, const SearchContext& ctx) {
  space.validate(ctx.demands.num_steps(), ctx.leak_duration_steps);
  const auto nodes = sorted_unique(space.candidate_nodes);
  const auto starts = sorted_unique(space.candidate_starts);
  const std::size_t pairs = nodes.size() * starts.size();
  if (pairs > kMaxOraclePairs)
    throw Error("SPACE_TOO_LARGE", std::to_string(pairs) + " pairs exceed the oracle limit of " +
                                       std::to_string(kMaxOraclePairs));
  LeakOracle oracle(ctx, space.window);
  std::vector<AreaResult> areas(pairs);
  parallel_for(pairs, ctx.threads, [&](std::size_t k) {
    areas[k] = max_undetected_area(oracle, space, nodes[k / starts.size()], starts[k % starts.size()]);
  });

  SearchOutcome out;
  out.method = "oracle";
  out.node_area_kind = AreaBound::Exact;
  std::size_t best = 0;
  std::size_t nonmonotone = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    if (areas[k].area > areas[best].area) best = k;
    nonmonotone += areas[k].nonmonotone ? 1 : 0;
  }
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    double node_max = 0.0;
    for (std::size_t c = 0; c < starts.size(); ++c) node_max = std::max(node_max, areas[r * starts.size() + c].area);
    out.node_areas.emplace_back(nodes[r], node_max);
  }
  out.lsp_node = nodes[best / starts.size()];
  out.best_start = starts[best % starts.size()];
  out.max_undetected_area = areas[best].area;
  out.unbounded = areas[best].unbounded;
  out.evaluations = oracle.evaluations();
  if (out.unbounded) out.warnings.push_back("UNBOUNDED: a leak of area_max stays hidden");
  if (nonmonotone > 0)
    out.warnings.push_back("NONMONOTONE: detection is not monotone in the leak area at " +
                           std::to_string(nonmonotone) + " pairs");
  out.trace.push_back({0, out.max_undetected_area, out.max_undetected_area, out.max_undetected_area, nodes.size(),
                       starts.size(), pairs, out.lsp_node, out.best_start});
  return out;
}

void GaConfig::validate() const {
  if (population < 2) throw Error("BAD_CONFIG", "GA population must be at least 2");
  if (generations < 1) throw Error("BAD_CONFIG", "GA needs at least one generation");
  if (tournament_size < 1) throw Error("BAD_CONFIG", "tournament size must be at least 1");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw Error("BAD_CONFIG", "mutation rate must lie in [0, 1]");
  if (!(mutation_sigma >= 0.0)) throw Error("BAD_CONFIG", "mutation sigma must be non-negative");
}

namespace {

struct Individual {
  std::size_t node = 0;  // candidate node (model index)
  std::size_t start = 0; // index into the start list
  EmbeddingPoint coords = EmbeddingPoint::Zero(); // embedding of `node` (Spectral only)
};

// Floor on the population std, as a share of the candidate nodes' std, so that a
// collapsed population keeps mutating.
constexpr double kMinSpreadShare = 0.5;

} // namespace

SearchOutcome genetic_search(const SearchSpace& space, const SearchContext& ctx, const GaConfig& config) {
  space.validate(ctx.demands.num_steps(), ctx.leak_duration_steps);
  config.validate();
  const auto nodes = sorted_unique(space.candidate_nodes);
  const auto starts = sorted_unique(space.candidate_starts);
  const bool spectral = config.variant == GaVariant::Spectral;
  LeakOracle oracle(ctx, space.window);

  NodeEmbedding embedding;
  EmbeddingPoint spread_floor = EmbeddingPoint::Zero();
  if (spectral) {
    embedding = spectral_embedding(ctx.model);
    EmbeddingPoint mean = EmbeddingPoint::Zero();
    for (auto n : nodes) mean += embedding.point(n);
    mean /= static_cast<double>(nodes.size());
    for (auto n : nodes) spread_floor += (embedding.point(n) - mean).cwiseAbs2();
    spread_floor = kMinSpreadShare * (spread_floor / static_cast<double>(nodes.size())).cwiseSqrt();
  }

  std::mt19937_64 rng(config.seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  auto make = [&](std::size_t node, std::size_t start) {
    Individual ind{node, start, EmbeddingPoint::Zero()};
    if (spectral) ind.coords = embedding.point(node);
    return ind;
  };

  std::map<std::pair<std::size_t, std::size_t>, AreaResult> cache;
  double incumbent = 0.0;
  std::pair<std::size_t, std::size_t> best{nodes.front(), starts.front()};
  bool have_best = false;
  auto better = [](double a, std::pair<std::size_t, std::size_t> pa, double b, std::pair<std::size_t, std::size_t> pb) {
    return a > b || (a == b && pa < pb);
  };

  // Evaluates uncached pairs in parallel with the incumbent frozen, then merges in order.
  auto evaluate = [&](const std::vector<Individual>& pop) {
    std::vector<std::pair<std::size_t, std::size_t>> todo;
    for (const auto& ind : pop) {
      const std::pair key{ind.node, starts[ind.start]};
      if (!cache.count(key) && std::find(todo.begin(), todo.end(), key) == todo.end()) todo.push_back(key);
    }
    const std::optional<double> frozen = incumbent > 0.0 ? std::optional<double>(incumbent) : std::nullopt;
    std::vector<AreaResult> results(todo.size());
    parallel_for(todo.size(), ctx.threads, [&](std::size_t k) {
      results[k] = max_undetected_area(oracle, space, todo[k].first, todo[k].second, frozen);
    });
    for (std::size_t k = 0; k < todo.size(); ++k) cache[todo[k]] = results[k];
    std::vector<double> fitness;
    for (const auto& ind : pop) {
      const std::pair key{ind.node, starts[ind.start]};
      const double f = cache.at(key).area;
      fitness.push_back(f);
      if (!have_best || better(f, key, incumbent, best)) {
        incumbent = f;
        best = key;
        have_best = true;
      }
    }
    return fitness;
  };

  std::vector<Individual> pop;
  for (std::size_t i = 0; i < config.population; ++i) {
    const auto node = nodes[pick(nodes.size())];
    pop.push_back(make(node, pick(starts.size())));
  }

  SearchOutcome out;
  out.method = spectral ? "ga-spectral" : "ga-basic";
  out.node_area_kind = AreaBound::Sampled;

  for (std::size_t gen = 0;; ++gen) {
    const auto fitness = evaluate(pop);
    out.trace.push_back({gen, incumbent, 0.0, incumbent, cache.size(), pop.size(), 0, best.first, best.second});
    if (gen + 1 == config.generations) break;

    std::size_t elite = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (better(fitness[i], {pop[i].node, starts[pop[i].start]}, fitness[elite],
                 {pop[elite].node, starts[pop[elite].start]}))
        elite = i;
    auto tournament = [&]() {
      std::size_t winner = pick(pop.size());
      for (std::size_t t = 1; t < config.tournament_size; ++t) {
        const std::size_t c = pick(pop.size());
        if (fitness[c] > fitness[winner] || (fitness[c] == fitness[winner] && c < winner)) winner = c;
      }
      return winner;
    };

    EmbeddingPoint sigma = EmbeddingPoint::Zero();
    if (spectral) {
      EmbeddingPoint mean = EmbeddingPoint::Zero();
      for (const auto& ind : pop) mean += ind.coords;
      mean /= static_cast<double>(pop.size());
      for (const auto& ind : pop) sigma += (ind.coords - mean).cwiseAbs2();
      sigma = (sigma / static_cast<double>(pop.size())).cwiseSqrt();
      sigma = (config.mutation_sigma * sigma).cwiseMax(config.mutation_sigma * spread_floor);
    }

    std::vector<Individual> next{pop[elite]};
    while (next.size() < config.population) {
      const auto& a = pop[tournament()];
      const auto& b = pop[tournament()];
      std::size_t start = coin(0.5) ? a.start : b.start;
      if (coin(config.mutation_rate)) start = pick(starts.size());
      if (!spectral) {
        std::size_t node = coin(0.5) ? a.node : b.node;
        if (coin(config.mutation_rate)) node = nodes[pick(nodes.size())];
        next.push_back(make(node, start));
        continue;
      }
      EmbeddingPoint child;
      for (Eigen::Index d = 0; d < 4; ++d) {
        const double lo = std::min(a.coords[d], b.coords[d]);
        const double hi = std::max(a.coords[d], b.coords[d]);
        const double reach = 0.5 * (hi - lo);
        child[d] = lo - reach == hi + reach ? lo
                                            : std::uniform_real_distribution<double>(lo - reach, hi + reach)(rng);
        if (coin(config.mutation_rate) && sigma[d] > 0.0)
          child[d] += std::normal_distribution<double>(0.0, sigma[d])(rng);
      }
      next.push_back(make(nearest_node(embedding, nodes, child), start));
    }
    pop = std::move(next);
  }

  const auto& winner = cache.at(best);
  out.lsp_node = best.first;
  out.best_start = best.second;
  out.max_undetected_area = winner.area;
  out.unbounded = winner.unbounded;
  out.evaluations = oracle.evaluations();
  if (out.unbounded) out.warnings.push_back("UNBOUNDED: a leak of area_max stays hidden");
  std::map<std::size_t, double> per_node;
  for (const auto& [key, res] : cache) per_node[key.first] = std::max(per_node[key.first], res.area);
  for (const auto& [n, a] : per_node) out.node_areas.emplace_back(n, a);
  return out;
}

std::string outcome_to_json(const NetworkModel& model, const SearchOutcome& outcome) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : outcome.trace)
    trace.push_back({{"iteration", t.iteration},
                     {"alpha", t.alpha},
                     {"lo", t.lo},
                     {"hi", t.hi},
                     {"surviving_nodes", t.surviving_nodes},
                     {"surviving_starts", t.surviving_starts},
                     {"undetected_pairs", t.undetected_pairs},
                     {"best_node", node_label(model, t.best_node)},
                     {"best_start", t.best_start}});
  nlohmann::json doc = {
      {"method", outcome.method},
      {"lsp_node", node_label(model, outcome.lsp_node)},
      {"lsp_node_index", outcome.lsp_node},
      {"best_start", outcome.best_start},
      {"max_undetected_area_cm2", outcome.max_undetected_area},
      {"unbounded", outcome.unbounded},
      {"evaluations", outcome.evaluations},
      {"warnings", outcome.warnings},
      {"trace", trace},
  };
  return doc.dump(2) + "\n";
}

std::string trace_to_csv(const NetworkModel& model, const SearchOutcome& outcome) {
  std::ostringstream out;
  out << "iteration,alpha,lo,hi,surviving_nodes,surviving_starts,undetected_pairs,best_node,best_start\n";
  for (const auto& t : outcome.trace)
    out << t.iteration << ',' << fmt(t.alpha) << ',' << fmt(t.lo) << ',' << fmt(t.hi) << ',' << t.surviving_nodes
        << ',' << t.surviving_starts << ',' << t.undetected_pairs << ',' << node_label(model, t.best_node) << ','
        << t.best_start << '\n';
  return out.str();
}

std::string node_areas_to_csv(const NetworkModel& model, const SearchOutcome& outcome) {
  const char* kind = outcome.node_area_kind == AreaBound::Exact        ? "exact"
                     : outcome.node_area_kind == AreaBound::LowerBound ? "lower_bound"
                                                                       : "sampled";
  std::ostringstream out;
  out << "node,index,x,y,max_undetected_area_cm2,kind\n";
  for (const auto& [node, area] : outcome.node_areas) {
    const auto& id = model.node_id(node);
    auto it = model.coordinates.find(id);
    out << id << ',' << node << ',' << (it != model.coordinates.end() ? fmt(it->second.x) : "") << ','
        << (it != model.coordinates.end() ? fmt(it->second.y) : "") << ',' << fmt(area) << ',' << kind << '\n';
  }
  return out.str();
}

std::string detections_to_csv(const NetworkModel& model, const SearchOutcome& outcome) {
  std::ostringstream out;
  out << "iteration,alpha,node,start,detected\n";
  for (const auto& snap : outcome.detections)
    for (std::size_t r = 0; r < snap.nodes.size(); ++r)
      for (std::size_t c = 0; c < snap.starts.size(); ++c)
        out << snap.iteration << ',' << fmt(snap.alpha) << ',' << node_label(model, snap.nodes[r]) << ','
            << snap.starts[c] << ',' << (snap.detected[r][c] ? 1 : 0) << '\n';
  return out.str();
}

} // namespace lspkit
