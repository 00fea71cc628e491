#include "dsnet/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dsnet {

std::string_view to_string(WeightStrategy s) {
  switch (s) {
    case WeightStrategy::NoWeights: return "no-weights";
    case WeightStrategy::EdgeThroughput: return "edge";
    case WeightStrategy::VertexEvent: return "vertex-event";
    case WeightStrategy::VertexThroughput: return "vertex-throughput";
    case WeightStrategy::VertexPlusEdge: return "vertex+edge";
  }
  return "?";
}

WeightStrategy parse_weight_strategy(std::string_view t) {
  if (t == "no-weights" || t == "none") return WeightStrategy::NoWeights;
  if (t == "edge" || t == "edge-throughput") return WeightStrategy::EdgeThroughput;
  if (t == "vertex-event") return WeightStrategy::VertexEvent;
  if (t == "vertex-throughput") return WeightStrategy::VertexThroughput;
  if (t == "vertex+edge" || t == "vertex-plus-edge") return WeightStrategy::VertexPlusEdge;
  throw ConfigError("unknown partition strategy '" + std::string(t) + "'");
}

std::vector<std::int64_t> partition_weights(const std::vector<std::uint32_t>& assignment,
                                            const std::vector<std::int64_t>& weights, std::size_t k) {
  std::vector<std::int64_t> w(k, 0);
  for (std::size_t v = 0; v < assignment.size(); ++v) w[assignment[v]] += weights.empty() ? 1 : weights[v];
  return w;
}

double compute_imbalance(const std::vector<std::uint32_t>& assignment, const std::vector<std::int64_t>& weights,
                         std::size_t k) {
  const auto w = partition_weights(assignment, weights, k);
  const std::int64_t total = std::accumulate(w.begin(), w.end(), std::int64_t{0});
  if (total == 0) return 1.0;
  const double mean = static_cast<double>(total) / static_cast<double>(k);
  return static_cast<double>(*std::max_element(w.begin(), w.end())) / mean;
}

std::int64_t compute_cut_weight(const Topology& topo, const std::vector<std::uint32_t>& assignment,
                                const std::vector<std::int64_t>& edge_weights) {
  std::int64_t cut = 0;
  const auto& links = topo.directed_links();
  for (std::size_t i = 0; i < links.size(); i += 2)
    if (assignment[links[i].src] != assignment[links[i].dst]) cut += edge_weights.empty() ? 1 : edge_weights[i / 2];
  return cut;
}

std::vector<std::int64_t> derive_vertex_event_weights(const std::vector<std::uint64_t>& trace,
                                                      std::size_t node_count) {
  if (trace.empty())
    throw ConfigError("vertex-event weights need a profiling trace; produce one with `run --profile` first");
  if (trace.size() != node_count)
    throw ConfigError("profiling trace covers " + std::to_string(trace.size()) + " nodes but the topology has " +
                      std::to_string(node_count));
  return {trace.begin(), trace.end()};
}

std::vector<std::uint64_t> load_event_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open profiling trace " + path.string() + "; produce one with `run --profile` first");
  std::vector<std::uint64_t> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream is(line);
    std::uint64_t node = 0, events = 0;
    char comma = 0;
    if (!(is >> node >> comma >> events) || comma != ',') throw ParseError("bad trace line '" + line + "'");
    if (node != out.size()) throw ParseError("trace lines must be in node order");
    out.push_back(events);
  }
  return out;
}

void write_event_trace(const std::vector<std::uint64_t>& trace, std::ostream& out) {
  out << "node,events\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
}

namespace {

template <class Visit>
void walk_flows(const std::vector<FlowSpec>& flows, const RoutingTable& routes, const Topology& topo, Visit visit) {
  for (const FlowSpec& f : flows) {
    NodeId at = f.src;
    visit(at, std::nullopt, f.rate_pps);
    while (at != f.dst) {
      const auto port = routes.egress(at, f.dst);
      DSNET_CHECK(port.has_value(), "route walk left the table");
      const Link* l = topo.egress_link(at, *port);
      // Directed links come in pairs; the pair index is the link index.
      const std::size_t li = static_cast<std::size_t>(l - topo.directed_links().data()) / 2;
      at = l->dst;
      visit(at, li, f.rate_pps);
    }
  }
}

std::vector<std::int64_t> round_all(const std::vector<double>& v) {
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::llround(v[i]);
  return out;
}

std::vector<std::vector<std::pair<NodeId, std::size_t>>> neighbours(const Topology& topo) {
  std::vector<std::vector<std::pair<NodeId, std::size_t>>> nb(topo.node_count());
  const auto& links = topo.directed_links();
  for (NodeId v = 0; v < topo.node_count(); ++v)
    for (std::size_t li : topo.out_links(v)) nb[v].push_back({links[li].dst, li / 2});
  return nb;
}

std::vector<int> hop_distances(const std::vector<std::vector<std::pair<NodeId, std::size_t>>>& nb, NodeId from) {
  std::vector<int> d(nb.size(), -1);
  std::deque<NodeId> q{from};
  d[from] = 0;
  while (!q.empty()) {
    const NodeId v = q.front();
    q.pop_front();
    for (auto [w, li] : nb[v])
      if (d[w] < 0) {
        d[w] = d[v] + 1;
        q.push_back(w);
      }
  }
  return d;
}

void finish_plan(PartitionPlan& plan, const Topology& topo) {
  plan.imbalance = compute_imbalance(plan.assignment, plan.vertex_weights, plan.k);
  plan.cut_weight = compute_cut_weight(topo, plan.assignment, plan.edge_weights);
  plan.degraded = plan.imbalance > 1.0 + plan.epsilon + 1e-12;
}

// Moves nodes from heavier to lighter partitions while that lowers the sum
// of squared partition weights. Boundary moves only when `boundary_only`.
void rebalance(std::vector<std::uint32_t>& part, const std::vector<std::int64_t>& w, std::size_t k,
               const std::vector<std::vector<std::pair<NodeId, std::size_t>>>& nb, bool boundary_only) {
  auto load = partition_weights(part, w, k);
  std::vector<std::size_t> count(k, 0);
  for (auto p : part) ++count[p];
  const std::size_t max_moves = part.size() * k + 16;
  for (std::size_t moves = 0; moves < max_moves; ++moves) {
    std::int64_t best_gain = 0;
    NodeId best_v = 0;
    std::uint32_t best_to = 0;
    for (NodeId v = 0; v < part.size(); ++v) {
      const std::uint32_t from = part[v];
      if (count[from] <= 1 || w[v] <= 0) continue;
      auto consider = [&](std::uint32_t to) {
        if (to == from) return;
        // Reduction of sum of squares: 2*w*(load_from - load_to - w).
        const std::int64_t gain = load[from] - load[to] - w[v];
        if (gain > best_gain) {
          best_gain = gain;
          best_v = v;
          best_to = to;
        }
      };
      if (boundary_only) {
        for (auto [u, li] : nb[v]) consider(part[u]);
      } else {
        for (std::uint32_t to = 0; to < k; ++to) consider(to);
      }
    }
    if (best_gain <= 0) break;
    load[part[best_v]] -= w[best_v];
    --count[part[best_v]];
    part[best_v] = best_to;
    load[best_to] += w[best_v];
    ++count[best_to];
  }
}

std::vector<std::uint32_t> lpt_assignment(const std::vector<std::int64_t>& w, std::size_t k) {
  std::vector<NodeId> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return w[a] > w[b]; });
  std::vector<std::int64_t> load(k, 0);
  std::vector<std::size_t> count(k, 0);
  std::vector<std::uint32_t> part(w.size(), 0);
  for (NodeId v : order) {
    std::uint32_t best = 0;
    for (std::uint32_t p = 1; p < k; ++p)
      if (std::pair(load[p], count[p]) < std::pair(load[best], count[best])) best = p;
    part[v] = best;
    load[best] += w[v];
    ++count[best];
  }
  return part;
}

}  // namespace

std::vector<std::int64_t> derive_vertex_throughput_weights(const std::vector<FlowSpec>& flows,
                                                           const RoutingTable& routes, const Topology& topo) {
  std::vector<double> acc(topo.node_count(), 0.0);
  walk_flows(flows, routes, topo, [&](NodeId n, std::optional<std::size_t>, double rate) { acc[n] += rate; });
  return round_all(acc);
}

std::vector<std::int64_t> derive_edge_throughput_weights(const std::vector<FlowSpec>& flows,
                                                         const RoutingTable& routes, const Topology& topo) {
  std::vector<double> acc(topo.link_count(), 0.0);
  walk_flows(flows, routes, topo, [&](NodeId, std::optional<std::size_t> li, double rate) {
    if (li) acc[*li] += rate;
  });
  return round_all(acc);
}

PartitionPlan partition_balanced(const Topology& topo, const std::vector<std::int64_t>& vertex_weights,
                                 std::size_t k, double epsilon) {
  const std::size_t n = topo.node_count();
  if (k == 0) throw ConfigError("partition count must be at least 1");
  if (k > n)
    throw ConfigError("cannot split " + std::to_string(n) + " nodes into " + std::to_string(k) + " partitions");
  PartitionPlan plan;
  plan.k = k;
  plan.epsilon = epsilon;
  plan.vertex_weights = vertex_weights.empty() ? std::vector<std::int64_t>(n, 1) : vertex_weights;
  if (plan.vertex_weights.size() != n) throw ConfigError("vertex weight vector does not match the topology");
  for (auto w : plan.vertex_weights)
    if (w < 0) throw ConfigError("vertex weights must be non-negative");
  const auto& w = plan.vertex_weights;
  plan.assignment.assign(n, 0);
  if (k == 1) {
    finish_plan(plan, topo);
    return plan;
  }

  const auto nb = neighbours(topo);
  // Farthest-point seeds: start from the heaviest node, then repeatedly
  // the node farthest (in hops) from every chosen seed.
  std::vector<NodeId> seeds;
  NodeId first = 0;
  for (NodeId v = 1; v < n; ++v)
    if (w[v] > w[first]) first = v;
  seeds.push_back(first);
  std::vector<int> nearest = hop_distances(nb, first);
  while (seeds.size() < k) {
    NodeId pick = 0;
    bool found = false;
    for (NodeId v = 0; v < n; ++v) {
      if (nearest[v] == 0) continue;
      if (!found || nearest[v] > nearest[pick] || (nearest[v] == nearest[pick] && w[v] > w[pick])) {
        pick = v;
        found = true;
      }
    }
    seeds.push_back(pick);
    const auto d = hop_distances(nb, pick);
    for (NodeId v = 0; v < n; ++v) nearest[v] = std::min(nearest[v], d[v]);
  }

  constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> part(n, kUnassigned);
  std::vector<std::deque<NodeId>> frontier(k);
  std::vector<std::int64_t> load(k, 0);
  std::vector<std::size_t> count(k, 0);
  auto assign = [&](NodeId v, std::uint32_t p) {
    part[v] = p;
    load[p] += w[v];
    ++count[p];
    for (auto [u, li] : nb[v])
      if (part[u] == kUnassigned) frontier[p].push_back(u);
  };
  for (std::uint32_t p = 0; p < k; ++p) assign(seeds[p], p);
  std::size_t assigned = k;
  while (assigned < n) {
    std::optional<std::uint32_t> grow;
    for (std::uint32_t p = 0; p < k; ++p) {
      while (!frontier[p].empty() && part[frontier[p].front()] != kUnassigned) frontier[p].pop_front();
      if (frontier[p].empty()) continue;
      if (!grow || std::pair(load[p], count[p]) < std::pair(load[*grow], count[*grow])) grow = p;
    }
    DSNET_CHECK(grow.has_value(), "region growing stalled on a connected graph");
    const NodeId v = frontier[*grow].front();
    frontier[*grow].pop_front();
    assign(v, *grow);
    ++assigned;
  }

  rebalance(part, w, k, nb, true);
  plan.assignment = part;
  finish_plan(plan, topo);
  if (plan.degraded) {
    // Locality gave up too much balance; fall back to longest-processing-time
    // packing if that meets the target.
    auto packed = lpt_assignment(w, k);
    rebalance(packed, w, k, nb, false);
    if (compute_imbalance(packed, w, k) < plan.imbalance) {
      plan.assignment = std::move(packed);
      finish_plan(plan, topo);
    }
  }
  return plan;
}

PartitionPlan partition_min_edgecut(const Topology& topo, const std::vector<std::int64_t>& vertex_weights,
                                    const std::vector<std::int64_t>& edge_weights, std::size_t k, double epsilon) {
  PartitionPlan plan = partition_balanced(topo, vertex_weights, k, epsilon);
  plan.edge_weights = edge_weights.empty() ? std::vector<std::int64_t>(topo.link_count(), 1) : edge_weights;
  if (plan.edge_weights.size() != topo.link_count()) throw ConfigError("edge weight vector does not match the topology");
  if (k == 1) {
    finish_plan(plan, topo);
    return plan;
  }
  const std::size_t n = topo.node_count();
  const auto nb = neighbours(topo);
  const auto& vw = plan.vertex_weights;
  const auto& ew = plan.edge_weights;
  auto& part = plan.assignment;
  auto load = partition_weights(part, vw, k);
  std::vector<std::size_t> count(k, 0);
  for (auto p : part) ++count[p];
  const std::int64_t total = std::accumulate(load.begin(), load.end(), std::int64_t{0});
  const double mean = static_cast<double>(total) / static_cast<double>(k);
  const std::int64_t start_max = *std::max_element(load.begin(), load.end());
  const auto cap = std::max<std::int64_t>(start_max, static_cast<std::int64_t>(std::floor((1.0 + epsilon) * mean)));

  // Connection weight of v to partition p.
  auto link_to = [&](NodeId v, std::uint32_t p) {
    std::int64_t s = 0;
    for (auto [u, li] : nb[v])
      if (part[u] == p) s += ew[li];
    return s;
  };
  auto edge_between = [&](NodeId a, NodeId b) {
    std::int64_t s = 0;
    for (auto [u, li] : nb[a])
      if (u == b) s += ew[li];
    return s;
  };

  for (int pass = 0; pass < 64; ++pass) {
    bool improved = false;
    // Single-node moves with positive gain that respect the balance cap.
    for (NodeId v = 0; v < n; ++v) {
      const std::uint32_t from = part[v];
      if (count[from] <= 1) continue;
      const std::int64_t internal = link_to(v, from);
      std::int64_t best_gain = 0;
      std::uint32_t best_to = from;
      for (auto [u, li] : nb[v]) {
        const std::uint32_t to = part[u];
        if (to == from || load[to] + vw[v] > cap) continue;
        const std::int64_t gain = link_to(v, to) - internal;
        if (gain > best_gain || (gain == best_gain && gain > 0 && to < best_to)) {
          best_gain = gain;
          best_to = to;
        }
      }
      if (best_gain > 0) {
        load[from] -= vw[v];
        --count[from];
        part[v] = best_to;
        load[best_to] += vw[v];
        ++count[best_to];
        improved = true;
      }
    }
    // Kernighan-Lin pair swaps across cut edges.
    for (NodeId a = 0; a < n; ++a) {
      for (auto [b, li] : nb[a]) {
        const std::uint32_t pa = part[a], pb = part[b];
        if (pa == pb) continue;
        const std::int64_t ga = link_to(a, pb) - link_to(a, pa);
        const std::int64_t gb = link_to(b, pa) - link_to(b, pb);
        const std::int64_t gain = ga + gb - 2 * edge_between(a, b);
        if (gain <= 0) continue;
        const std::int64_t new_a = load[pa] - vw[a] + vw[b];
        const std::int64_t new_b = load[pb] - vw[b] + vw[a];
        if (new_a > cap || new_b > cap) continue;
        load[pa] = new_a;
        load[pb] = new_b;
        part[a] = pb;
        part[b] = pa;
        improved = true;
      }
    }
    if (!improved) break;
  }
  finish_plan(plan, topo);
  return plan;
}

PartitionPlan make_partition_plan(WeightStrategy strategy, const Topology& topo, std::size_t k,
                                  const PartitionInputs& in, double epsilon) {
  auto need_flows = [&] {
    if (!in.flows || !in.routes) throw ConfigError(std::string(to_string(strategy)) + " weights need flows and routes");
  };
  PartitionPlan plan;
  switch (strategy) {
    case WeightStrategy::NoWeights:
      plan = partition_min_edgecut(topo, {}, {}, k, epsilon);
      break;
    case WeightStrategy::EdgeThroughput:
      need_flows();
      plan = partition_min_edgecut(topo, {}, derive_edge_throughput_weights(*in.flows, *in.routes, topo), k, epsilon);
      break;
    case WeightStrategy::VertexEvent: {
      const std::vector<std::uint64_t> empty;
      plan = partition_balanced(
          topo, derive_vertex_event_weights(in.event_trace ? *in.event_trace : empty, topo.node_count()), k, epsilon);
      break;
    }
    case WeightStrategy::VertexThroughput:
      need_flows();
      plan = partition_balanced(topo, derive_vertex_throughput_weights(*in.flows, *in.routes, topo), k, epsilon);
      break;
    case WeightStrategy::VertexPlusEdge:
      need_flows();
      plan = partition_min_edgecut(topo, derive_vertex_throughput_weights(*in.flows, *in.routes, topo),
                                   derive_edge_throughput_weights(*in.flows, *in.routes, topo), k, epsilon);
      break;
  }
  plan.strategy = strategy;
  return plan;
}

PartitionPlan parse_plan(std::istream& in, const Topology& topo, const std::vector<std::int64_t>& vertex_weights) {
  std::string line;
  PartitionPlan plan;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line.rfind("k=", 0) != 0) throw ParseError("plan file must start with 'k=<int>'");
      try {
        plan.k = std::stoul(line.substr(2));
      } catch (const std::exception&) {
        throw ParseError("bad plan header '" + line + "'");
      }
      if (plan.k == 0) throw ValidationError("plan k must be at least 1");
      have_header = true;
      continue;
    }
    std::uint64_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoull(line, &used);
      if (used != line.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw ParseError("bad partition index '" + line + "'");
    }
    if (idx >= plan.k)
      throw ValidationError("partition index " + std::to_string(idx) + " out of range for k=" + std::to_string(plan.k));
    plan.assignment.push_back(static_cast<std::uint32_t>(idx));
  }
  if (!have_header) throw ParseError("empty plan file");
  if (plan.assignment.size() != topo.node_count())
    throw ValidationError("plan lists " + std::to_string(plan.assignment.size()) + " nodes but the topology has " +
                          std::to_string(topo.node_count()));
  plan.vertex_weights = vertex_weights.empty() ? std::vector<std::int64_t>(topo.node_count(), 1) : vertex_weights;
  finish_plan(plan, topo);
  return plan;
}

PartitionPlan import_plan(const std::filesystem::path& path, const Topology& topo,
                          const std::vector<std::int64_t>& vertex_weights) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plan file " + path.string());
  return parse_plan(in, topo, vertex_weights);
}

void write_plan(const PartitionPlan& plan, std::ostream& out) {
  out << "k=" << plan.k << '\n';
  for (auto p : plan.assignment) out << p << '\n';
}

}  // namespace dsnet
