#include "dsnet/topology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "dsnet/rng.hpp"

namespace dsnet {

using nlohmann::json;

std::string_view to_string(NodeTier tier) {
  switch (tier) {
    case NodeTier::Access: return "access";
    case NodeTier::Mixed: return "mixed";
    case NodeTier::Kernel: return "kernel";
  }
  return "?";
}

NodeTier parse_tier(std::string_view text) {
  if (text == "access") return NodeTier::Access;
  if (text == "mixed") return NodeTier::Mixed;
  if (text == "kernel") return NodeTier::Kernel;
  throw ParseError("unknown node tier '" + std::string(text) + "'");
}

Topology::Topology(std::vector<Node> nodes, const std::vector<Link>& bidirectional_links)
    : nodes_(std::move(nodes)) {
  links_.reserve(bidirectional_links.size() * 2);
  for (const Link& l : bidirectional_links) {
    links_.push_back(l);
    links_.push_back(Link{l.dst, l.dst_port, l.src, l.src_port, l.bandwidth_bps, l.delay_ns});
  }
  validate_and_index();
}

void Topology::validate_and_index() {
  const std::size_t n = nodes_.size();
  if (n == 0) throw ValidationError("topology has no nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != i)
      throw ValidationError("node ids must be dense 0..N-1 in order; found id " +
                            std::to_string(nodes_[i].id) + " at position " + std::to_string(i));
  }
  adjacency_.assign(n, {});
  port_link_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) port_link_[i].assign(nodes_[i].ports, -1);

  for (std::size_t li = 0; li < links_.size(); ++li) {
    const Link& l = links_[li];
    const std::string tag = "link " + std::to_string(l.src) + ":" + std::to_string(l.src_port) + " -> " +
                            std::to_string(l.dst) + ":" + std::to_string(l.dst_port);
    if (l.src >= n || l.dst >= n) throw ValidationError(tag + " references an unknown node");
    if (l.src == l.dst) throw ValidationError(tag + " is a self-loop");
    if (l.bandwidth_bps == 0) throw ValidationError(tag + " has zero bandwidth");
    if (l.delay_ns < 0) throw ValidationError(tag + " has negative delay");
    if (l.src_port >= nodes_[l.src].ports) throw ValidationError(tag + " uses a port the node does not have");
    if (l.dst_port >= nodes_[l.dst].ports) throw ValidationError(tag + " uses a port the node does not have");
    auto& slot = port_link_[l.src][l.src_port];
    if (slot != -1) throw ValidationError(tag + " reuses an already wired port");
    slot = static_cast<std::int64_t>(li);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int64_t li : port_link_[i])
      if (li >= 0) adjacency_[i].push_back(static_cast<std::size_t>(li));
  }

  // Connectivity (links are symmetric, so one BFS suffices).
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t li : adjacency_[v]) {
      const NodeId w = links_[li].dst;
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  if (reached != n)
    throw ValidationError("topology is disconnected: " + std::to_string(n - reached) +
                          " node(s) unreachable from node 0");
}

const Link* Topology::egress_link(NodeId node, PortIndex port) const {
  if (node >= port_link_.size() || port >= port_link_[node].size()) return nullptr;
  const std::int64_t li = port_link_[node][port];
  return li < 0 ? nullptr : &links_[static_cast<std::size_t>(li)];
}

std::vector<NodeId> Topology::nodes_of_tier(NodeTier tier) const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.tier == tier) out.push_back(n.id);
  return out;
}

Topology parse_topology(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
  std::vector<Node> nodes;
  std::vector<Link> links;
  try {
    for (const auto& jn : doc.at("nodes")) {
      nodes.push_back(Node{jn.at("id").get<NodeId>(), parse_tier(jn.at("tier").get<std::string>()),
                           jn.at("ports").get<PortIndex>()});
    }
    for (const auto& jl : doc.at("links")) {
      links.push_back(Link{jl.at("src").get<NodeId>(), jl.at("src_port").get<PortIndex>(),
                           jl.at("dst").get<NodeId>(), jl.at("dst_port").get<PortIndex>(),
                           jl.at("bandwidth_bps").get<std::uint64_t>(), jl.at("delay_ns").get<SimTime>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  return Topology(std::move(nodes), links);
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open topology file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_topology(buf.str());
}

std::string serialize_topology(const Topology& topo) {
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : topo.nodes())
    doc["nodes"].push_back({{"id", n.id}, {"tier", std::string(to_string(n.tier))}, {"ports", n.ports}});
  doc["links"] = json::array();
  const auto& dl = topo.directed_links();
  for (std::size_t i = 0; i < dl.size(); i += 2) {
    const Link& l = dl[i];
    doc["links"].push_back({{"src", l.src},
                            {"src_port", l.src_port},
                            {"dst", l.dst},
                            {"dst_port", l.dst_port},
                            {"bandwidth_bps", l.bandwidth_bps},
                            {"delay_ns", l.delay_ns}});
  }
  return doc.dump(1);
}

void save_topology(const Topology& topo, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write topology file " + path.string());
  out << serialize_topology(topo) << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Topology convert_csv_topology(std::istream& nodes_csv, std::istream& links_csv, SimTime default_delay_ns) {
  std::map<std::string, NodeId> index;
  std::vector<Node> nodes;
  std::vector<std::size_t> declared_ports;
  std::string line;
  bool header = true;
  while (std::getline(nodes_csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 2) throw ParseError("node table: expected name,type[,ports] but got '" + line + "'");
    if (index.count(f[0])) throw ParseError("node table: duplicate node '" + f[0] + "'");
    const auto id = static_cast<NodeId>(nodes.size());
    index[f[0]] = id;
    nodes.push_back(Node{id, parse_tier(f[1]), 0});
    declared_ports.push_back(f.size() > 2 && !f[2].empty() ? std::stoul(f[2]) : 0);
  }

  std::vector<Link> links;
  std::vector<std::size_t> used(nodes.size(), 0);
  header = true;
  while (std::getline(links_csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 3) throw ParseError("link table: expected src,dst,bandwidth_gbps[,delay_ns] but got '" + line + "'");
    const auto a = index.find(f[0]);
    const auto b = index.find(f[1]);
    if (a == index.end() || b == index.end())
      throw ValidationError("link table: link '" + line + "' references an unknown node");
    double gbps = 0;
    try {
      gbps = std::stod(f[2]);
    } catch (const std::exception&) {
      throw ParseError("link table: bad bandwidth in '" + line + "'");
    }
    const SimTime delay = f.size() > 3 && !f[3].empty() ? std::stoll(f[3]) : default_delay_ns;
    links.push_back(Link{a->second, static_cast<PortIndex>(used[a->second]++), b->second,
                         static_cast<PortIndex>(used[b->second]++),
                         static_cast<std::uint64_t>(gbps * 1e9 + 0.5), delay});
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    nodes[i].ports = static_cast<PortIndex>(std::max(used[i], declared_ports[i]));
  return Topology(std::move(nodes), links);
}

std::optional<PortIndex> RoutingTable::egress(NodeId at, NodeId dst) const {
  const std::int32_t p = port(at, dst);
  if (p < 0) return std::nullopt;
  return static_cast<PortIndex>(p);
}

std::vector<NodeId> RoutingTable::path(const Topology& topo, NodeId src, NodeId dst) const {
  std::vector<NodeId> out{src};
  NodeId at = src;
  while (at != dst) {
    const Link* l = topo.egress_link(at, static_cast<PortIndex>(port(at, dst)));
    DSNET_CHECK(l != nullptr, "routing table points at an unwired port");
    at = l->dst;
    out.push_back(at);
    DSNET_CHECK(out.size() <= n_, "routing loop");
  }
  return out;
}

namespace {

struct Cost {
  std::int64_t primary;
  std::int64_t hops;
  auto operator<=>(const Cost&) const = default;
};

constexpr Cost kUnreached{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max()};

}  // namespace

RoutingTable compute_routes(const Topology& topo, RouteMetric metric) {
  const std::size_t n = topo.node_count();
  const auto& links = topo.directed_links();
  // Reverse adjacency: for each node, directed links arriving at it.
  std::vector<std::vector<std::size_t>> incoming(n);
  for (std::size_t li = 0; li < links.size(); ++li) incoming[links[li].dst].push_back(li);

  auto link_cost = [&](const Link& l) -> Cost {
    return metric == RouteMetric::HopCount ? Cost{1, 1} : Cost{l.delay_ns, 1};
  };

  std::vector<std::int32_t> ports(n * n, RoutingTable::kSelf);
  std::vector<Cost> dist(n);
  using Item = std::pair<Cost, NodeId>;
  for (NodeId dst = 0; dst < n; ++dst) {
    std::fill(dist.begin(), dist.end(), kUnreached);
    dist[dst] = Cost{0, 0};
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({dist[dst], dst});
    while (!heap.empty()) {
      const auto [d, v] = heap.top();
      heap.pop();
      if (d != dist[v]) continue;
      for (std::size_t li : incoming[v]) {
        const Link& l = links[li];
        const Cost c = link_cost(l);
        const Cost nd{d.primary + c.primary, d.hops + c.hops};
        if (nd < dist[l.src]) {
          dist[l.src] = nd;
          heap.push({nd, l.src});
        }
      }
    }
    for (NodeId src = 0; src < n; ++src) {
      if (src == dst) continue;
      if (dist[src] == kUnreached)
        throw ValidationError("node " + std::to_string(dst) + " unreachable from node " + std::to_string(src));
      NodeId best_hop = 0;
      std::int32_t best_port = -1;
      for (std::size_t li : topo.out_links(src)) {
        const Link& l = links[li];
        if (dist[l.dst] == kUnreached) continue;
        const Cost c = link_cost(l);
        if (Cost{dist[l.dst].primary + c.primary, dist[l.dst].hops + c.hops} != dist[src]) continue;
        if (best_port < 0 || l.dst < best_hop || (l.dst == best_hop && l.src_port < best_port)) {
          best_hop = l.dst;
          best_port = l.src_port;
        }
      }
      DSNET_CHECK(best_port >= 0, "no shortest-path successor");
      ports[static_cast<std::size_t>(src) * n + dst] = best_port;
    }
  }
  return RoutingTable(n, std::move(ports));
}

Topology generate_synthetic_topology(const SyntheticTopologyParams& p) {
  if (p.n_access < 1 || p.n_mixed < 1 || p.n_kernel < 1)
    throw ConfigError("synthetic topology needs at least one node per tier");
  CounterRng rng{p.seed, stream_id(0, RngPurpose::Topology), 0};
  std::vector<Node> nodes;
  const std::size_t total = p.n_access + p.n_mixed + p.n_kernel;
  nodes.reserve(total);
  const NodeId first_mixed = static_cast<NodeId>(p.n_access);
  const NodeId first_kernel = static_cast<NodeId>(p.n_access + p.n_mixed);
  for (NodeId i = 0; i < total; ++i) {
    const NodeTier tier = i < first_mixed ? NodeTier::Access : i < first_kernel ? NodeTier::Mixed : NodeTier::Kernel;
    nodes.push_back(Node{i, tier, 0});
  }
  std::vector<std::size_t> degree(total, 0);
  std::vector<Link> links;
  std::map<std::pair<NodeId, NodeId>, bool> present;
  auto connect = [&](NodeId a, NodeId b, std::uint64_t bw) {
    const auto key = std::minmax(a, b);
    if (present[{key.first, key.second}]) return;
    present[{key.first, key.second}] = true;
    links.push_back(Link{a, static_cast<PortIndex>(degree[a]++), b, static_cast<PortIndex>(degree[b]++), bw,
                         p.delay_ns});
  };

  // Kernel core: a ring, or a chain when there are only two nodes.
  if (p.n_kernel == 2) connect(first_kernel, first_kernel + 1, p.core_bandwidth_bps);
  if (p.n_kernel >= 3)
    for (std::size_t i = 0; i < p.n_kernel; ++i)
      connect(static_cast<NodeId>(first_kernel + i), static_cast<NodeId>(first_kernel + (i + 1) % p.n_kernel),
              p.core_bandwidth_bps);

  for (std::size_t i = 0; i < p.n_mixed; ++i) {
    const auto m = static_cast<NodeId>(first_mixed + i);
    const auto k1 = static_cast<NodeId>(first_kernel + rng.next_below(p.n_kernel));
    connect(m, k1, p.core_bandwidth_bps);
    if (p.n_kernel >= 2 && rng.next_unit() < 0.5) {
      auto k2 = static_cast<NodeId>(first_kernel + rng.next_below(p.n_kernel - 1));
      if (k2 >= k1) ++k2;
      connect(m, k2, p.core_bandwidth_bps);
    }
  }
  for (std::size_t i = 0; i < p.n_access; ++i) {
    const auto a = static_cast<NodeId>(i);
    const auto m1 = static_cast<NodeId>(first_mixed + rng.next_below(p.n_mixed));
    connect(a, m1, p.access_bandwidth_bps);
    if (p.n_mixed >= 2 && rng.next_unit() < 0.25) {
      auto m2 = static_cast<NodeId>(first_mixed + rng.next_below(p.n_mixed - 1));
      if (m2 >= m1) ++m2;
      connect(a, m2, p.access_bandwidth_bps);
    }
  }
  for (std::size_t i = 0; i < total; ++i) nodes[i].ports = static_cast<PortIndex>(degree[i]);
  return Topology(std::move(nodes), links);
}

}  // namespace dsnet
