#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "dsnet/topology.hpp"

using namespace dsnet;

namespace {

constexpr std::uint64_t kGbps = 1'000'000'000ULL;

Link bi(NodeId a, PortIndex pa, NodeId b, PortIndex pb, SimTime delay = 1000) {
  return Link{a, pa, b, pb, 10 * kGbps, delay};
}

Topology line3() {
  return Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Mixed, 2}, {2, NodeTier::Kernel, 1}},
                  {bi(0, 0, 1, 0), bi(1, 1, 2, 0)});
}

// Square A-B-C-D: A adjacent to B and D, C adjacent to B and D.
Topology square() {
  return Topology({{0, NodeTier::Access, 2}, {1, NodeTier::Mixed, 2}, {2, NodeTier::Kernel, 2}, {3, NodeTier::Mixed, 2}},
                  {bi(0, 0, 1, 0), bi(1, 1, 2, 0), bi(2, 1, 3, 0), bi(3, 1, 0, 1)});
}

// Random connected graph: a random spanning tree plus extra edges.
Topology random_graph(std::size_t n, std::size_t extra, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<Node> nodes(n);
  std::vector<PortIndex> used(n, 0);
  std::vector<Link> links;
  std::set<std::pair<NodeId, NodeId>> have;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b || have.count({std::min(a, b), std::max(a, b)})) return;
    have.insert({std::min(a, b), std::max(a, b)});
    links.push_back(Link{a, used[a]++, b, used[b]++, kGbps, static_cast<SimTime>(100 + rng() % 5000)});
  };
  for (NodeId v = 1; v < n; ++v) add(v, static_cast<NodeId>(rng() % v));
  for (std::size_t i = 0; i < extra; ++i) add(static_cast<NodeId>(rng() % n), static_cast<NodeId>(rng() % n));
  for (NodeId v = 0; v < n; ++v) nodes[v] = Node{v, NodeTier::Mixed, used[v]};
  return Topology(nodes, links);
}

// All-pairs (cost, hops) by Floyd-Warshall; cost is hops or summed delay.
std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> floyd_warshall(const Topology& t, RouteMetric m) {
  const std::size_t n = t.node_count();
  const std::pair<std::int64_t, std::int64_t> inf{std::numeric_limits<std::int64_t>::max() / 4, 0};
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> d(n, std::vector(n, inf));
  for (std::size_t v = 0; v < n; ++v) d[v][v] = {0, 0};
  for (const Link& l : t.directed_links()) {
    const std::pair<std::int64_t, std::int64_t> c{m == RouteMetric::HopCount ? 1 : l.delay_ns, 1};
    d[l.src][l.dst] = std::min(d[l.src][l.dst], c);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::pair<std::int64_t, std::int64_t> via{d[i][k].first + d[k][j].first, d[i][k].second + d[k][j].second};
        d[i][j] = std::min(d[i][j], via);
      }
  return d;
}

std::int64_t path_cost(const Topology& t, const std::vector<NodeId>& path, RouteMetric m) {
  std::int64_t c = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Link* best = nullptr;
    for (std::size_t li : t.out_links(path[i])) {
      const Link& l = t.directed_links()[li];
      if (l.dst == path[i + 1] && (!best || l.delay_ns < best->delay_ns)) best = &l;
    }
    REQUIRE(best != nullptr);
    c += m == RouteMetric::HopCount ? 1 : best->delay_ns;
  }
  return c;
}

}  // namespace

TEST_CASE("three-node line loads with two links") {
  const std::string text = R"({
    "nodes": [{"id": 0, "tier": "access", "ports": 1}, {"id": 1, "tier": "mixed", "ports": 2},
              {"id": 2, "tier": "kernel", "ports": 1}],
    "links": [{"src": 0, "src_port": 0, "dst": 1, "dst_port": 0, "bandwidth_bps": 1000000000, "delay_ns": 1000},
              {"src": 1, "src_port": 1, "dst": 2, "dst_port": 0, "bandwidth_bps": 1000000000, "delay_ns": 1000}]
  })";
  const Topology t = parse_topology(text);
  CHECK(t.node_count() == 3);
  CHECK(t.link_count() == 2);
  CHECK(t.directed_links().size() == 4);
  CHECK(t.node(1).tier == NodeTier::Mixed);
}

TEST_CASE("invalid topologies are rejected") {
  SUBCASE("link to unknown node") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Kernel, 1}}, {bi(0, 0, 7, 0)}), ValidationError);
  }
  SUBCASE("disconnected") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Mixed, 1}, {2, NodeTier::Kernel, 1},
                              {3, NodeTier::Kernel, 1}},
                             {bi(0, 0, 1, 0), bi(2, 0, 3, 0)}),
                    ValidationError);
  }
  SUBCASE("port used twice") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 2}, {1, NodeTier::Mixed, 2}, {2, NodeTier::Kernel, 2}},
                             {bi(0, 0, 1, 0), bi(0, 0, 2, 0), bi(1, 1, 2, 1)}),
                    ValidationError);
  }
  SUBCASE("self loop") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 2}}, {bi(0, 0, 0, 1)}), ValidationError);
  }
  SUBCASE("zero bandwidth") {
    Link l = bi(0, 0, 1, 0);
    l.bandwidth_bps = 0;
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Kernel, 1}}, {l}), ValidationError);
  }
  SUBCASE("negative delay") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Kernel, 1}}, {bi(0, 0, 1, 0, -1)}),
                    ValidationError);
  }
  SUBCASE("port beyond node port count") {
    CHECK_THROWS_AS(Topology({{0, NodeTier::Access, 1}, {1, NodeTier::Kernel, 1}}, {bi(0, 3, 1, 0)}), ValidationError);
  }
  SUBCASE("malformed file") {
    CHECK_THROWS_AS(parse_topology("{\"nodes\": ["), ParseError);
    CHECK_THROWS_AS(parse_topology(R"({"nodes": [{"id": 0, "tier": "core"}], "links": []})"), ParseError);
  }
}

TEST_CASE("routes on a line and tie-break on a square") {
  const Topology t = line3();
  const RoutingTable r = compute_routes(t);
  // A's only port leads to B.
  CHECK(r.egress(0, 2) == PortIndex{0});
  CHECK(t.egress_link(0, *r.egress(0, 2))->dst == 1);
  CHECK(r.port(2, 2) == RoutingTable::kSelf);
  CHECK(r.path(t, 0, 2) == std::vector<NodeId>{0, 1, 2});

  const Topology sq = square();
  const RoutingTable rs = compute_routes(sq);
  CHECK(sq.egress_link(0, *rs.egress(0, 2))->dst == 1);
  CHECK(sq.egress_link(2, *rs.egress(2, 0))->dst == 1);
  // B and D are symmetric seen from C toward A as well; from D to B the tie is A vs C.
  CHECK(sq.egress_link(3, *rs.egress(3, 1))->dst == 0);
}

TEST_CASE("induced paths match a Floyd-Warshall oracle") {
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    const Topology t = random_graph(50, 30, seed);
    for (RouteMetric m : {RouteMetric::HopCount, RouteMetric::Latency}) {
      const auto oracle = floyd_warshall(t, m);
      const RoutingTable r = compute_routes(t, m);
      for (NodeId s = 0; s < t.node_count(); ++s)
        for (NodeId d = 0; d < t.node_count(); ++d) {
          const auto path = r.path(t, s, d);
          REQUIRE(path.front() == s);
          REQUIRE(path.back() == d);
          REQUIRE(path.size() <= t.node_count());
          CHECK(path_cost(t, path, m) == oracle[s][d].first);
        }
    }
  }
}

TEST_CASE("synthetic generator") {
  SyntheticTopologyParams p;
  const Topology a = generate_synthetic_topology(p);
  CHECK(a.node_count() == 50);
  CHECK(a == generate_synthetic_topology(p));
  CHECK(a.nodes_of_tier(NodeTier::Access).size() == 40);
  CHECK(a.nodes_of_tier(NodeTier::Kernel).size() == 2);
  // Access nodes only attach to mixed nodes, mixed to kernel or access.
  for (const Link& l : a.directed_links()) {
    const NodeTier ts = a.node(l.src).tier, td = a.node(l.dst).tier;
    if (ts == NodeTier::Access) CHECK(td == NodeTier::Mixed);
    if (ts == NodeTier::Kernel) CHECK(td != NodeTier::Access);
  }

  SyntheticTopologyParams q = p;
  q.seed = 2;
  CHECK_FALSE(a.directed_links() == generate_synthetic_topology(q).directed_links());

  const Topology minimal = generate_synthetic_topology({1, 1, 1, 0});
  CHECK(minimal.node_count() == 3);
  CHECK(minimal.link_count() == 2);
  const auto routes = compute_routes(minimal);
  CHECK(routes.path(minimal, 0, 2) == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("serialise and reload round trip") {
  const Topology a = generate_synthetic_topology({});
  CHECK(parse_topology(serialize_topology(a)) == a);
  const Topology b = random_graph(30, 10, 9);
  CHECK(parse_topology(serialize_topology(b)) == b);
}

TEST_CASE("CSV conversion") {
  std::istringstream nodes("name,type,ports\nedge-a,access,\ncore-x,kernel,3\nmid,mixed\n");
  std::istringstream links("src,dst,bandwidth_gbps,delay_ns\nedge-a,mid,25,500\nmid,core-x,100\n");
  const Topology t = convert_csv_topology(nodes, links, 2000);
  REQUIRE(t.node_count() == 3);
  CHECK(t.link_count() == 2);
  CHECK(t.node(0).tier == NodeTier::Access);
  CHECK(t.node(1).ports == 3);
  const Link* l = t.egress_link(0, 0);
  REQUIRE(l != nullptr);
  CHECK(l->dst == 2);
  CHECK(l->bandwidth_bps == 25 * kGbps);
  CHECK(l->delay_ns == 500);
  CHECK(t.egress_link(2, 1)->delay_ns == 2000);

  std::istringstream bad_nodes("name,type\na,access\n");
  std::istringstream bad_links("src,dst,bandwidth_gbps\na,b,10\n");
  CHECK_THROWS_AS(convert_csv_topology(bad_nodes, bad_links), ValidationError);
}
