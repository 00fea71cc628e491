#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dsnet/partition.hpp"

using namespace dsnet;

namespace {

constexpr std::uint64_t kGbps = 1'000'000'000ULL;

Topology line(std::size_t n) {
  std::vector<Node> nodes;
  std::vector<Link> links;
  for (NodeId v = 0; v < n; ++v) nodes.push_back({v, NodeTier::Mixed, 2});
  for (NodeId v = 0; v + 1 < n; ++v) links.push_back(Link{v, 1, v + 1, 0, kGbps, 1000});
  return Topology(nodes, links);
}

// Two 6-cliques {0..5} and {6..11} joined by the edge 5-6, which is the last link.
Topology two_cliques() {
  std::vector<Node> nodes;
  std::vector<Link> links;
  std::vector<PortIndex> used(12, 0);
  for (NodeId v = 0; v < 12; ++v) nodes.push_back({v, NodeTier::Mixed, 6});
  for (NodeId base : {0u, 6u})
    for (NodeId a = base; a < base + 6; ++a)
      for (NodeId b = a + 1; b < base + 6; ++b) links.push_back(Link{a, used[a]++, b, used[b]++, kGbps, 1000});
  links.push_back(Link{5, used[5]++, 6, used[6]++, kGbps, 1000});
  return Topology(nodes, links);
}

Topology random_graph(std::size_t n, std::size_t extra, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<PortIndex> used(n, 0);
  std::vector<Link> links;
  std::set<std::pair<NodeId, NodeId>> have;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b || !have.insert({std::min(a, b), std::max(a, b)}).second) return;
    links.push_back(Link{a, used[a]++, b, used[b]++, kGbps, 1000});
  };
  for (NodeId v = 1; v < n; ++v) add(v, static_cast<NodeId>(rng() % v));
  for (std::size_t i = 0; i < extra; ++i) add(static_cast<NodeId>(rng() % n), static_cast<NodeId>(rng() % n));
  std::vector<Node> nodes;
  for (NodeId v = 0; v < n; ++v) nodes.push_back({v, NodeTier::Mixed, used[v]});
  return Topology(nodes, links);
}

void check_plan_shape(const PartitionPlan& p, const Topology& t) {
  REQUIRE(p.assignment.size() == t.node_count());
  std::set<std::uint32_t> used;
  for (auto a : p.assignment) {
    CHECK(a < p.k);
    used.insert(a);
  }
  CHECK(used.size() == p.k);
  CHECK(p.imbalance >= 1.0 - 1e-12);
}

}  // namespace

TEST_CASE("strategy names") {
  for (auto s : {WeightStrategy::NoWeights, WeightStrategy::EdgeThroughput, WeightStrategy::VertexEvent,
                 WeightStrategy::VertexThroughput, WeightStrategy::VertexPlusEdge})
    CHECK(parse_weight_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_weight_strategy("metis"), ConfigError);
}

TEST_CASE("k = 1 puts everything in partition 0") {
  const Topology t = generate_synthetic_topology({});
  const PartitionPlan p = partition_balanced(t, {}, 1);
  CHECK(p.assignment == std::vector<std::uint32_t>(t.node_count(), 0));
  CHECK(p.imbalance == 1.0);
  CHECK(partition_min_edgecut(t, {}, {}, 1).cut_weight == 0);
  CHECK_THROWS_AS(partition_balanced(line(3), {}, 4), ConfigError);
}

TEST_CASE("line of ten splits 5/5") {
  const Topology t = line(10);
  // Oracle: among contiguous splits the only balanced one is after node 4.
  for (const PartitionPlan& p : {partition_balanced(t, {}, 2), partition_min_edgecut(t, {}, {}, 2)}) {
    check_plan_shape(p, t);
    const auto w = partition_weights(p.assignment, p.vertex_weights, 2);
    CHECK(w[0] == 5);
    CHECK(w[1] == 5);
    CHECK(p.cut_weight == 1);
    CHECK(p.imbalance == 1.0);
  }
}

TEST_CASE("two cliques: cut is the bridge") {
  const Topology t = two_cliques();
  std::vector<std::int64_t> ew(t.link_count(), 10);
  ew.back() = 1;
  const PartitionPlan p = partition_min_edgecut(t, {}, ew, 2);
  check_plan_shape(p, t);
  CHECK(p.cut_weight == 1);
  CHECK(p.assignment[0] != p.assignment[11]);
}

TEST_CASE("balanced partitions on the synthetic graph") {
  const Topology t = generate_synthetic_topology({});
  for (std::size_t k : {2u, 4u, 8u}) {
    const PartitionPlan p = partition_balanced(t, {}, k);
    check_plan_shape(p, t);
    // With unit weights the best achievable is ceil(n/k) / (n/k).
    const double n = static_cast<double>(t.node_count());
    const double best = std::ceil(n / k) / (n / k);
    CHECK(p.imbalance == doctest::Approx(best));
    CHECK(p.degraded == (best > 1.10));
    CHECK(p.imbalance == doctest::Approx(compute_imbalance(p.assignment, p.vertex_weights, k)));
    CHECK(partition_balanced(t, {}, k).assignment == p.assignment);  // deterministic
  }
}

TEST_CASE("edge-cut refinement never worsens the cut") {
  for (std::uint32_t seed = 1; seed <= 5; ++seed) {
    const Topology t = random_graph(60, 40, seed);
    std::mt19937 rng(seed);
    std::vector<std::int64_t> ew(t.link_count());
    for (auto& w : ew) w = 1 + static_cast<std::int64_t>(rng() % 100);
    for (std::size_t k : {2u, 4u}) {
      PartitionPlan balanced = partition_balanced(t, {}, k);
      const std::int64_t balanced_cut = compute_cut_weight(t, balanced.assignment, ew);
      const PartitionPlan refined = partition_min_edgecut(t, {}, ew, k);
      check_plan_shape(refined, t);
      CHECK(refined.cut_weight <= balanced_cut);
      CHECK(refined.cut_weight == compute_cut_weight(t, refined.assignment, ew));
    }
  }
}

TEST_CASE("a single dominant vertex is reported as degraded") {
  const Topology t = line(6);
  const PartitionPlan p = partition_balanced(t, {100, 1, 1, 1, 1, 1}, 2);
  CHECK(p.degraded);
  CHECK(p.imbalance > 1.10);
  CHECK(p.imbalance == doctest::Approx(100.0 / 52.5));  // best possible: {100} vs the rest
}

TEST_CASE("throughput weights walk routes") {
  const Topology t = line(5);
  const RoutingTable r = compute_routes(t);
  SUBCASE("single flow") {
    const std::vector<FlowSpec> flows{{0, 2, 100, std::nullopt}};
    CHECK(derive_vertex_throughput_weights(flows, r, t) == std::vector<std::int64_t>{100, 100, 100, 0, 0});
    CHECK(derive_edge_throughput_weights(flows, r, t) == std::vector<std::int64_t>{100, 100, 0, 0});
  }
  SUBCASE("no flows") {
    CHECK(derive_vertex_throughput_weights({}, r, t) == std::vector<std::int64_t>(5, 0));
  }
  SUBCASE("shared link") {
    const std::vector<FlowSpec> flows{{0, 3, 100, std::nullopt}, {1, 4, 40, std::nullopt}};
    CHECK(derive_vertex_throughput_weights(flows, r, t) == std::vector<std::int64_t>{100, 140, 140, 140, 40});
    CHECK(derive_edge_throughput_weights(flows, r, t) == std::vector<std::int64_t>{100, 140, 140, 40});
  }
}

TEST_CASE("event weights") {
  const std::vector<std::uint64_t> trace{10, 0, 5, 7};
  const auto w = derive_vertex_event_weights(trace, 4);
  CHECK(w == std::vector<std::int64_t>{10, 0, 5, 7});
  CHECK(std::accumulate(w.begin(), w.end(), std::int64_t{0}) == 22);
  try {
    derive_vertex_event_weights({}, 4);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run --profile") != std::string::npos);
  }
  CHECK_THROWS_AS(derive_vertex_event_weights(trace, 5), ConfigError);

  std::stringstream ss;
  write_event_trace(trace, ss);
  CHECK(ss.str() == "node,events\n0,10\n1,0\n2,5\n3,7\n");
}

TEST_CASE("make_partition_plan needs a trace for vertex-event") {
  const Topology t = generate_synthetic_topology({});
  CHECK_THROWS_AS(make_partition_plan(WeightStrategy::VertexEvent, t, 2, {}), ConfigError);
  CHECK_THROWS_AS(make_partition_plan(WeightStrategy::EdgeThroughput, t, 2, {}), ConfigError);
  const auto p = make_partition_plan(WeightStrategy::NoWeights, t, 4, {});
  CHECK(p.strategy == WeightStrategy::NoWeights);
  check_plan_shape(p, t);
}

TEST_CASE("vertex-throughput on the synthetic graph") {
  const Topology t = generate_synthetic_topology({});
  const RoutingTable r = compute_routes(t);
  const auto flows = effective_flows(TrafficSpec{}, t, 1);
  const PartitionInputs in{&flows, &r, nullptr};
  for (std::size_t k : {2u, 4u, 8u}) {
    const PartitionPlan p = make_partition_plan(WeightStrategy::VertexThroughput, t, k, in);
    check_plan_shape(p, t);
    CHECK(p.imbalance <= 1.10);
    CHECK_FALSE(p.degraded);
  }
}

TEST_CASE("plan import") {
  const Topology t = line(8);
  SUBCASE("all zeros is a k = 1 plan") {
    std::istringstream in("k=1\n0\n0\n0\n0\n0\n0\n0\n0\n");
    const PartitionPlan p = parse_plan(in, t);
    CHECK(p.k == 1);
    CHECK(p.imbalance == 1.0);
  }
  SUBCASE("four-way file") {
    std::istringstream in("k=4\n0\n0\n1\n1\n2\n2\n3\n3\n");
    const PartitionPlan p = parse_plan(in, t);
    check_plan_shape(p, t);
    CHECK(p.cut_weight == 3);
  }
  SUBCASE("index out of range") {
    std::istringstream in("k=2\n0\n0\n1\n1\n2\n0\n0\n0\n");
    CHECK_THROWS_AS(parse_plan(in, t), ValidationError);
  }
  SUBCASE("wrong line count") {
    std::istringstream in("k=2\n0\n1\n");
    CHECK_THROWS_AS(parse_plan(in, t), ValidationError);
  }
  SUBCASE("malformed") {
    std::istringstream no_header("0\n1\n");
    CHECK_THROWS_AS(parse_plan(no_header, t), ParseError);
    std::istringstream junk("k=2\n0\nx\n");
    CHECK_THROWS_AS(parse_plan(junk, t), ParseError);
  }
  SUBCASE("round trip") {
    const PartitionPlan p = partition_balanced(t, {}, 3);
    std::stringstream ss;
    write_plan(p, ss);
    CHECK(parse_plan(ss, t).assignment == p.assignment);
  }
}
