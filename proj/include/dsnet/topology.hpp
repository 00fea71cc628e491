#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsnet/common.hpp"

namespace dsnet {

enum class NodeTier : std::uint8_t { Access, Mixed, Kernel };

std::string_view to_string(NodeTier tier);
NodeTier parse_tier(std::string_view text);

struct Node {
  NodeId id = 0;
  NodeTier tier = NodeTier::Access;
  PortIndex ports = 0;

  friend bool operator==(const Node&, const Node&) = default;
};

// One direction of a physical link.
struct Link {
  NodeId src = 0;
  PortIndex src_port = 0;
  NodeId dst = 0;
  PortIndex dst_port = 0;
  std::uint64_t bandwidth_bps = 0;
  SimTime delay_ns = 0;

  friend bool operator==(const Link&, const Link&) = default;
};

// Immutable, validated network graph. Links are stored as directed pairs; a
// bidirectional entry in the file becomes two consecutive directed links.
class Topology {
 public:
  Topology() = default;

  // Builds from nodes and bidirectional links (each expanded to two directed
  // links) and validates. Throws ValidationError.
  Topology(std::vector<Node> nodes, const std::vector<Link>& bidirectional_links);

  std::size_t node_count() const { return nodes_.size(); }
  // Number of bidirectional links.
  std::size_t link_count() const { return links_.size() / 2; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Link>& directed_links() const { return links_; }

  // Directed link leaving `node` through `port`, or nullptr if the port is unwired.
  const Link* egress_link(NodeId node, PortIndex port) const;
  // Indices into directed_links() of all links leaving `node`, in port order.
  const std::vector<std::size_t>& out_links(NodeId node) const { return adjacency_.at(node); }

  std::vector<NodeId> nodes_of_tier(NodeTier tier) const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.nodes_ == b.nodes_ && a.links_ == b.links_;
  }

 private:
  void validate_and_index();

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<std::size_t>> adjacency_;
  // port_link_[node][port] -> directed link index or -1
  std::vector<std::vector<std::int64_t>> port_link_;
};

// JSON topology file: {"nodes": [{id, tier, ports}], "links": [{src, src_port,
// dst, dst_port, bandwidth_bps, delay_ns}]}. Throws ParseError / ValidationError.
Topology load_topology(const std::filesystem::path& path);
Topology parse_topology(std::string_view text);
std::string serialize_topology(const Topology& topo);
void save_topology(const Topology& topo, const std::filesystem::path& path);

// Converts the two-table CSV layout (node table `name,type[,ports]` and link
// table `src,dst,bandwidth_gbps[,delay_ns]`) into a Topology. Node names may be
// arbitrary strings; ports are assigned in order of appearance.
Topology convert_csv_topology(std::istream& nodes_csv, std::istream& links_csv,
                              SimTime default_delay_ns = 1000);

enum class RouteMetric : std::uint8_t { HopCount, Latency };

// Next-hop egress ports for every (src, dst) pair.
class RoutingTable {
 public:
  static constexpr std::int32_t kSelf = -1;

  RoutingTable() = default;
  RoutingTable(std::size_t nodes, std::vector<std::int32_t> ports)
      : n_(nodes), ports_(std::move(ports)) {}

  std::size_t node_count() const { return n_; }
  // Egress port at `at` toward `dst`; kSelf when at == dst.
  std::int32_t port(NodeId at, NodeId dst) const { return ports_[static_cast<std::size_t>(at) * n_ + dst]; }
  std::optional<PortIndex> egress(NodeId at, NodeId dst) const;

  // Node sequence from src to dst inclusive, following next hops.
  std::vector<NodeId> path(const Topology& topo, NodeId src, NodeId dst) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::int32_t> ports_;
};

// Shortest paths under `metric`; ties broken toward the smallest next-hop
// NodeId (then smallest port). Latency paths use hop count as a secondary
// key so zero-delay links cannot create next-hop cycles.
RoutingTable compute_routes(const Topology& topo, RouteMetric metric = RouteMetric::HopCount);

struct SyntheticTopologyParams {
  std::size_t n_access = 40;
  std::size_t n_mixed = 8;
  std::size_t n_kernel = 2;
  std::uint64_t seed = 1;
  SimTime delay_ns = 1000;
  std::uint64_t access_bandwidth_bps = 25'000'000'000ULL;
  std::uint64_t core_bandwidth_bps = 100'000'000'000ULL;
};

// Three-tier graph: kernel nodes form a ring (chain below three), each mixed
// node attaches to one or two kernel nodes, each access node to one or two
// mixed nodes. Node ids are assigned access first, then mixed, then kernel.
Topology generate_synthetic_topology(const SyntheticTopologyParams& params);

}  // namespace dsnet
