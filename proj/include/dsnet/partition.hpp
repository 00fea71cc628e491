#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsnet/topology.hpp"
#include "dsnet/traffic.hpp"

namespace dsnet {

enum class WeightStrategy : std::uint8_t { NoWeights, EdgeThroughput, VertexEvent, VertexThroughput, VertexPlusEdge };

std::string_view to_string(WeightStrategy s);
WeightStrategy parse_weight_strategy(std::string_view text);

struct PartitionPlan {
  std::size_t k = 1;
  WeightStrategy strategy = WeightStrategy::NoWeights;
  std::vector<std::uint32_t> assignment;    // NodeId -> partition
  std::vector<std::int64_t> vertex_weights; // NodeId -> weight
  std::vector<std::int64_t> edge_weights;   // bidirectional link index -> weight (may be empty)
  double imbalance = 1.0;                   // max partition weight / mean partition weight
  std::int64_t cut_weight = 0;              // summed weight of links whose ends differ
  double epsilon = 0.10;
  bool degraded = false;                    // imbalance above 1 + epsilon
};

// max / mean of per-partition weight sums; 1.0 when every weight is zero.
double compute_imbalance(const std::vector<std::uint32_t>& assignment, const std::vector<std::int64_t>& weights,
                         std::size_t k);
std::vector<std::int64_t> partition_weights(const std::vector<std::uint32_t>& assignment,
                                            const std::vector<std::int64_t>& weights, std::size_t k);
// Unit edge weights are used when `edge_weights` is empty.
std::int64_t compute_cut_weight(const Topology& topo, const std::vector<std::uint32_t>& assignment,
                                const std::vector<std::int64_t>& edge_weights);

// Committed event count per node from a profiling run. Throws ConfigError
// when no trace is available.
std::vector<std::int64_t> derive_vertex_event_weights(const std::vector<std::uint64_t>& committed_events_per_lp,
                                                      std::size_t node_count);
// Event trace file written by `run --profile`: CSV `node,events`.
std::vector<std::uint64_t> load_event_trace(const std::filesystem::path& path);
void write_event_trace(const std::vector<std::uint64_t>& committed_events_per_lp, std::ostream& out);

// Expected packets per second through each node (source, transit and sink),
// summing flow rates along each flow's route.
std::vector<std::int64_t> derive_vertex_throughput_weights(const std::vector<FlowSpec>& flows,
                                                           const RoutingTable& routes, const Topology& topo);
// Packets per second crossing each bidirectional link.
std::vector<std::int64_t> derive_edge_throughput_weights(const std::vector<FlowSpec>& flows,
                                                         const RoutingTable& routes, const Topology& topo);

// Greedy region growing from farthest-point seeds, always extending the
// lightest partition, then boundary-move refinement. Marks the plan
// degraded if the imbalance stays above 1 + epsilon.
PartitionPlan partition_balanced(const Topology& topo, const std::vector<std::int64_t>& vertex_weights,
                                 std::size_t k, double epsilon = 0.10);

// partition_balanced followed by Kernighan-Lin style refinement of the
// edge cut; never increases the cut of its starting plan.
PartitionPlan partition_min_edgecut(const Topology& topo, const std::vector<std::int64_t>& vertex_weights,
                                    const std::vector<std::int64_t>& edge_weights, std::size_t k,
                                    double epsilon = 0.10);

struct PartitionInputs {
  const std::vector<FlowSpec>* flows = nullptr;
  const RoutingTable* routes = nullptr;
  const std::vector<std::uint64_t>* event_trace = nullptr;
};

// Builds the plan for one of the named weighting strategies.
PartitionPlan make_partition_plan(WeightStrategy strategy, const Topology& topo, std::size_t k,
                                  const PartitionInputs& inputs, double epsilon = 0.10);

// Plan file: "k=<int>" header, then one partition index per node in NodeId
// order. Imbalance uses `vertex_weights` (unit weights if empty).
PartitionPlan parse_plan(std::istream& in, const Topology& topo, const std::vector<std::int64_t>& vertex_weights = {});
PartitionPlan import_plan(const std::filesystem::path& path, const Topology& topo,
                          const std::vector<std::int64_t>& vertex_weights = {});
void write_plan(const PartitionPlan& plan, std::ostream& out);

}  // namespace dsnet
