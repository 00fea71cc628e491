#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dsnet/common.hpp"
#include "dsnet/packet.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/topology.hpp"

namespace dsnet {

enum class TrafficPattern : std::uint8_t { AccessToCore, ExplicitFlows };
enum class ArrivalProcess : std::uint8_t { Cbr, Poisson };

struct FlowSpec {
  NodeId src = 0;
  NodeId dst = 0;
  double rate_pps = 0.0;
  std::optional<std::uint8_t> ds;  // drawn from the DS distribution when absent

  friend bool operator==(const FlowSpec&, const FlowSpec&) = default;
};

struct TrafficSpec {
  TrafficPattern pattern = TrafficPattern::AccessToCore;
  std::uint32_t packet_size = 1400;
  // Per-source rate. The default spreads ~5e5 packets over 5,149 sources and
  // 0.5 s of virtual time.
  double rate_pps = 5e5 / 5149.0 / 0.5;
  std::vector<std::pair<std::uint8_t, double>> ds_distribution{{46, 0.2}, {26, 0.3}, {0, 0.5}};
  ArrivalProcess arrival = ArrivalProcess::Cbr;
  bool random_phase = true;  // start each source at a seeded offset within its first interval
  // Hotspot variant of AccessToCore: a `hotspot_share` fraction of sources
  // target a hot set holding `hotspot_fraction` of all nodes (drawn from the core).
  double hotspot_fraction = 0.0;
  double hotspot_share = 0.0;
  std::vector<FlowSpec> flows;  // ExplicitFlows only
};

// Throws ConfigError on non-positive rates, bad DS values or a DS
// distribution that does not sum to one.
void validate_traffic(const TrafficSpec& spec);

// Generator state for one flow; lives inside the source node's LP.
struct SourceState {
  NodeId dst = 0;
  double rate_pps = 0.0;
  std::optional<std::uint8_t> fixed_ds;
  SimTime start = 0;
  std::uint64_t index = 0;  // packets generated so far
  SimTime next_time = 0;
  ArrivalProcess arrival = ArrivalProcess::Cbr;
  CounterRng ds_rng;
  CounterRng arrival_rng;

  friend bool operator==(const SourceState&, const SourceState&) = default;
};

// Generator states for every node (empty for nodes without sources).
// AccessToCore: each access node gets one destination drawn uniformly from
// the mixed and kernel nodes, fixed for the run. Throws ConfigError when
// the topology has no core nodes.
std::vector<std::vector<SourceState>> build_sources(const TrafficSpec& spec, const Topology& topo,
                                                    std::uint64_t seed);

// The (src, dst, rate) triples implied by the sources.
std::vector<FlowSpec> effective_flows(const TrafficSpec& spec, const Topology& topo, std::uint64_t seed);

// Hot destination set used by the hotspot variant, sorted by id.
std::vector<NodeId> hotspot_nodes(const TrafficSpec& spec, const Topology& topo, std::uint64_t seed);

// Emits the packet due at `now` (id left for the caller to assign) and
// returns the time of the following one.
std::pair<Packet, SimTime> next_generate(SourceState& state, NodeId self, std::uint32_t packet_size,
                                         const std::vector<std::pair<std::uint8_t, double>>& ds_distribution,
                                         SimTime now);

}  // namespace dsnet
