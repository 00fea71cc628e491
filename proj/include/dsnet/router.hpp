#pragma once

// Router logical process. Only two event kinds drive forwarding: ARRIVE
// (a packet reaches the node) and SEND (a port retries after its shaper
// ran short of tokens). A per-port send flag records whether a try-to-send
// is pending, so arrivals at a busy port never schedule redundant SENDs.
// GENERATE drives the node's traffic sources; REFILL exists only in the
// periodic-token baseline.

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "dsnet/kernel/event.hpp"
#include "dsnet/packet.hpp"
#include "dsnet/qos.hpp"
#include "dsnet/topology.hpp"
#include "dsnet/traffic.hpp"

namespace dsnet {

enum class EventKind : std::uint8_t { Arrive, Send, Generate, Refill };

struct RouterPayload {
  EventKind kind = EventKind::Arrive;
  PortIndex port = 0;       // Send, Refill
  std::uint16_t flow = 0;   // Generate
  Packet packet;            // Arrive
};

using RouterEvent = kernel::Event<RouterPayload>;
using RouterContext = kernel::Context<RouterPayload, PacketRecord>;

enum class ShaperMode : std::uint8_t {
  Lazy,      // tokens accrue on demand; a blocked port schedules one SEND
  Periodic,  // tokens arrive only with fixed-interval REFILL events
};

struct SrtcmProfile {
  double cir_fraction = 0.3;  // of the egress link bandwidth
  std::int64_t cbs = 16000;   // bytes
  std::int64_t ebs = 32000;   // bytes
};

struct RedColorProfile {
  double min_fraction = 0.25;  // of queue capacity
  double max_fraction = 0.75;
  double max_p = 0.02;
};

// Per-tier DiffServ parameterisation of every egress pipeline.
struct QosProfile {
  ClassifierConfig classifier = default_classifier();
  std::size_t classes = 3;
  std::vector<SrtcmProfile> srtcm{{0.1, 16000, 32000}, {0.3, 16000, 32000}, {0.3, 16000, 32000}};
  // Indexed by Color: green, yellow, red.
  std::array<RedColorProfile, 3> red{{{0.25, 0.75, 0.02}, {0.125, 0.5, 0.1}, {0.0, 0.25, 0.5}}};
  double red_weight = 0.002;
  std::int64_t queue_capacity = 65536;  // bytes per class queue
  double shaper_rate_fraction = 0.8;    // of link bandwidth, used when shaper_rate_bps is 0
  std::uint64_t shaper_rate_bps = 0;
  std::int64_t shaper_burst = 16384;    // bytes
};

struct QosConfig {
  std::array<QosProfile, 3> by_tier{};  // indexed by NodeTier
  const QosProfile& for_tier(NodeTier t) const { return by_tier[static_cast<std::size_t>(t)]; }
};

struct PortStats {
  std::uint64_t arrivals = 0;          // packets entering this pipeline
  std::uint64_t send_events = 0;
  std::uint64_t blocked_episodes = 0;  // try-to-send stopped short of tokens
  std::uint64_t redundant_sends = 0;   // SEND with flag set but nothing queued
  std::uint64_t stale_sends = 0;       // SEND with flag clear
  std::uint64_t forwarded = 0;
  std::uint64_t refill_events = 0;
  std::uint64_t red_drops = 0;
  std::uint64_t queue_full_drops = 0;

  friend bool operator==(const PortStats&, const PortStats&) = default;
};

struct EgressPipeline {
  PortIndex port = 0;
  NodeId peer = 0;
  std::uint64_t bandwidth_bps = 0;
  SimTime delay_ns = 0;
  SimTime typical_tx_ns = 1;
  std::vector<SrtcmState> srtcm;                // per class
  std::vector<std::array<RedState, 3>> red;     // per class, per color
  std::vector<ClassQueue> queues;               // per class, 0 = highest priority
  TokenBucketState shaper;
  bool send_flag = false;
  bool awaiting_refill = false;  // periodic mode: blocked until the next REFILL
  SimTime wire_free_at = 0;
  PortStats stats;

  friend bool operator==(const EgressPipeline&, const EgressPipeline&) = default;
};

struct RouterStats {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_routing = 0;
  std::uint64_t dropped_red = 0;
  std::uint64_t dropped_queue_full = 0;
  std::array<std::uint64_t, 4> events{};  // by EventKind

  friend bool operator==(const RouterStats&, const RouterStats&) = default;
};

struct RouterState {
  NodeId node = 0;
  std::vector<EgressPipeline> pipelines;
  std::vector<SourceState> sources;
  std::uint64_t next_packet_seq = 0;
  CounterRng red_rng;
  RouterStats stats;

  friend bool operator==(const RouterState&, const RouterState&) = default;
};

// Immutable inputs shared by every router.
struct RouterEnv {
  std::shared_ptr<const Topology> topology;
  std::shared_ptr<const RoutingTable> routes;
  QosConfig qos;
  ShaperMode shaper_mode = ShaperMode::Lazy;
  SimTime token_interval = 0;  // periodic mode only
  SimTime end_time = 0;
  std::uint32_t packet_size = 1400;
  std::vector<std::pair<std::uint8_t, double>> ds_distribution;

  const QosProfile& profile(NodeId n) const { return qos.for_tier(topology->node(n).tier); }
};

// Fresh router with full buckets and empty queues. Throws ConfigError when
// a shaper burst cannot hold one packet.
RouterState make_router_state(const RouterEnv& env, NodeId node, std::vector<SourceState> sources,
                              std::uint64_t seed);

// Transmission time of `bytes` on a link, rounded up to whole nanoseconds.
SimTime transmission_ns(std::uint64_t bytes, std::uint64_t bandwidth_bps);

void handle_arrive(const RouterEnv& env, RouterState& s, Packet pkt, SimTime now, RouterContext& ctx);
void handle_send(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx);
void try_to_send(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx);
void handle_generate(const RouterEnv& env, RouterState& s, std::uint16_t flow, SimTime now, RouterContext& ctx);
void handle_refill(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx);

// The kernel-facing model: one LP per network node.
class NetworkModel {
 public:
  using State = RouterState;
  using Payload = RouterPayload;
  using Record = PacketRecord;

  NetworkModel(RouterEnv env, std::vector<std::vector<SourceState>> sources, std::uint64_t seed);

  std::size_t lp_count() const { return env_.topology->node_count(); }
  State initial_state(LpId lp) const;
  void init(State& s, RouterContext& ctx) const;
  void handle(State& s, const RouterEvent& ev, RouterContext& ctx) const;

  const RouterEnv& env() const { return env_; }

 private:
  RouterEnv env_;
  std::vector<std::vector<SourceState>> sources_;
  std::uint64_t seed_;
};

static_assert(kernel::Model<NetworkModel>);

}  // namespace dsnet
