#include "dsnet/router.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsnet {

std::string_view to_string(DropStage s) {
  switch (s) {
    case DropStage::None: return "";
    case DropStage::Routing: return "routing";
    case DropStage::Red: return "red";
    case DropStage::QueueFull: return "queue_full";
  }
  return "?";
}

SimTime transmission_ns(std::uint64_t bytes, std::uint64_t bandwidth_bps) {
  const unsigned __int128 bits_ns = static_cast<unsigned __int128>(bytes) * 8u * 1'000'000'000u;
  return static_cast<SimTime>((bits_ns + bandwidth_bps - 1) / bandwidth_bps);
}

namespace {

std::int64_t fraction_of(double fraction, std::int64_t whole) {
  return static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(whole)));
}

void drop(RouterState& s, const Packet& pkt, DropStage stage, RouterContext& ctx) {
  switch (stage) {
    case DropStage::Routing: ++s.stats.dropped_routing; break;
    case DropStage::Red: ++s.stats.dropped_red; break;
    case DropStage::QueueFull: ++s.stats.dropped_queue_full; break;
    case DropStage::None: break;
  }
  ctx.record(PacketRecord{pkt.id, pkt.src, pkt.dst, pkt.class_index, pkt.color, pkt.created_at, std::nullopt,
                          s.node, stage});
}

// Puts a packet on the wire. Serialisation on the link is FIFO: a packet
// starts once the previous one has left.
void transmit(EgressPipeline& pl, const Packet& pkt, SimTime now, RouterContext& ctx) {
  const SimTime start = std::max(now, pl.wire_free_at);
  const SimTime tx = transmission_ns(pkt.size, pl.bandwidth_bps);
  pl.wire_free_at = start + tx;
  ++pl.stats.forwarded;
  ctx.schedule(pl.peer, start + tx + pl.delay_ns, RouterPayload{EventKind::Arrive, 0, 0, pkt});
}

// Local delivery, or classifier -> srTCM -> per-color RED -> class queue.
void admit(const RouterEnv& env, RouterState& s, Packet pkt, SimTime now, RouterContext& ctx) {
  if (pkt.dst == s.node) {
    ++s.stats.delivered;
    ctx.record(PacketRecord{pkt.id, pkt.src, pkt.dst, pkt.class_index, pkt.color, pkt.created_at, now,
                            std::nullopt, DropStage::None});
    return;
  }
  const auto port = pkt.dst < env.routes->node_count() ? env.routes->egress(s.node, pkt.dst) : std::nullopt;
  if (!port || *port >= s.pipelines.size()) {
    drop(s, pkt, DropStage::Routing, ctx);
    return;
  }
  const QosProfile& prof = env.profile(s.node);
  EgressPipeline& pl = s.pipelines[*port];
  ++pl.stats.arrivals;

  const std::uint8_t cls = std::min<std::uint8_t>(classify(prof.classifier, pkt.ds_field),
                                                  static_cast<std::uint8_t>(pl.queues.size() - 1));
  pkt.class_index = cls;
  auto [color, meter] = srtcm_mark(pl.srtcm[cls], pkt.size, now);
  pl.srtcm[cls] = meter;
  pkt.color = color;

  RedState& red = pl.red[cls][static_cast<std::size_t>(color)];
  const double u = s.red_rng.next_unit();
  const RedOutcome out = red_enqueue_decision(red, pl.queues[cls], pkt.size, u, now, pl.typical_tx_ns);
  red = out.state;
  if (out.decision == RedDecision::Drop) {
    if (out.forced) {
      ++pl.stats.queue_full_drops;
      drop(s, pkt, DropStage::QueueFull, ctx);
    } else {
      ++pl.stats.red_drops;
      drop(s, pkt, DropStage::Red, ctx);
    }
    return;
  }
  pl.queues[cls].push(pkt);
  // The first arrival at an idle port starts the try-to-send loop; later
  // arrivals find the flag set and only queue.
  if (!pl.send_flag) {
    pl.send_flag = true;
    try_to_send(env, s, *port, now, ctx);
  }
}

}  // namespace

RouterState make_router_state(const RouterEnv& env, NodeId node, std::vector<SourceState> sources,
                              std::uint64_t seed) {
  const Topology& topo = *env.topology;
  const QosProfile& prof = env.profile(node);
  if (prof.classes == 0) throw ConfigError("QoS profile needs at least one class");
  if (prof.srtcm.size() < prof.classes) throw ConfigError("QoS profile needs one srTCM entry per class");
  RouterState s;
  s.node = node;
  s.sources = std::move(sources);
  s.red_rng = CounterRng{seed, stream_id(node, RngPurpose::Red), 0};
  for (PortIndex p = 0; p < topo.node(node).ports; ++p) {
    const Link* link = topo.egress_link(node, p);
    EgressPipeline pl;
    pl.port = p;
    if (link != nullptr) {
      pl.peer = link->dst;
      pl.bandwidth_bps = link->bandwidth_bps;
      pl.delay_ns = link->delay_ns;
      pl.typical_tx_ns = transmission_ns(env.packet_size, link->bandwidth_bps);
    } else {
      pl.bandwidth_bps = 1;
    }
    const auto bw_bytes = static_cast<std::int64_t>(pl.bandwidth_bps / 8);
    for (std::size_t c = 0; c < prof.classes; ++c) {
      const SrtcmProfile& sp = prof.srtcm[c];
      pl.srtcm.push_back(SrtcmState::make(
          SrtcmConfig{static_cast<std::int64_t>(sp.cir_fraction * static_cast<double>(bw_bytes)), sp.cbs, sp.ebs}));
      std::array<RedState, 3> reds;
      for (std::size_t color = 0; color < 3; ++color) {
        const RedColorProfile& rp = prof.red[color];
        RedParams params;
        params.min_th = fraction_of(rp.min_fraction, prof.queue_capacity);
        params.max_th = std::max(params.min_th + 1, fraction_of(rp.max_fraction, prof.queue_capacity));
        params.max_p = rp.max_p;
        params.weight = prof.red_weight;
        reds[color] = RedState{params, 0.0, 0, 0};
      }
      pl.red.push_back(reds);
      ClassQueue q;
      q.capacity = prof.queue_capacity;
      pl.queues.push_back(std::move(q));
    }
    const std::uint64_t shaper_bps =
        prof.shaper_rate_bps ? prof.shaper_rate_bps
                             : static_cast<std::uint64_t>(prof.shaper_rate_fraction * static_cast<double>(pl.bandwidth_bps));
    if (link != nullptr && prof.shaper_burst < static_cast<std::int64_t>(env.packet_size))
      throw ConfigError("shaper burst of " + std::to_string(prof.shaper_burst) +
                        " bytes cannot hold one packet of " + std::to_string(env.packet_size) + " bytes");
    if (link != nullptr && shaper_bps / 8 == 0) throw ConfigError("shaper rate must be positive");
    pl.shaper = TokenBucketState::full(prof.shaper_burst, static_cast<std::int64_t>(shaper_bps / 8));
    s.pipelines.push_back(std::move(pl));
  }
  return s;
}

void try_to_send(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx) {
  EgressPipeline& pl = s.pipelines[port];
  for (;;) {
    const auto cls = strict_priority_select(pl.queues);
    if (!cls) {
      pl.send_flag = false;
      pl.awaiting_refill = false;
      return;
    }
    const Packet& head = pl.queues[*cls].packets.front();
    if (env.shaper_mode == ShaperMode::Lazy) pl.shaper = bucket_refill(pl.shaper, now);
    if (pl.shaper.covers(head.size)) {
      pl.shaper.tokens -= to_scaled(head.size);
      const Packet pkt = pl.queues[*cls].pop(now);
      transmit(pl, pkt, now, ctx);
      continue;
    }
    // Short of tokens: the whole port waits for the current head.
    ++pl.stats.blocked_episodes;
    if (env.shaper_mode == ShaperMode::Lazy) {
      const SimTime ready = shaper_earliest_ready(pl.shaper, head.size, now);
      ctx.schedule(s.node, ready, RouterPayload{EventKind::Send, port, 0, {}});
    } else {
      pl.awaiting_refill = true;
    }
    return;
  }
}

void handle_arrive(const RouterEnv& env, RouterState& s, Packet pkt, SimTime now, RouterContext& ctx) {
  ++s.stats.events[static_cast<std::size_t>(EventKind::Arrive)];
  admit(env, s, pkt, now, ctx);
}

void handle_send(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx) {
  ++s.stats.events[static_cast<std::size_t>(EventKind::Send)];
  EgressPipeline& pl = s.pipelines.at(port);
  ++pl.stats.send_events;
  if (!pl.send_flag) {
    ++pl.stats.stale_sends;
    return;
  }
  if (!strict_priority_select(pl.queues)) ++pl.stats.redundant_sends;
  try_to_send(env, s, port, now, ctx);
}

void handle_generate(const RouterEnv& env, RouterState& s, std::uint16_t flow, SimTime now, RouterContext& ctx) {
  ++s.stats.events[static_cast<std::size_t>(EventKind::Generate)];
  SourceState& src = s.sources.at(flow);
  auto [pkt, next] = next_generate(src, s.node, env.packet_size, env.ds_distribution, now);
  pkt.id = (static_cast<std::uint64_t>(s.node) << 32) | s.next_packet_seq++;
  ++s.stats.generated;
  if (next <= env.end_time) ctx.schedule(s.node, next, RouterPayload{EventKind::Generate, 0, flow, {}});
  admit(env, s, pkt, now, ctx);
}

void handle_refill(const RouterEnv& env, RouterState& s, PortIndex port, SimTime now, RouterContext& ctx) {
  ++s.stats.events[static_cast<std::size_t>(EventKind::Refill)];
  EgressPipeline& pl = s.pipelines.at(port);
  ++pl.stats.refill_events;
  pl.shaper = periodic_refill_tick(pl.shaper, env.token_interval);
  if (now + env.token_interval <= env.end_time)
    ctx.schedule(s.node, now + env.token_interval, RouterPayload{EventKind::Refill, port, 0, {}});
  if (pl.send_flag && pl.awaiting_refill) {
    pl.awaiting_refill = false;
    try_to_send(env, s, port, now, ctx);
  }
}

NetworkModel::NetworkModel(RouterEnv env, std::vector<std::vector<SourceState>> sources, std::uint64_t seed)
    : env_(std::move(env)), sources_(std::move(sources)), seed_(seed) {
  if (!env_.topology || !env_.routes) throw ConfigError("network model needs a topology and routes");
  if (sources_.size() != env_.topology->node_count()) sources_.resize(env_.topology->node_count());
  if (env_.shaper_mode == ShaperMode::Periodic && env_.token_interval <= 0)
    throw ConfigError("periodic shaper mode needs a positive token interval");
  if (env_.ds_distribution.empty()) env_.ds_distribution = {{0, 1.0}};
  // Fail fast on bad QoS parameters rather than inside a worker thread.
  for (NodeId n = 0; n < env_.topology->node_count(); ++n) (void)make_router_state(env_, n, {}, seed_);
}

RouterState NetworkModel::initial_state(LpId lp) const {
  return make_router_state(env_, lp, sources_.at(lp), seed_);
}

void NetworkModel::init(State& s, RouterContext& ctx) const {
  for (std::size_t f = 0; f < s.sources.size(); ++f)
    if (s.sources[f].next_time <= env_.end_time)
      ctx.schedule(s.node, s.sources[f].next_time, RouterPayload{EventKind::Generate, 0, static_cast<std::uint16_t>(f), {}});
  if (env_.shaper_mode == ShaperMode::Periodic) {
    for (const EgressPipeline& pl : s.pipelines)
      if (env_.token_interval <= env_.end_time)
        ctx.schedule(s.node, env_.token_interval, RouterPayload{EventKind::Refill, pl.port, 0, {}});
  }
}

void NetworkModel::handle(State& s, const RouterEvent& ev, RouterContext& ctx) const {
  const RouterPayload& p = ev.payload;
  switch (p.kind) {
    case EventKind::Arrive: handle_arrive(env_, s, p.packet, ev.time(), ctx); break;
    case EventKind::Send: handle_send(env_, s, p.port, ev.time(), ctx); break;
    case EventKind::Generate: handle_generate(env_, s, p.flow, ev.time(), ctx); break;
    case EventKind::Refill: handle_refill(env_, s, p.port, ev.time(), ctx); break;
  }
}

}  // namespace dsnet
