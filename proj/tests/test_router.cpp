#include <doctest.h>

#include "dsnet/kernel/lp.hpp"
#include "dsnet/kernel/sequential.hpp"
#include "dsnet/router.hpp"

using namespace dsnet;

namespace {

constexpr std::uint64_t kGbps = 1'000'000'000ULL;

struct Fixture {
  RouterEnv env;
  RouterState s;
  std::uint64_t seq = 0;

  explicit Fixture(ShaperMode mode = ShaperMode::Lazy) {
    auto topo = std::make_shared<const Topology>(
        Topology({{0, NodeTier::Mixed, 1}, {1, NodeTier::Kernel, 1}}, {Link{0, 0, 1, 0, kGbps, 1000}}));
    env.topology = topo;
    env.routes = std::make_shared<const RoutingTable>(compute_routes(*topo));
    env.shaper_mode = mode;
    env.token_interval = mode == ShaperMode::Periodic ? 1000 : 0;
    env.end_time = kNanosPerSecond;
    env.ds_distribution = {{0, 1.0}};
    s = make_router_state(env, 0, {}, 1);
  }

  RouterContext ctx(SimTime now) { return RouterContext(0, now, seq); }
  EgressPipeline& port() { return s.pipelines[0]; }
};

Packet packet(std::uint64_t id, NodeId dst, std::uint8_t ds = 0, std::uint32_t size = 1400) {
  Packet p;
  p.id = id;
  p.src = 0;
  p.dst = dst;
  p.size = size;
  p.ds_field = ds;
  return p;
}

// 1400 bytes on 1 Gb/s.
constexpr SimTime kTx = 11200;

}  // namespace

TEST_CASE("transmission time rounds up") {
  CHECK(transmission_ns(1400, kGbps) == kTx);
  CHECK(transmission_ns(1, 3 * kGbps) == 3);  // 8/3 ns
  CHECK(transmission_ns(1400, 25 * kGbps) == 448);
}

TEST_CASE("packet for this node is delivered with no events") {
  Fixture f;
  auto ctx = f.ctx(500);
  Packet p = packet(1, 0);
  p.created_at = 100;
  handle_arrive(f.env, f.s, p, 500, ctx);
  CHECK(ctx.emitted().empty());
  REQUIRE(ctx.records().size() == 1);
  CHECK(ctx.records()[0].delivered_ns == 500);
  CHECK(ctx.records()[0].drop_stage == DropStage::None);
  CHECK(f.s.stats.delivered == 1);
}

TEST_CASE("idle port with full shaper forwards immediately") {
  Fixture f;
  auto ctx = f.ctx(0);
  handle_arrive(f.env, f.s, packet(1, 1), 0, ctx);
  REQUIRE(ctx.emitted().size() == 1);
  const auto& e = ctx.emitted()[0];
  CHECK(e.key.target == 1);
  CHECK(e.payload.kind == EventKind::Arrive);
  CHECK(e.key.recv_time == kTx + 1000);
  CHECK(e.payload.packet.color == Color::Green);
  CHECK_FALSE(f.port().send_flag);
}

TEST_CASE("busy port only queues") {
  Fixture f;
  f.port().send_flag = true;
  auto ctx = f.ctx(0);
  handle_arrive(f.env, f.s, packet(1, 1), 0, ctx);
  CHECK(ctx.emitted().empty());
  CHECK(f.port().queues[2].packets.size() == 1);
}

TEST_CASE("try-to-send loop") {
  SUBCASE("three packets covered: three arrivals, no SEND, flag cleared") {
    Fixture f;
    for (std::uint64_t id = 1; id <= 3; ++id) f.port().queues[2].push(packet(id, 1));
    f.port().send_flag = true;
    auto ctx = f.ctx(0);
    try_to_send(f.env, f.s, 0, 0, ctx);
    REQUIRE(ctx.emitted().size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(ctx.emitted()[i].payload.kind == EventKind::Arrive);
      CHECK(ctx.emitted()[i].payload.packet.id == i + 1);  // FIFO within the class
      // Back-to-back on the wire.
      CHECK(ctx.emitted()[i].key.recv_time == static_cast<SimTime>(i + 1) * kTx + 1000);
    }
    CHECK_FALSE(f.port().send_flag);
  }
  SUBCASE("empty queues clear the flag") {
    Fixture f;
    f.port().send_flag = true;
    auto ctx = f.ctx(0);
    try_to_send(f.env, f.s, 0, 0, ctx);
    CHECK(ctx.emitted().empty());
    CHECK_FALSE(f.port().send_flag);
  }
  SUBCASE("tokens for the first packet only: one arrival and one SEND") {
    Fixture f;
    f.port().shaper.tokens = to_scaled(2000);
    f.port().queues[2].push(packet(1, 1));
    f.port().queues[2].push(packet(2, 1));
    f.port().send_flag = true;
    auto ctx = f.ctx(0);
    try_to_send(f.env, f.s, 0, 0, ctx);
    REQUIRE(ctx.emitted().size() == 2);
    CHECK(ctx.emitted()[0].payload.kind == EventKind::Arrive);
    CHECK(ctx.emitted()[1].payload.kind == EventKind::Send);
    // Shaper at 0.8 Gb/s = 1e8 B/s; 600 bytes left, 800 missing -> 8 us.
    CHECK(ctx.emitted()[1].key.recv_time == 8000);
    CHECK(f.port().send_flag);
    CHECK(f.port().stats.blocked_episodes == 1);
  }
}

TEST_CASE("SEND handling") {
  SUBCASE("insufficient tokens schedules SEND at the earliest ready time") {
    Fixture f;
    f.port().shaper.tokens = 0;
    f.port().queues[2].push(packet(1, 1));
    f.port().send_flag = true;
    auto ctx = f.ctx(100);
    handle_send(f.env, f.s, 0, 100, ctx);
    REQUIRE(ctx.emitted().size() == 1);
    CHECK(ctx.emitted()[0].payload.kind == EventKind::Send);
    // Refilled to 100 ns first: 10 bytes accrued, 1390 missing -> 13.9 us.
    CHECK(ctx.emitted()[0].key.recv_time == 100 + 13900);
    CHECK(f.port().send_flag);
  }
  SUBCASE("higher priority arrival before the SEND goes first") {
    Fixture f;
    f.port().shaper.tokens = 0;
    f.port().shaper.last_update = 0;
    auto c0 = f.ctx(0);
    handle_arrive(f.env, f.s, packet(1, 1, 0), 0, c0);  // best effort, blocked
    REQUIRE(c0.emitted().size() == 1);
    const SimTime send_at = c0.emitted()[0].key.recv_time;
    auto c1 = f.ctx(10);
    handle_arrive(f.env, f.s, packet(2, 1, 46), 10, c1);  // EF
    CHECK(c1.emitted().empty());
    auto c2 = f.ctx(send_at);
    handle_send(f.env, f.s, 0, send_at, c2);
    REQUIRE_FALSE(c2.emitted().empty());
    CHECK(c2.emitted()[0].payload.packet.id == 2);
  }
  SUBCASE("stale SEND is ignored and counted") {
    Fixture f;
    auto ctx = f.ctx(5);
    handle_send(f.env, f.s, 0, 5, ctx);
    CHECK(ctx.emitted().empty());
    CHECK(f.port().stats.stale_sends == 1);
  }
}

TEST_CASE("routing drop is recorded") {
  Fixture f;
  auto ctx = f.ctx(0);
  handle_arrive(f.env, f.s, packet(1, 9), 0, ctx);
  REQUIRE(ctx.records().size() == 1);
  CHECK(ctx.records()[0].drop_stage == DropStage::Routing);
  CHECK(ctx.records()[0].drop_node == 0u);
}

TEST_CASE("burst smaller than a packet is a configuration error") {
  Fixture f;
  f.env.qos.by_tier[static_cast<std::size_t>(NodeTier::Mixed)].shaper_burst = 1000;
  CHECK_THROWS_AS(make_router_state(f.env, 0, {}, 1), ConfigError);
}

TEST_CASE("periodic mode waits for REFILL") {
  Fixture f(ShaperMode::Periodic);
  f.port().shaper.tokens = 0;
  auto c0 = f.ctx(0);
  handle_arrive(f.env, f.s, packet(1, 1), 0, c0);
  CHECK(c0.emitted().empty());
  CHECK(f.port().awaiting_refill);
  // 1e8 B/s * 1 us = 100 bytes per tick; the 14th tick completes 1400 bytes.
  SimTime t = 0;
  std::size_t arrivals = 0;
  for (int tick = 1; tick <= 14; ++tick) {
    t += 1000;
    auto c = f.ctx(t);
    handle_refill(f.env, f.s, 0, t, c);
    for (const auto& e : c.emitted())
      if (e.payload.kind == EventKind::Arrive) {
        ++arrivals;
        CHECK(tick == 14);
      }
  }
  CHECK(arrivals == 1);
  CHECK_FALSE(f.port().send_flag);
}

TEST_CASE("REFILL count over a horizon") {
  // Ports * floor(end / interval); halving the interval doubles the count.
  auto count_refills = [](SimTime interval) {
    Fixture f(ShaperMode::Periodic);
    f.env.token_interval = interval;
    f.env.end_time = 1'000'000;
    const NetworkModel model(f.env, {}, 1);
    const auto r = kernel::run_sequential(model, f.env.end_time);
    std::uint64_t n = 0;
    for (const auto& s : r.final_states) n += s.stats.events[static_cast<std::size_t>(EventKind::Refill)];
    return n;
  };
  CHECK(count_refills(10'000) == 2 * 100);
  CHECK(count_refills(5'000) == 2 * 200);
}

TEST_CASE("network run accounts for every packet") {
  SyntheticTopologyParams tp;
  auto topo = std::make_shared<const Topology>(generate_synthetic_topology(tp));
  RouterEnv env;
  env.topology = topo;
  env.routes = std::make_shared<const RoutingTable>(compute_routes(*topo));
  env.end_time = 2'000'000;
  env.ds_distribution = {{46, 0.2}, {26, 0.3}, {0, 0.5}};
  // Tight shaper so queues build up and RED acts.
  for (auto& p : env.qos.by_tier) p.shaper_rate_bps = 500'000'000;
  TrafficSpec spec;
  spec.rate_pps = 200'000;
  const NetworkModel model(env, build_sources(spec, *topo, 5), 5);
  const auto r = kernel::run_sequential(model, env.end_time);

  std::uint64_t generated = 0, delivered = 0, dropped = 0, queued = 0;
  for (const RouterState& s : r.final_states) {
    generated += s.stats.generated;
    delivered += s.stats.delivered;
    dropped += s.stats.dropped_red + s.stats.dropped_queue_full + s.stats.dropped_routing;
    for (const EgressPipeline& pl : s.pipelines) {
      for (const ClassQueue& q : pl.queues) {
        queued += q.packets.size();
        CHECK(q.byte_length <= q.capacity);
      }
      // Flag soundness at the end of the run.
      bool any = false;
      for (const ClassQueue& q : pl.queues) any = any || !q.empty();
      if (any) CHECK(pl.send_flag);
      // Event economy.
      CHECK(pl.stats.send_events <= pl.stats.arrivals + pl.stats.blocked_episodes);
      CHECK(pl.stats.redundant_sends == 0);
      CHECK(pl.shaper.tokens <= pl.shaper.capacity);
    }
  }
  CHECK(generated > 0);
  CHECK(dropped > 0);
  CHECK(delivered + dropped == r.records.size());
  CHECK(delivered + dropped + queued <= generated);
  // Everything not recorded is either queued or on a wire.
  CHECK(generated - delivered - dropped >= queued);
}

TEST_CASE("router state copies are lossless") {
  Fixture f;
  f.port().queues[1].push(packet(3, 1));
  f.port().send_flag = true;
  const RouterState copy = f.s;
  CHECK(copy == f.s);
}

TEST_CASE("one packet over two nodes arrives at tx + propagation") {
  TrafficSpec spec;
  spec.pattern = TrafficPattern::ExplicitFlows;
  spec.random_phase = false;
  spec.flows = {{0, 1, 1.0, 0}};  // 1 pps: a single packet at t = 0 within the horizon
  for (SimTime end : {SimTime{1'000'000}, SimTime{0}}) {
    Fixture f;
    f.env.end_time = end;
    const NetworkModel model(f.env, build_sources(spec, *f.env.topology, 1), 1);
    const auto r = kernel::run_sequential(model, end);
    std::size_t delivered = 0;
    for (const auto& rec : r.records)
      if (rec.delivered_ns) {
        ++delivered;
        CHECK(rec.created_ns == 0);
        CHECK(*rec.delivered_ns == 11'200 + 1'000);  // 1400 B at 1 Gbps, then 1 us of wire
      }
    CHECK(delivered == (end > 0 ? 1u : 0u));
  }
}

TEST_CASE("LP-level handling of sink arrivals and refills") {
  Fixture f(ShaperMode::Periodic);
  const NetworkModel model(f.env, {}, 1);
  kernel::LpRuntime<NetworkModel> lp(1, model.initial_state(1));
  RouterEvent arrive;
  arrive.key = {500, 1, 0, 0};
  arrive.uid = 1;
  arrive.payload.kind = EventKind::Arrive;
  arrive.payload.packet = packet(9, 1);
  CHECK(lp.process(model, arrive, true).empty());
  CHECK(lp.history_size() == 1);
  CHECK(lp.history().back().records.size() == 1);

  RouterEvent refill;
  refill.key = {1000, 1, 1, 0};
  refill.uid = 2;
  refill.payload.kind = EventKind::Refill;
  const auto out = lp.process(model, refill, true);
  REQUIRE(out.size() == 1);
  CHECK(out[0].target() == 1);
  CHECK(out[0].payload.kind == EventKind::Refill);
  CHECK(out[0].time() == 1000 + f.env.token_interval);
}
