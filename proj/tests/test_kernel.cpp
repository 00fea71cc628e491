#include <doctest.h>

#include <algorithm>

#include "dsnet/kernel/optimistic.hpp"
#include "dsnet/kernel/sequential.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;
using namespace dsnet::kernel;

namespace {

// PHOLD-style toy: every event bumps an order-sensitive digest and forwards
// one token to a random LP after a random delay.
struct Phold {
  struct State {
    std::uint64_t digest = 0;
    std::uint64_t handled = 0;
    CounterRng rng;
    bool operator==(const State&) const = default;
  };
  struct Payload {
    std::uint32_t hops = 0;
  };
  struct Record {
    LpId lp;
    SimTime at;
    std::uint64_t digest;
    bool operator==(const Record&) const = default;
  };

  std::size_t n = 16;
  std::size_t tokens_per_lp = 2;
  SimTime min_delay = 1;
  SimTime spread = 200;
  double remote = 0.5;
  std::uint64_t seed = 7;

  std::size_t lp_count() const { return n; }
  State initial_state(LpId lp) const { return State{0, 0, CounterRng{seed, stream_id(lp, RngPurpose::Test), 0}}; }

  void init(State& s, Context<Payload, Record>& ctx) const {
    for (std::size_t i = 0; i < tokens_per_lp; ++i)
      ctx.schedule(ctx.self(), 1 + static_cast<SimTime>(s.rng.next_below(spread)), Payload{});
  }

  void handle(State& s, const Event<Payload>& ev, Context<Payload, Record>& ctx) const {
    s.digest = splitmix64(s.digest ^ static_cast<std::uint64_t>(ev.time()) ^ (std::uint64_t{ev.key.sender} << 48) ^
                          ev.payload.hops);
    ++s.handled;
    LpId to = ctx.self();
    if (s.rng.next_unit() < remote) to = static_cast<LpId>(s.rng.next_below(n));
    ctx.schedule(to, ctx.now() + min_delay + static_cast<SimTime>(s.rng.next_below(spread)),
                 Payload{ev.payload.hops + 1});
    if (s.handled % 8 == 0) ctx.record(Record{ctx.self(), ctx.now(), s.digest});
  }
};

static_assert(Model<Phold>);

std::vector<std::uint32_t> round_robin(std::size_t n, std::size_t k) {
  std::vector<std::uint32_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<std::uint32_t>(i % k);
  return a;
}

template <class R>
void check_same(const R& seq, const R& opt) {
  CHECK(opt.records == seq.records);
  CHECK(opt.final_states == seq.final_states);
  CHECK(opt.committed_events == seq.committed_events);
  CHECK(opt.committed_events_per_lp == seq.committed_events_per_lp);
  CHECK(opt.audit.total() == 0);
  CHECK(std::is_sorted(opt.gvt_trace.begin(), opt.gvt_trace.end()));
}

}  // namespace

TEST_CASE("optimistic runs match the sequential reference") {
  const Phold model;
  const SimTime end = 20'000;
  const auto seq = run_sequential(model, end);
  REQUIRE(seq.committed_events > 1000);
  for (Runtime rt : {Runtime::Lockstep, Runtime::Threads}) {
    for (std::size_t jitter : {0u, 5u}) {
      for (std::size_t k : {1u, 2u, 3u, 4u, 8u}) {
        CAPTURE(k);
        CAPTURE(jitter);
        CAPTURE(static_cast<int>(rt));
        OptimisticOptions o;
        o.runtime = rt;
        o.transport_jitter = jitter;
        o.jitter_seed = k;
        o.gvt_interval = 64;
        o.batch_size = 4;
        const auto opt = run_optimistic(model, round_robin(model.n, k), k, end, o);
        check_same(seq, opt);
        CHECK(opt.partitions == k);
        if (k == 1) {
          CHECK(opt.rolled_back_events == 0);
          CHECK(opt.inter_partition_messages == 0);
        }
      }
    }
  }
}

TEST_CASE("skewed load forces rollbacks and anti-messages") {
  Phold model;
  model.n = 8;
  model.tokens_per_lp = 4;
  // LP 0 alone in partition 0 carries half the LPs' worth of work, so
  // partition 1 runs ahead and has to roll back when LP 0's sends arrive.
  std::vector<std::uint32_t> plan{0, 1, 1, 1, 1, 1, 1, 1};
  const auto seq = run_sequential(model, 20'000);
  OptimisticOptions o;
  o.runtime = Runtime::Lockstep;
  o.batch_size = 32;
  o.gvt_interval = 4096;
  o.transport_jitter = 20;
  const auto opt = run_optimistic(model, plan, 2, 20'000, o);
  check_same(seq, opt);
  CHECK(opt.rolled_back_events > 0);
  CHECK(opt.anti_messages > 0);
  CHECK(opt.audit.orphan_antis == 0);
}

TEST_CASE("fossil collection bounds history without changing results") {
  const Phold model;
  OptimisticOptions o;
  o.runtime = Runtime::Lockstep;
  o.gvt_interval = 32;
  const auto with = run_optimistic(model, round_robin(model.n, 4), 4, 20'000, o);
  o.fossil_collection = false;
  const auto without = run_optimistic(model, round_robin(model.n, 4), 4, 20'000, o);
  CHECK(with.records == without.records);
  CHECK(with.final_states == without.final_states);
  CHECK(with.peak_history_entries < without.peak_history_entries);
  CHECK(without.peak_history_entries >= without.committed_events);
  CHECK(with.gvt_rounds > 1);
}

TEST_CASE("plan validation") {
  const Phold model;
  CHECK_THROWS_AS(run_optimistic(model, round_robin(model.n - 1, 2), 2, 100), ConfigError);
  CHECK_THROWS_AS(run_optimistic(model, round_robin(model.n, 3), 2, 100), ConfigError);
  CHECK_THROWS_AS(run_optimistic(model, round_robin(model.n, 1), 0, 100), ConfigError);
}

TEST_CASE("compute_gvt") {
  const GvtEstimate prev{100, 4, false};
  SUBCASE("minimum over local and transit") {
    const std::vector<PartitionCut> cuts{{500, 3, 1, 0, kTimeInfinity}, {700, 1, 2, 1, 250}};
    const auto g = compute_gvt(cuts, prev, 10'000);
    REQUIRE(g);
    CHECK(g->value == 250);
    CHECK(g->round == 5);
    CHECK_FALSE(g->terminated);
  }
  SUBCASE("message in flight dominates") {
    const std::vector<PartitionCut> cuts{{200, 1, 0, 0, kTimeInfinity}, {300, 0, 0, 1, 100}};
    const auto g = compute_gvt(cuts, prev, 10'000);
    REQUIRE(g);
    CHECK(g->value == 100);
  }
  SUBCASE("counter mismatch") {
    const std::vector<PartitionCut> cuts{{500, 3, 1, 0, kTimeInfinity}, {700, 1, 2, 0, kTimeInfinity}};
    CHECK_FALSE(compute_gvt(cuts, prev, 10'000));
  }
  SUBCASE("nothing left") {
    const std::vector<PartitionCut> cuts{{kTimeInfinity, 2, 2, 0, kTimeInfinity}, {kTimeInfinity, 2, 2, 0, kTimeInfinity}};
    const auto g = compute_gvt(cuts, prev, 10'000);
    REQUIRE(g);
    CHECK(g->terminated);
    CHECK(g->value == 10'000);
  }
}

TEST_CASE("LP rollback restores state and cancels sends") {
  const Phold model;
  LpRuntime<Phold> lp(3, model.initial_state(3));
  auto init = lp.init(model);
  REQUIRE(init.size() == 2);
  std::sort(init.begin(), init.end(), [](const auto& a, const auto& b) { return a.order() < b.order(); });
  const Phold::State before = lp.state();
  const auto out1 = lp.process(model, init[0], true);
  const Phold::State mid = lp.state();
  const auto out2 = lp.process(model, init[1], true);
  CHECK(lp.history_size() == 2);

  auto r = lp.rollback(init[1].order());
  CHECK(r.repend.size() == 1);
  REQUIRE(r.antis.size() == 1);
  CHECK(r.antis[0].uid == out2[0].uid);
  CHECK(r.antis[0].sign == Sign::Anti);
  CHECK(lp.state() == mid);

  // Re-execution after rollback reproduces the same emission key.
  const auto again = lp.process(model, init[1], true);
  CHECK(again[0].key == out2[0].key);
  CHECK(again[0].uid != out2[0].uid);

  r = lp.rollback(init[0].order());
  CHECK(r.repend.size() == 2);
  CHECK(lp.state() == before);

  lp.process(model, init[0], true);
  CHECK(lp.fossil_collect(init[0].time() + 1) == 1);
  CHECK(lp.committed_events() == 1);
  CHECK_THROWS_AS(lp.rollback(init[0].order()), InvariantViolation);
  (void)out1;
}

TEST_CASE("scheduling into the past is an invariant violation") {
  struct Bad : Phold {
    void handle(State&, const Event<Payload>&, Context<Payload, Record>& ctx) const {
      ctx.schedule(ctx.self(), ctx.now(), Payload{});
    }
  };
  const Bad model;
  CHECK_THROWS_AS(run_sequential(model, 1000), InvariantViolation);
}

TEST_CASE("rollback over three processed events") {
  // One token per LP, all local, so each LP forms its own chain.
  Phold model;
  model.remote = 0.0;
  model.tokens_per_lp = 1;
  LpRuntime<Phold> lp(0, model.initial_state(0));
  auto pending = lp.init(model);
  std::vector<Event<Phold::Payload>> processed;
  std::vector<std::uint64_t> emitted_uids;
  for (int i = 0; i < 4; ++i) {
    const auto ev = pending.front();
    pending = lp.process(model, ev, true);
    processed.push_back(ev);
    emitted_uids.push_back(pending.front().uid);
  }
  const Phold::State after_first = lp.history()[1].pre_state;

  // Straggler between event 0 and event 1: events 1-3 are undone.
  OrderKey straggler = processed[1].order();
  straggler.key.sender_seq = 0;
  straggler.key.sender = 0;
  straggler.uid = 0;
  REQUIRE(processed[0].order() < straggler);
  REQUIRE(straggler < processed[1].order());
  auto r = lp.rollback(straggler);
  CHECK(r.repend.size() == 3);
  std::vector<std::uint64_t> anti_uids;
  for (const auto& a : r.antis) anti_uids.push_back(a.uid);
  std::sort(anti_uids.begin(), anti_uids.end());
  CHECK(anti_uids == std::vector<std::uint64_t>{emitted_uids[1], emitted_uids[2], emitted_uids[3]});
  CHECK(lp.state() == after_first);
  CHECK(lp.history_size() == 1);

  // A key just past the clock undoes nothing.
  OrderKey later = lp.clock().value();
  later.key.recv_time += 1;
  r = lp.rollback(later);
  CHECK(r.repend.empty());
  CHECK(r.antis.empty());
}

TEST_CASE("fossil collection boundaries") {
  Phold model;
  model.remote = 0.0;
  LpRuntime<Phold> lp(0, model.initial_state(0));
  auto init = lp.init(model);
  std::sort(init.begin(), init.end(), [](const auto& a, const auto& b) { return a.order() < b.order(); });
  for (const auto& ev : init) lp.process(model, ev, true);
  CHECK(lp.fossil_collect(0) == 0);
  CHECK(lp.history_size() == init.size());
  CHECK(lp.fossil_collect(kTimeInfinity) == init.size());
  CHECK(lp.history_size() == 0);
}
