#pragma once

// Time Warp scheduler. Each partition owns a disjoint set of LPs and its own
// pending queue; inter-partition events travel over per-partition inbound
// channels that preserve per-sender order. GVT rounds are a barrier-
// synchronised two-phase cut: phase one flushes every outbound buffer and
// stops all senders, phase two collects local minima, channel contents and
// send/receive counters.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <vector>

#include "dsnet/kernel/gvt.hpp"
#include "dsnet/kernel/lp.hpp"
#include "dsnet/kernel/report.hpp"
#include "dsnet/rng.hpp"

namespace dsnet::kernel {

template <Model M>
class OptimisticEngine {
 public:
  using State = typename M::State;
  using Record = typename M::Record;
  using Ev = Event<typename M::Payload>;
  using Report = KernelReport<State, Record>;

  OptimisticEngine(const M& model, std::vector<std::uint32_t> assignment, std::size_t k, SimTime end_time,
                   OptimisticOptions options)
      : model_(model), assignment_(std::move(assignment)), k_(k), end_time_(end_time), opt_(options) {
    const std::size_t n = model_.lp_count();
    if (k_ == 0) throw ConfigError("partition count must be at least 1");
    if (assignment_.size() != n) throw ConfigError("partition plan does not cover every LP");
    for (auto p : assignment_)
      if (p >= k_) throw ConfigError("partition plan uses index " + std::to_string(p) + " >= k");
    if (opt_.batch_size == 0) opt_.batch_size = 1;
    if (opt_.gvt_interval == 0) opt_.gvt_interval = 1;
    for (std::size_t i = 0; i < k_; ++i) {
      workers_.push_back(std::make_unique<Worker>());
      Worker& w = *workers_.back();
      w.id = i;
      w.outbox.resize(k_);
      w.jitter = CounterRng{opt_.jitter_seed, 0x6a69747465720000ULL + i, 0};
    }
    lps_.reserve(n);
    for (LpId i = 0; i < n; ++i) {
      lps_.emplace_back(i, model_.initial_state(i));
      Worker& w = *workers_[assignment_[i]];
      w.lps.push_back(i);
      for (Ev& e : lps_.back().init(model_)) {
        DSNET_CHECK(e.target() < n, "event targets an unknown LP");
        Worker& dest = *workers_[assignment_[e.target()]];
        dest.pending.emplace(e.order(), std::move(e));
      }
    }
    cuts_.resize(k_);
  }

  Report run() {
    start_ = std::chrono::steady_clock::now();
    last_progress_ = start_;
    if (opt_.runtime == Runtime::Threads && k_ > 1)
      run_threads();
    else
      run_lockstep();
    if (watchdog_fired_)
      throw WatchdogError("no GVT progress for " + std::to_string(opt_.watchdog_seconds) + " s (GVT stuck at " +
                          std::to_string(gvt_.value) + " ns)");
    for (auto& w : workers_)
      if (w->error) std::rethrow_exception(w->error);
    return assemble();
  }

 private:
  struct Worker {
    std::size_t id = 0;
    std::vector<LpId> lps;
    std::map<OrderKey, Ev> pending;
    std::mutex inbox_mu;
    std::vector<Ev> inbox;
    std::deque<Ev> local;
    std::vector<std::deque<std::pair<std::uint64_t, Ev>>> outbox;
    std::unordered_set<std::uint64_t> orphan_antis;
    CounterRng jitter;
    std::uint64_t step = 0;
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    std::uint64_t rolled_back = 0;
    std::uint64_t inter_partition = 0;
    std::uint64_t antis = 0;
    std::uint64_t processed = 0;
    std::uint64_t committed = 0;
    std::uint64_t events_below_gvt = 0;
    std::uint64_t out_of_order = 0;
    std::size_t since_round = 0;
    std::size_t idle_spins = 0;
    std::size_t history_entries = 0;
    std::size_t peak_history = 0;
    bool done = false;
    std::exception_ptr error;
  };

  struct RoundCompletion {
    OptimisticEngine* engine;
    void operator()() noexcept { engine->complete_round(); }
  };

  // --- event routing -------------------------------------------------------

  void send(Worker& w, Ev ev) {
    if (ev.sign == Sign::Anti) ++w.antis;
    const std::uint32_t dest = assignment_[ev.target()];
    if (dest == w.id) {
      w.local.push_back(std::move(ev));
      return;
    }
    if (ev.sign == Sign::Positive) ++w.inter_partition;
    const std::uint64_t delay = opt_.transport_jitter ? w.jitter.next_below(opt_.transport_jitter + 1) : 0;
    w.outbox[dest].emplace_back(w.step + delay, std::move(ev));
  }

  void flush(Worker& w, bool force) {
    for (std::size_t d = 0; d < k_; ++d) {
      auto& q = w.outbox[d];
      if (q.empty()) continue;
      std::vector<Ev> batch;
      while (!q.empty() && (force || q.front().first <= w.step)) {
        batch.push_back(std::move(q.front().second));
        q.pop_front();
      }
      if (batch.empty()) continue;
      w.sent += batch.size();
      Worker& dest = *workers_[d];
      std::lock_guard lock(dest.inbox_mu);
      for (Ev& e : batch) dest.inbox.push_back(std::move(e));
    }
  }

  void rollback(Worker& w, LpRuntime<M>& lp, const OrderKey& to) {
    auto res = lp.rollback(to);
    w.rolled_back += res.repend.size();
    w.history_entries -= res.repend.size();
    for (Ev& e : res.repend) w.pending.emplace(e.order(), std::move(e));
    for (Ev& a : res.antis) send(w, std::move(a));
  }

  void deliver(Worker& w, Ev ev) {
    LpRuntime<M>& lp = lps_[ev.target()];
    if (opt_.audit && ev.time() < gvt_now_.load(std::memory_order_relaxed)) ++w.events_below_gvt;
    const OrderKey key = ev.order();
    if (ev.sign == Sign::Positive) {
      if (auto it = w.orphan_antis.find(ev.uid); it != w.orphan_antis.end()) {
        w.orphan_antis.erase(it);
        return;
      }
      if (const auto clock = lp.clock(); clock && key < *clock) rollback(w, lp, key);
      w.pending.emplace(key, std::move(ev));
      return;
    }
    if (w.pending.erase(key)) return;
    if (const auto clock = lp.clock(); clock && !(*clock < key)) {
      rollback(w, lp, key);
      const bool annihilated = w.pending.erase(key) > 0;
      DSNET_CHECK(annihilated, "anti-message matched no processed event");
      return;
    }
    w.orphan_antis.insert(ev.uid);
  }

  void drain_local(Worker& w) {
    while (!w.local.empty()) {
      Ev ev = std::move(w.local.front());
      w.local.pop_front();
      deliver(w, std::move(ev));
    }
  }

  void drain_inbox(Worker& w) {
    std::vector<Ev> batch;
    {
      std::lock_guard lock(w.inbox_mu);
      batch.swap(w.inbox);
    }
    w.received += batch.size();
    for (Ev& e : batch) deliver(w, std::move(e));
    drain_local(w);
  }

  std::size_t process_batch(Worker& w) {
    std::size_t n = 0;
    while (n < opt_.batch_size && !w.pending.empty()) {
      auto it = w.pending.begin();
      if (it->second.time() > end_time_) break;
      Ev ev = std::move(it->second);
      w.pending.erase(it);
      std::vector<Ev> out = lps_[ev.target()].process(model_, ev, true);
      ++w.processed;
      ++w.history_entries;
      w.peak_history = std::max(w.peak_history, w.history_entries);
      for (Ev& e : out) {
        DSNET_CHECK(e.target() < lps_.size(), "event targets an unknown LP");
        send(w, std::move(e));
      }
      drain_local(w);
      ++n;
    }
    return n;
  }

  // --- GVT ---------------------------------------------------------------

  PartitionCut make_cut(Worker& w) {
    PartitionCut c;
    auto clip = [&](SimTime t) { return t > end_time_ ? kTimeInfinity : t; };
    if (!w.pending.empty()) c.local_min = clip(w.pending.begin()->second.time());
    for (const Ev& e : w.local) c.local_min = std::min(c.local_min, clip(e.time()));
    c.sent = w.sent;
    c.received = w.received;
    std::lock_guard lock(w.inbox_mu);
    c.in_transit = w.inbox.size();
    for (const Ev& e : w.inbox) c.transit_min = std::min(c.transit_min, clip(e.time()));
    return c;
  }

  void complete_round() {
    const auto est = compute_gvt(cuts_, gvt_, end_time_);
    const auto now = std::chrono::steady_clock::now();
    if (!est) {
      ++audit_.counter_retries;
    } else {
      if (est->value < gvt_.value) ++audit_.gvt_regressions;
      if (est->value > gvt_.value || est->terminated) last_progress_ = now;
      gvt_ = *est;
      gvt_now_.store(gvt_.value, std::memory_order_relaxed);
      trace_.push_back(gvt_.value);
      GvtSample s{gvt_.round, gvt_.value, 0, 0, 0, 0};
      for (auto& w : workers_) {
        s.committed_events += w->committed;
        s.rolled_back_events += w->rolled_back;
        s.inter_partition_messages += w->inter_partition;
        s.history_entries += w->history_entries;
      }
      series_.push_back(s);
    }
    if (std::chrono::duration<double>(now - last_progress_).count() > opt_.watchdog_seconds) {
      watchdog_fired_ = true;
      abort_.store(true);
    }
    round_valid_ = est.has_value();
    finished_ = (est && est->terminated) || abort_.load();
    round_requested_.store(false);
  }

  void after_round(Worker& w) {
    w.since_round = 0;
    if (finished_) {
      w.done = true;
      return;
    }
    if (round_valid_ && opt_.fossil_collection) {
      for (LpId id : w.lps) {
        const std::size_t r = lps_[id].fossil_collect(gvt_.value, opt_.audit ? &w.out_of_order : nullptr);
        w.history_entries -= r;
        w.committed += r;
      }
    }
  }

  // --- runtimes ------------------------------------------------------------

  void run_lockstep() {
    for (;;) {
      bool progressed = false;
      bool want_round = false;
      for (auto& wp : workers_) {
        Worker& w = *wp;
        drain_inbox(w);
        const std::size_t n = process_batch(w);
        flush(w, false);
        ++w.step;
        w.since_round += n;
        progressed |= n > 0;
        want_round |= w.since_round >= opt_.gvt_interval;
      }
      if (!want_round && progressed) continue;
      for (auto& w : workers_) flush(*w, true);
      for (std::size_t i = 0; i < k_; ++i) cuts_[i] = make_cut(*workers_[i]);
      complete_round();
      for (auto& w : workers_) after_round(*w);
      if (finished_) return;
    }
  }

  void run_threads() {
    std::barrier<> phase_one(static_cast<std::ptrdiff_t>(k_));
    std::barrier<RoundCompletion> phase_two(static_cast<std::ptrdiff_t>(k_), RoundCompletion{this});
    constexpr std::size_t kIdleSpinsBeforeRound = 256;

    auto body = [&](Worker& w) {
      while (!w.done) {
        if (round_requested_.load()) {
          flush(w, true);
          phase_one.arrive_and_wait();
          cuts_[w.id] = make_cut(w);
          phase_two.arrive_and_wait();
          after_round(w);
          continue;
        }
        try {
          if (abort_.load()) {
            round_requested_.store(true);
            continue;
          }
          drain_inbox(w);
          const std::size_t n = process_batch(w);
          flush(w, false);
          ++w.step;
          w.since_round += n;
          if (n == 0) {
            if (++w.idle_spins >= kIdleSpinsBeforeRound) {
              w.idle_spins = 0;
              round_requested_.store(true);
            }
            std::this_thread::yield();
          } else {
            w.idle_spins = 0;
            if (oversubscribed_) std::this_thread::yield();
          }
          if (w.since_round >= opt_.gvt_interval) round_requested_.store(true);
        } catch (...) {
          w.error = std::current_exception();
          abort_.store(true);
          round_requested_.store(true);
        }
      }
    };

    std::vector<std::thread> threads;
    threads.reserve(k_);
    for (auto& w : workers_) threads.emplace_back(body, std::ref(*w));
    for (auto& t : threads) t.join();
  }

  Report assemble() {
    Report report;
    report.partitions = k_;
    report.committed_events_per_lp.reserve(lps_.size());
    for (auto& w : workers_) {
      for (LpId id : w->lps) {
        const std::size_t r = lps_[id].fossil_collect(kTimeInfinity, opt_.audit ? &w->out_of_order : nullptr);
        w->committed += r;
      }
      report.rolled_back_events += w->rolled_back;
      report.inter_partition_messages += w->inter_partition;
      report.anti_messages += w->antis;
      report.peak_history_entries += w->peak_history;
      report.audit.events_below_gvt += w->events_below_gvt;
      report.audit.out_of_order_commits += w->out_of_order;
      report.audit.orphan_antis += w->orphan_antis.size();
    }
    for (auto& lp : lps_) {
      report.committed_events_per_lp.push_back(lp.committed_events());
      report.committed_events += lp.committed_events();
      for (auto& r : lp.committed_records()) report.records.push_back(std::move(r));
      report.final_states.push_back(lp.state());
    }
    report.audit.gvt_regressions = audit_.gvt_regressions;
    report.audit.counter_retries = audit_.counter_retries;
    report.gvt_rounds = gvt_.round;
    report.gvt_series = std::move(series_);
    report.gvt_trace = std::move(trace_);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return report;
  }

  const M& model_;
  std::vector<std::uint32_t> assignment_;
  std::size_t k_;
  SimTime end_time_;
  OptimisticOptions opt_;
  std::vector<LpRuntime<M>> lps_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<PartitionCut> cuts_;

  GvtEstimate gvt_{};
  std::atomic<SimTime> gvt_now_{0};
  std::atomic<bool> round_requested_{false};
  std::atomic<bool> abort_{false};
  // More partitions than hardware threads: yield after every batch so the
  // scheduler interleaves partitions instead of letting one run far ahead.
  bool oversubscribed_ = std::thread::hardware_concurrency() < k_;
  bool round_valid_ = false;
  bool finished_ = false;
  bool watchdog_fired_ = false;
  AuditCounters audit_;
  std::vector<GvtSample> series_;
  std::vector<SimTime> trace_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_progress_;
};

template <Model M>
KernelReport<typename M::State, typename M::Record> run_optimistic(const M& model,
                                                                   std::vector<std::uint32_t> assignment,
                                                                   std::size_t k, SimTime end_time,
                                                                   OptimisticOptions options = {}) {
  OptimisticEngine<M> engine(model, std::move(assignment), k, end_time, options);
  return engine.run();
}

}  // namespace dsnet::kernel
