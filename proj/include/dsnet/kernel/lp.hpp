#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "dsnet/kernel/event.hpp"

namespace dsnet::kernel {

// One logical process: its state, its processed-event history with pre-event
// snapshots, and everything already committed below GVT.
template <Model M>
class LpRuntime {
 public:
  using State = typename M::State;
  using Payload = typename M::Payload;
  using Record = typename M::Record;
  using Ev = Event<Payload>;

  struct SentRef {
    EventKey key;
    std::uint64_t uid;
  };

  struct HistoryEntry {
    Ev event;
    State pre_state;
    std::uint64_t pre_seq;
    std::vector<SentRef> sent;
    std::vector<Record> records;
  };

  struct RollbackResult {
    std::vector<Ev> repend;  // undone events, to be re-queued
    std::vector<Ev> antis;   // cancellations of everything they emitted
  };

  LpRuntime(LpId id, State initial) : id_(id), state_(std::move(initial)) {}

  LpId id() const { return id_; }
  const State& state() const { return state_; }
  State& state() { return state_; }

  // Runs the model's init hook; returns the initial events.
  std::vector<Ev> init(const M& model) {
    Context<Payload, Record> ctx(id_, -1, next_seq_);
    model.init(state_, ctx);
    for (auto& r : ctx.records()) committed_records_.push_back(std::move(r));
    return materialize(ctx);
  }

  // Executes `ev` (which must be the smallest pending event of this LP).
  // With `keep_history`, a pre-event snapshot and the emission log are kept
  // for rollback; otherwise records are committed immediately.
  std::vector<Ev> process(const M& model, const Ev& ev, bool keep_history) {
    DSNET_CHECK(ev.sign == Sign::Positive, "only positive events are processed");
    DSNET_CHECK(ev.target() == id_, "event delivered to the wrong LP");
    const OrderKey ok = ev.order();
    if (const auto c = clock(); c && !(*c < ok))
      invariant_failed("clock < event", __FILE__, __LINE__, "LP " + std::to_string(id_) + " processed out of order");

    Context<Payload, Record> ctx(id_, ev.time(), next_seq_);
    if (keep_history) {
      HistoryEntry entry{ev, state_, next_seq_, {}, {}};
      model.handle(state_, ev, ctx);
      std::vector<Ev> out = materialize(ctx);
      entry.sent.reserve(out.size());
      for (const Ev& e : out) entry.sent.push_back(SentRef{e.key, e.uid});
      entry.records = std::move(ctx.records());
      history_.push_back(std::move(entry));
      return out;
    }
    model.handle(state_, ev, ctx);
    for (auto& r : ctx.records()) committed_records_.push_back(std::move(r));
    ++committed_events_;
    committed_bound_ = ok;
    return materialize(ctx);
  }

  // Key of the last processed event, if any.
  std::optional<OrderKey> clock() const {
    if (!history_.empty()) return history_.back().event.order();
    return committed_bound_;
  }

  // Undoes every processed event with order >= `to`. Throws
  // InvariantViolation if that would reach below the committed horizon.
  RollbackResult rollback(const OrderKey& to) {
    if (committed_bound_ && !(*committed_bound_ < to))
      invariant_failed("committed_bound < to", __FILE__, __LINE__,
                       "rollback of LP " + std::to_string(id_) + " targets a fossil-collected snapshot");
    RollbackResult result;
    while (!history_.empty() && !(history_.back().event.order() < to)) {
      HistoryEntry& e = history_.back();
      state_ = std::move(e.pre_state);
      next_seq_ = e.pre_seq;
      for (const SentRef& s : e.sent) result.antis.push_back(Ev{s.key, s.uid, Sign::Anti, Payload{}});
      result.repend.push_back(std::move(e.event));
      history_.pop_back();
    }
    return result;
  }

  // Commits history entries older than `gvt`. Returns the number reclaimed.
  // `out_of_order` is incremented for every committed event that does not
  // follow its predecessor in key order (causality audit).
  std::size_t fossil_collect(SimTime gvt, std::uint64_t* out_of_order = nullptr) {
    std::size_t reclaimed = 0;
    while (!history_.empty() && history_.front().event.time() < gvt) {
      HistoryEntry& e = history_.front();
      if (out_of_order && committed_bound_ && !(*committed_bound_ < e.event.order())) ++*out_of_order;
      committed_bound_ = e.event.order();
      for (auto& r : e.records) committed_records_.push_back(std::move(r));
      ++committed_events_;
      history_.pop_front();
      ++reclaimed;
    }
    return reclaimed;
  }

  std::size_t history_size() const { return history_.size(); }
  const std::deque<HistoryEntry>& history() const { return history_; }
  std::uint64_t committed_events() const { return committed_events_; }
  std::vector<Record>& committed_records() { return committed_records_; }
  const std::optional<OrderKey>& committed_bound() const { return committed_bound_; }

 private:
  std::vector<Ev> materialize(Context<Payload, Record>& ctx) {
    std::vector<Ev> out;
    out.reserve(ctx.emitted().size());
    for (auto& em : ctx.emitted())
      out.push_back(Ev{em.key, (static_cast<std::uint64_t>(id_) << 40) | next_uid_++, Sign::Positive,
                       std::move(em.payload)});
    return out;
  }

  LpId id_;
  State state_;
  std::uint64_t next_seq_ = 0;  // rolled back with state
  std::uint64_t next_uid_ = 0;  // never rolled back
  std::deque<HistoryEntry> history_;
  std::optional<OrderKey> committed_bound_;
  std::vector<Record> committed_records_;
  std::uint64_t committed_events_ = 0;
};

}  // namespace dsnet::kernel
