#pragma once

#include <compare>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/common.hpp"

namespace dsnet::kernel {

enum class Sign : std::uint8_t { Positive, Anti };

// Total order over events. The sender identity and its deterministic
// per-LP sequence number break timestamp ties, which is what makes
// sequential and optimistic executions produce identical results.
struct EventKey {
  SimTime recv_time = 0;
  LpId target = 0;
  LpId sender = 0;
  std::uint64_t sender_seq = 0;

  auto operator<=>(const EventKey&) const = default;
};

// EventKey plus the emission uid. Keys of live positive events are unique
// except transiently after a rollback re-emits an event whose anti-message
// has not landed yet; the uid keeps such pairs distinct.
struct OrderKey {
  EventKey key;
  std::uint64_t uid = 0;

  auto operator<=>(const OrderKey&) const = default;
};

template <class Payload>
struct Event {
  EventKey key;
  std::uint64_t uid = 0;  // never reused; anti-messages match on it
  Sign sign = Sign::Positive;
  Payload payload{};

  SimTime time() const { return key.recv_time; }
  LpId target() const { return key.target; }
  OrderKey order() const { return {key, uid}; }

  Event anti() const { return Event{key, uid, Sign::Anti, Payload{}}; }
};

// Handed to model handlers. Collects emitted events and output records.
template <class Payload, class Record>
class Context {
 public:
  Context(LpId self, SimTime now, std::uint64_t& next_seq) : self_(self), now_(now), next_seq_(next_seq) {}

  LpId self() const { return self_; }
  SimTime now() const { return now_; }

  // Events must land strictly in the future; zero-delay self-scheduling
  // would make the local clock ambiguous.
  void schedule(LpId target, SimTime at, Payload payload) {
    if (at <= now_)
      invariant_failed("at > now", __FILE__, __LINE__,
                       "event scheduled in the past: at=" + std::to_string(at) + " now=" + std::to_string(now_));
    emitted_.push_back(Emission{EventKey{at, target, self_, next_seq_++}, std::move(payload)});
  }

  void record(Record r) { records_.push_back(std::move(r)); }

  struct Emission {
    EventKey key;
    Payload payload;
  };

  std::vector<Emission>& emitted() { return emitted_; }
  std::vector<Record>& records() { return records_; }

 private:
  LpId self_;
  SimTime now_;
  std::uint64_t& next_seq_;
  std::vector<Emission> emitted_;
  std::vector<Record> records_;
};

// What the kernel needs from a simulation model. State must be copyable
// (snapshots) and handlers must be deterministic functions of
// (state, event).
template <class M>
concept Model = requires(const M& m, LpId lp, typename M::State& s, const Event<typename M::Payload>& ev,
                         Context<typename M::Payload, typename M::Record>& ctx) {
  typename M::State;
  typename M::Payload;
  typename M::Record;
  requires std::copyable<typename M::State>;
  requires std::default_initializable<typename M::Payload>;
  { m.lp_count() } -> std::convertible_to<std::size_t>;
  { m.initial_state(lp) } -> std::same_as<typename M::State>;
  m.init(s, ctx);
  m.handle(s, ev, ctx);
};

}  // namespace dsnet::kernel
