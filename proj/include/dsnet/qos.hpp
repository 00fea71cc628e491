#pragma once

// DiffServ conditioning elements. Every operation is a pure state
// transition so the owning router can snapshot and replay them.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dsnet/common.hpp"
#include "dsnet/packet.hpp"

namespace dsnet {

// Token amounts are bytes scaled by 1e9. With a rate expressed in bytes per
// second, r * dt_ns is then exactly the scaled refill, so no rounding ever
// enters the bucket arithmetic.
inline constexpr std::int64_t kTokenScale = 1'000'000'000;

constexpr std::int64_t to_scaled(std::int64_t bytes) { return bytes * kTokenScale; }

struct TokenBucketState {
  std::int64_t tokens = 0;    // scaled bytes
  std::int64_t capacity = 0;  // scaled bytes
  std::int64_t rate = 0;      // bytes per second (= scaled units per ns)
  SimTime last_update = 0;

  static TokenBucketState full(std::int64_t capacity_bytes, std::int64_t rate_bytes_per_s, SimTime at = 0) {
    return {to_scaled(capacity_bytes), to_scaled(capacity_bytes), rate_bytes_per_s, at};
  }
  double token_bytes() const { return static_cast<double>(tokens) / kTokenScale; }
  bool covers(std::int64_t bytes) const { return tokens >= to_scaled(bytes); }

  friend bool operator==(const TokenBucketState&, const TokenBucketState&) = default;
};

// Lazily accrues r * (now - last_update), discarding overflow.
// Throws InvariantViolation if now < last_update.
TokenBucketState bucket_refill(TokenBucketState b, SimTime now);

// Baseline mode: one fixed-interval token generation event.
TokenBucketState periodic_refill_tick(TokenBucketState b, SimTime interval);

// Earliest time >= now at which the bucket holds `needed_bytes`, assuming no
// other debits. Returns now when the refilled bucket already covers the
// request. Throws ConfigError if the request exceeds capacity or rate is 0.
SimTime shaper_earliest_ready(const TokenBucketState& b, std::int64_t needed_bytes, SimTime now);

// srTCM, color-blind. Both buckets refill at cir; tc fills first and its
// overflow spills into te.
struct SrtcmConfig {
  std::int64_t cir = 0;  // bytes per second
  std::int64_t cbs = 0;  // bytes
  std::int64_t ebs = 0;  // bytes
};

struct SrtcmState {
  TokenBucketState tc;
  TokenBucketState te;

  static SrtcmState make(const SrtcmConfig& cfg, SimTime at = 0);
  friend bool operator==(const SrtcmState&, const SrtcmState&) = default;
};

SrtcmState srtcm_refill(SrtcmState s, SimTime now);
std::pair<Color, SrtcmState> srtcm_mark(SrtcmState s, std::int64_t pkt_size, SimTime now);

// Byte-bounded FIFO for one traffic class.
struct ClassQueue {
  std::deque<Packet> packets;
  std::int64_t byte_length = 0;
  std::int64_t capacity = 65536;
  SimTime idle_since = 0;  // meaningful while empty

  bool empty() const { return packets.empty(); }
  void push(const Packet& p) {
    packets.push_back(p);
    byte_length += p.size;
  }
  Packet pop(SimTime now) {
    Packet p = packets.front();
    packets.pop_front();
    byte_length -= p.size;
    if (packets.empty()) idle_since = now;
    return p;
  }
  friend bool operator==(const ClassQueue&, const ClassQueue&) = default;
};

struct RedParams {
  std::int64_t min_th = 0;  // bytes
  std::int64_t max_th = 1;  // bytes
  double max_p = 0.1;
  double weight = 0.002;

  friend bool operator==(const RedParams&, const RedParams&) = default;
};

struct RedState {
  RedParams params;
  double avg = 0.0;         // EWMA of queue bytes
  std::int64_t count = 0;   // packets enqueued since the last drop while avg in [min_th, max_th)
  SimTime last_update = 0;

  friend bool operator==(const RedState&, const RedState&) = default;
};

enum class RedDecision : std::uint8_t { Enqueue, Drop };

struct RedOutcome {
  RedDecision decision;
  RedState state;
  bool forced = false;  // dropped because the queue had no room
};

// One RED arrival decision. `rand` is a uniform draw in [0,1).
// `typical_tx_ns` converts idle time into the number of packets that could
// have been sent, which drives the (1-w)^m decay of avg over idle gaps.
RedOutcome red_enqueue_decision(RedState r, const ClassQueue& q, std::int64_t pkt_size, double rand,
                                SimTime now = 0, SimTime typical_tx_ns = 1);

// Early-drop probability for a given average; exposed for tests.
double red_drop_probability(const RedParams& p, double avg, std::int64_t count);

struct ClassifierConfig {
  std::array<std::optional<std::uint8_t>, 64> map{};
  std::uint8_t default_class = 0;
};

std::uint8_t classify(const ClassifierConfig& c, std::uint8_t ds);

// Lowest-numbered non-empty queue.
std::optional<std::size_t> strict_priority_select(std::span<const ClassQueue> queues);

// Standard three-class map: EF -> 0, AF codepoints -> 1, everything else -> 2.
ClassifierConfig default_classifier();

}  // namespace dsnet
