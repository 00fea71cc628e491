#include "dsnet/qos.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsnet {

std::string_view to_string(Color c) {
  switch (c) {
    case Color::Green: return "green";
    case Color::Yellow: return "yellow";
    case Color::Red: return "red";
  }
  return "?";
}

namespace {

// min(cap, tokens + rate * dt) without overflowing the intermediate product.
std::int64_t accrue(std::int64_t tokens, std::int64_t cap, std::int64_t rate, SimTime dt) {
  const __int128 sum = static_cast<__int128>(tokens) + static_cast<__int128>(rate) * dt;
  return sum >= cap ? cap : static_cast<std::int64_t>(sum);
}

}  // namespace

TokenBucketState bucket_refill(TokenBucketState b, SimTime now) {
  if (now < b.last_update)
    invariant_failed("now >= last_update", __FILE__, __LINE__,
                     "token bucket time regression: " + std::to_string(now) + " < " + std::to_string(b.last_update));
  b.tokens = accrue(b.tokens, b.capacity, b.rate, now - b.last_update);
  b.last_update = now;
  return b;
}

TokenBucketState periodic_refill_tick(TokenBucketState b, SimTime interval) {
  b.tokens = accrue(b.tokens, b.capacity, b.rate, interval);
  b.last_update += interval;
  return b;
}

SimTime shaper_earliest_ready(const TokenBucketState& b, std::int64_t needed_bytes, SimTime now) {
  const std::int64_t needed = to_scaled(needed_bytes);
  if (needed > b.capacity)
    throw ConfigError("shaper request of " + std::to_string(needed_bytes) + " bytes exceeds bucket capacity of " +
                      std::to_string(b.capacity / kTokenScale) + " bytes");
  const TokenBucketState cur = bucket_refill(b, now);
  if (cur.tokens >= needed) return now;
  if (cur.rate <= 0) throw ConfigError("shaper rate must be positive");
  const std::int64_t deficit = needed - cur.tokens;
  return now + (deficit + cur.rate - 1) / cur.rate;
}

SrtcmState SrtcmState::make(const SrtcmConfig& cfg, SimTime at) {
  if (cfg.cbs <= 0 && cfg.ebs <= 0) throw ConfigError("srTCM needs cbs > 0 or ebs > 0");
  if (cfg.cbs < 0 || cfg.ebs < 0 || cfg.cir < 0) throw ConfigError("srTCM parameters must be non-negative");
  return SrtcmState{TokenBucketState::full(cfg.cbs, cfg.cir, at), TokenBucketState::full(cfg.ebs, cfg.cir, at)};
}

SrtcmState srtcm_refill(SrtcmState s, SimTime now) {
  if (now < s.tc.last_update)
    invariant_failed("now >= last_update", __FILE__, __LINE__, "srTCM time regression");
  const __int128 add = static_cast<__int128>(s.tc.rate) * (now - s.tc.last_update);
  const __int128 room_c = s.tc.capacity - s.tc.tokens;
  if (add <= room_c) {
    s.tc.tokens += static_cast<std::int64_t>(add);
  } else {
    s.tc.tokens = s.tc.capacity;
    const __int128 te = s.te.tokens + (add - room_c);
    s.te.tokens = te >= s.te.capacity ? s.te.capacity : static_cast<std::int64_t>(te);
  }
  s.tc.last_update = now;
  s.te.last_update = now;
  return s;
}

std::pair<Color, SrtcmState> srtcm_mark(SrtcmState s, std::int64_t pkt_size, SimTime now) {
  s = srtcm_refill(s, now);
  const std::int64_t need = to_scaled(pkt_size);
  if (s.tc.tokens >= need) {
    s.tc.tokens -= need;
    return {Color::Green, s};
  }
  if (s.te.tokens >= need) {
    s.te.tokens -= need;
    return {Color::Yellow, s};
  }
  return {Color::Red, s};
}

double red_drop_probability(const RedParams& p, double avg, std::int64_t count) {
  if (avg < static_cast<double>(p.min_th)) return 0.0;
  if (avg >= static_cast<double>(p.max_th)) return 1.0;
  const double pb = p.max_p * (avg - static_cast<double>(p.min_th)) / static_cast<double>(p.max_th - p.min_th);
  const double denom = 1.0 - static_cast<double>(count) * pb;
  if (denom <= 0.0) return 1.0;
  return std::clamp(pb / denom, 0.0, 1.0);
}

RedOutcome red_enqueue_decision(RedState r, const ClassQueue& q, std::int64_t pkt_size, double rand, SimTime now,
                                SimTime typical_tx_ns) {
  const double w = r.params.weight;
  if (q.empty()) {
    const SimTime idle_start = std::max(q.idle_since, r.last_update);
    if (now > idle_start) {
      const double m = static_cast<double>(now - idle_start) / static_cast<double>(std::max<SimTime>(typical_tx_ns, 1));
      r.avg *= std::pow(1.0 - w, m);
    }
  } else {
    r.avg = (1.0 - w) * r.avg + w * static_cast<double>(q.byte_length);
  }
  r.last_update = std::max(r.last_update, now);

  if (q.byte_length + pkt_size > q.capacity) {
    r.count = 0;
    return {RedDecision::Drop, r, true};
  }
  if (r.avg < static_cast<double>(r.params.min_th)) {
    r.count = 0;
    return {RedDecision::Enqueue, r};
  }
  if (r.avg >= static_cast<double>(r.params.max_th)) {
    r.count = 0;
    return {RedDecision::Drop, r};
  }
  if (rand < red_drop_probability(r.params, r.avg, r.count)) {
    r.count = 0;
    return {RedDecision::Drop, r};
  }
  ++r.count;
  return {RedDecision::Enqueue, r};
}

std::uint8_t classify(const ClassifierConfig& c, std::uint8_t ds) {
  if (ds < c.map.size() && c.map[ds]) return *c.map[ds];
  return c.default_class;
}

std::optional<std::size_t> strict_priority_select(std::span<const ClassQueue> queues) {
  for (std::size_t i = 0; i < queues.size(); ++i)
    if (!queues[i].empty()) return i;
  return std::nullopt;
}

ClassifierConfig default_classifier() {
  ClassifierConfig c;
  c.default_class = 2;
  c.map[46] = 0;  // EF
  for (std::uint8_t af : {10, 12, 14, 18, 20, 22, 26, 28, 30, 34, 36, 38}) c.map[af] = 1;
  return c;
}

}  // namespace dsnet
