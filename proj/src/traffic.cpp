#include "dsnet/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsnet {

namespace {

constexpr std::uint64_t flow_stream(NodeId node, RngPurpose purpose, std::size_t flow) {
  return stream_id(node, purpose) ^ (static_cast<std::uint64_t>(flow) << 48);
}

std::vector<NodeId> core_nodes(const Topology& topo) {
  std::vector<NodeId> core;
  for (const Node& n : topo.nodes())
    if (n.tier != NodeTier::Access) core.push_back(n.id);
  return core;
}

SimTime cbr_offset(std::uint64_t index, double rate_pps) {
  return static_cast<SimTime>(std::floor(static_cast<long double>(index) * 1e9L / rate_pps));
}

SourceState make_source(const TrafficSpec& spec, NodeId src, NodeId dst, double rate, std::optional<std::uint8_t> ds,
                        std::size_t flow, std::uint64_t seed) {
  SourceState s;
  s.dst = dst;
  s.rate_pps = rate;
  s.fixed_ds = ds;
  s.arrival = spec.arrival;
  s.ds_rng = CounterRng{seed, flow_stream(src, RngPurpose::DsField, flow), 0};
  s.arrival_rng = CounterRng{seed, flow_stream(src, RngPurpose::InterArrival, flow), 0};
  if (spec.random_phase) {
    CounterRng phase{seed, flow_stream(src, RngPurpose::Phase, flow), 0};
    s.start = static_cast<SimTime>(std::floor(phase.next_unit() * 1e9 / rate));
  }
  s.next_time = s.start;
  return s;
}

}  // namespace

void validate_traffic(const TrafficSpec& spec) {
  if (spec.packet_size == 0) throw ConfigError("packet size must be positive");
  auto check_rate = [](double r) {
    if (!(r > 0.0) || r > 1e9) throw ConfigError("traffic rate must be in (0, 1e9] packets per second");
  };
  if (spec.pattern == TrafficPattern::AccessToCore) check_rate(spec.rate_pps);
  for (const FlowSpec& f : spec.flows) {
    check_rate(f.rate_pps);
    if (f.ds && *f.ds > 63) throw ConfigError("DS field must be in 0..63");
  }
  if (spec.ds_distribution.empty()) throw ConfigError("DS distribution is empty");
  double total = 0.0;
  for (const auto& [ds, p] : spec.ds_distribution) {
    if (ds > 63) throw ConfigError("DS field must be in 0..63");
    if (p < 0.0) throw ConfigError("DS probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("DS probabilities must sum to 1");
  if (spec.hotspot_fraction < 0.0 || spec.hotspot_fraction > 1.0 || spec.hotspot_share < 0.0 ||
      spec.hotspot_share > 1.0)
    throw ConfigError("hotspot fraction and share must be in [0, 1]");
}

std::vector<NodeId> hotspot_nodes(const TrafficSpec& spec, const Topology& topo, std::uint64_t seed) {
  if (spec.hotspot_fraction <= 0.0 || spec.hotspot_share <= 0.0) return {};
  std::vector<NodeId> core = core_nodes(topo);
  const auto want = static_cast<std::size_t>(
      std::max(1.0, std::round(spec.hotspot_fraction * static_cast<double>(topo.node_count()))));
  const std::size_t h = std::min(want, core.size());
  CounterRng rng{seed, stream_id(0xFFFFFF, RngPurpose::Destination), 0};
  for (std::size_t i = 0; i < h; ++i) std::swap(core[i], core[i + rng.next_below(core.size() - i)]);
  core.resize(h);
  std::sort(core.begin(), core.end());
  return core;
}

std::vector<std::vector<SourceState>> build_sources(const TrafficSpec& spec, const Topology& topo,
                                                    std::uint64_t seed) {
  validate_traffic(spec);
  std::vector<std::vector<SourceState>> out(topo.node_count());
  if (spec.pattern == TrafficPattern::ExplicitFlows) {
    for (const FlowSpec& f : spec.flows) {
      if (f.src >= topo.node_count() || f.dst >= topo.node_count())
        throw ConfigError("flow references an unknown node");
      if (f.src == f.dst) throw ConfigError("flow source equals destination");
      auto& v = out[f.src];
      v.push_back(make_source(spec, f.src, f.dst, f.rate_pps, f.ds, v.size(), seed));
    }
    return out;
  }

  const std::vector<NodeId> core = core_nodes(topo);
  if (core.empty()) throw ConfigError("access-to-core traffic needs at least one mixed or kernel node");
  const std::vector<NodeId> hot = hotspot_nodes(spec, topo, seed);
  std::vector<NodeId> cold;
  std::set_difference(core.begin(), core.end(), hot.begin(), hot.end(), std::back_inserter(cold));
  for (const Node& n : topo.nodes()) {
    if (n.tier != NodeTier::Access) continue;
    CounterRng rng{seed, stream_id(n.id, RngPurpose::Destination), 0};
    NodeId dst;
    if (hot.empty()) {
      dst = core[rng.next_below(core.size())];
    } else {
      const bool to_hot = rng.next_unit() < spec.hotspot_share || cold.empty();
      const auto& pool = to_hot ? hot : cold;
      dst = pool[rng.next_below(pool.size())];
    }
    out[n.id].push_back(make_source(spec, n.id, dst, spec.rate_pps, std::nullopt, 0, seed));
  }
  return out;
}

std::vector<FlowSpec> effective_flows(const TrafficSpec& spec, const Topology& topo, std::uint64_t seed) {
  std::vector<FlowSpec> flows;
  const auto sources = build_sources(spec, topo, seed);
  for (NodeId n = 0; n < sources.size(); ++n)
    for (const SourceState& s : sources[n]) flows.push_back(FlowSpec{n, s.dst, s.rate_pps, s.fixed_ds});
  return flows;
}

std::pair<Packet, SimTime> next_generate(SourceState& s, NodeId self, std::uint32_t packet_size,
                                         const std::vector<std::pair<std::uint8_t, double>>& ds_distribution,
                                         SimTime now) {
  Packet p;
  p.src = self;
  p.dst = s.dst;
  p.size = packet_size;
  p.created_at = now;
  if (s.fixed_ds) {
    p.ds_field = *s.fixed_ds;
  } else {
    const double u = s.ds_rng.next_unit();
    double cum = 0.0;
    p.ds_field = ds_distribution.back().first;
    for (const auto& [ds, prob] : ds_distribution) {
      cum += prob;
      if (u < cum) {
        p.ds_field = ds;
        break;
      }
    }
  }
  ++s.index;
  if (s.arrival == ArrivalProcess::Cbr) {
    s.next_time = std::max(now + 1, s.start + cbr_offset(s.index, s.rate_pps));
  } else {
    const double u = s.arrival_rng.next_unit();
    const double gap = -std::log1p(-u) * 1e9 / s.rate_pps;
    s.next_time = now + std::max<SimTime>(1, static_cast<SimTime>(std::ceil(gap)));
  }
  return {p, s.next_time};
}

}  // namespace dsnet
