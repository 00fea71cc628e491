#include "dsnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace dsnet {

namespace {

bool record_less(const PacketRecord& a, const PacketRecord& b) {
  if (a.pkt_id != b.pkt_id) return a.pkt_id < b.pkt_id;
  return a.delivered_ns.value_or(-1) < b.delivered_ns.value_or(-1);
}

void opt_field(std::ostream& out, const std::optional<double>& v) {
  if (v) out << *v;
}

}  // namespace

RunReport finalize(std::vector<PacketRecord> records, RunCounters counters, double wall_clock) {
  RunReport r;
  std::sort(records.begin(), records.end(), record_less);
  std::vector<SimTime> delays;
  for (const PacketRecord& rec : records) {
    if (rec.delivered_ns) {
      ++r.delivered;
      delays.push_back(*rec.delivered_ns - rec.created_ns);
    } else {
      ++r.dropped;
    }
  }
  r.generated = counters.generated;
  r.in_flight = r.generated >= r.delivered + r.dropped ? r.generated - r.delivered - r.dropped : 0;
  r.drop_rate = r.generated ? static_cast<double>(r.dropped) / static_cast<double>(r.generated) : 0.0;
  if (!delays.empty()) {
    __int128 sum = 0;
    for (SimTime d : delays) sum += d;
    const double n = static_cast<double>(delays.size());
    const double mean = static_cast<double>(sum) / n;
    double ss = 0.0;
    for (SimTime d : delays) ss += (static_cast<double>(d) - mean) * (static_cast<double>(d) - mean);
    r.mean_delay_ns = mean;
    r.jitter_ns = std::sqrt(ss / n);

    // Delivered packets in creation order; J += (|D| - J) / 16.
    std::vector<const PacketRecord*> order;
    for (const PacketRecord& rec : records)
      if (rec.delivered_ns) order.push_back(&rec);
    std::sort(order.begin(), order.end(), [](const PacketRecord* a, const PacketRecord* b) {
      return a->created_ns != b->created_ns ? a->created_ns < b->created_ns : a->pkt_id < b->pkt_id;
    });
    double j = 0.0;
    for (std::size_t i = 1; i < order.size(); ++i) {
      const double d = static_cast<double>((*order[i]->delivered_ns - order[i]->created_ns) -
                                           (*order[i - 1]->delivered_ns - order[i - 1]->created_ns));
      j += (std::abs(d) - j) / 16.0;
    }
    r.rfc3550_jitter_ns = j;
  }
  r.records = std::move(records);
  r.counters = std::move(counters);
  r.wall_clock = wall_clock;
  return r;
}

ReportDiff compare_reports(const RunReport& a, const RunReport& b) {
  if (a.scenario_id != b.scenario_id)
    throw ConfigError("cannot compare reports of different scenarios ('" + a.scenario_id + "' vs '" +
                      b.scenario_id + "')");
  ReportDiff d;
  auto rel = [](const std::optional<double>& x, const std::optional<double>& y) -> std::optional<double> {
    if (!x || !y) return std::nullopt;
    if (*x == 0.0) return *y == 0.0 ? std::optional<double>(0.0) : std::nullopt;
    return (*y - *x) / *x;
  };
  d.mean_delay_rel = rel(a.mean_delay_ns, b.mean_delay_ns);
  d.jitter_rel = rel(a.jitter_ns, b.jitter_ns);
  d.drop_rate_abs = b.drop_rate - a.drop_rate;
  std::size_t i = 0, j = 0;
  while (i < a.records.size() || j < b.records.size()) {
    if (j == b.records.size() || (i < a.records.size() && a.records[i].pkt_id < b.records[j].pkt_id)) {
      ++d.record_diff_count;
      ++i;
    } else if (i == a.records.size() || b.records[j].pkt_id < a.records[i].pkt_id) {
      ++d.record_diff_count;
      ++j;
    } else {
      if (!(a.records[i] == b.records[j])) ++d.record_diff_count;
      ++i;
      ++j;
    }
  }
  return d;
}

void write_records_csv(const RunReport& r, std::ostream& out) {
  out << "pkt_id,src,dst,class,color,created_ns,delivered_ns,drop_node,drop_stage\n";
  for (const PacketRecord& rec : r.records) {
    out << rec.pkt_id << ',' << rec.src << ',' << rec.dst << ',' << static_cast<int>(rec.class_index) << ','
        << to_string(rec.color) << ',' << rec.created_ns << ',';
    if (rec.delivered_ns) out << *rec.delivered_ns;
    out << ',';
    if (rec.drop_node) out << *rec.drop_node;
    out << ',' << to_string(rec.drop_stage) << '\n';
  }
}

void write_summary(const RunReport& r, std::ostream& out) {
  const RunCounters& c = r.counters;
  out << "scenario_id=" << r.scenario_id << '\n'
      << "mode=" << r.mode << '\n'
      << "partitions=" << c.partitions << '\n'
      << "generated=" << r.generated << '\n'
      << "delivered=" << r.delivered << '\n'
      << "dropped=" << r.dropped << '\n'
      << "in_flight=" << r.in_flight << '\n'
      << "mean_delay_ns=";
  opt_field(out, r.mean_delay_ns);
  out << "\njitter_ns=";
  opt_field(out, r.jitter_ns);
  out << "\nrfc3550_jitter_ns=";
  opt_field(out, r.rfc3550_jitter_ns);
  out << "\ndrop_rate=" << r.drop_rate << '\n'
      << "committed_events=" << c.committed_events << '\n'
      << "arrive_events=" << c.events_by_kind[0] << '\n'
      << "send_events=" << c.events_by_kind[1] << '\n'
      << "generate_events=" << c.events_by_kind[2] << '\n'
      << "refill_events=" << c.events_by_kind[3] << '\n'
      << "rolled_back_events=" << c.rolled_back_events << '\n'
      << "inter_partition_messages=" << c.inter_partition_messages << '\n'
      << "anti_messages=" << c.anti_messages << '\n'
      << "stale_sends=" << c.stale_sends << '\n'
      << "redundant_sends=" << c.redundant_sends << '\n'
      << "blocked_episodes=" << c.blocked_episodes << '\n'
      << "gvt_rounds=" << c.gvt_rounds << '\n'
      << "peak_history_entries=" << c.peak_history_entries << '\n'
      << "audit_violations=" << c.audit.total() << '\n'
      << "wall_clock=" << r.wall_clock << '\n';
}

void write_counter_series(const RunReport& r, std::ostream& out) {
  out << "round,gvt_ns,committed_events,rolled_back_events,inter_partition_messages,history_entries\n";
  for (const auto& s : r.counters.gvt_series)
    out << s.round << ',' << s.gvt << ',' << s.committed_events << ',' << s.rolled_back_events << ','
        << s.inter_partition_messages << ',' << s.history_entries << '\n';
}

void write_port_audit(const RunReport& r, std::ostream& out) {
  out << "node,port,arrivals,send_events,blocked_episodes,redundant_sends,stale_sends,forwarded,refill_events,"
         "red_drops,queue_full_drops\n";
  for (const PortAudit& p : r.counters.ports) {
    const PortStats& s = p.stats;
    out << p.node << ',' << p.port << ',' << s.arrivals << ',' << s.send_events << ',' << s.blocked_episodes << ','
        << s.redundant_sends << ',' << s.stale_sends << ',' << s.forwarded << ',' << s.refill_events << ','
        << s.red_drops << ',' << s.queue_full_drops << '\n';
  }
}

}  // namespace dsnet
