#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dsnet/kernel/report.hpp"
#include "dsnet/packet.hpp"
#include "dsnet/router.hpp"

namespace dsnet {

struct PortAudit {
  NodeId node = 0;
  PortIndex port = 0;
  PortStats stats;
};

// Everything a run produces besides the per-packet records.
struct RunCounters {
  std::uint64_t generated = 0;
  std::uint64_t committed_events = 0;
  std::uint64_t rolled_back_events = 0;
  std::uint64_t inter_partition_messages = 0;
  std::uint64_t anti_messages = 0;
  std::uint64_t stale_sends = 0;
  std::uint64_t redundant_sends = 0;
  std::uint64_t blocked_episodes = 0;
  std::uint64_t gvt_rounds = 0;
  std::uint64_t peak_history_entries = 0;
  std::array<std::uint64_t, 4> events_by_kind{};  // arrive, send, generate, refill
  std::size_t partitions = 1;
  std::vector<std::uint64_t> committed_events_per_lp;
  std::vector<PortAudit> ports;
  std::vector<kernel::GvtSample> gvt_series;
  kernel::AuditCounters audit;
};

struct RunReport {
  std::string scenario_id;
  std::string mode;
  std::vector<PacketRecord> records;  // sorted by pkt_id
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
  std::optional<double> mean_delay_ns;      // absent when nothing was delivered
  std::optional<double> jitter_ns;          // population std-dev of end-to-end delay
  std::optional<double> rfc3550_jitter_ns;  // smoothed transit-difference jitter
  double drop_rate = 0.0;                   // dropped / generated
  RunCounters counters;
  double wall_clock = 0.0;  // seconds
};

RunReport finalize(std::vector<PacketRecord> records, RunCounters counters, double wall_clock);

struct ReportDiff {
  std::optional<double> mean_delay_rel;  // (b - a) / a
  std::optional<double> jitter_rel;
  double drop_rate_abs = 0.0;            // b - a
  std::size_t record_diff_count = 0;     // packet ids whose records differ or exist on one side only
};

// Throws ConfigError if the two reports come from different scenarios.
ReportDiff compare_reports(const RunReport& a, const RunReport& b);

void write_records_csv(const RunReport& r, std::ostream& out);
void write_summary(const RunReport& r, std::ostream& out);
void write_counter_series(const RunReport& r, std::ostream& out);
void write_port_audit(const RunReport& r, std::ostream& out);

}  // namespace dsnet
