#pragma once

#include <cstdint>
#include <vector>

#include "dsnet/common.hpp"

namespace dsnet::kernel {

enum class Runtime : std::uint8_t {
  Threads,   // one OS thread per partition
  Lockstep,  // partitions stepped round-robin on one thread, batch_size events per turn
};

struct OptimisticOptions {
  std::size_t gvt_interval = 1024;  // processed events per partition between GVT rounds
  std::size_t batch_size = 16;      // events per scheduling quantum
  double watchdog_seconds = 60.0;
  Runtime runtime = Runtime::Threads;
  // Inter-partition messages are held back a random 0..transport_jitter
  // scheduling steps (order per channel preserved). Never changes results.
  std::size_t transport_jitter = 0;
  std::uint64_t jitter_seed = 0;
  bool fossil_collection = true;
  bool audit = true;
};

struct GvtSample {
  std::uint64_t round = 0;
  SimTime gvt = 0;
  std::uint64_t committed_events = 0;
  std::uint64_t rolled_back_events = 0;
  std::uint64_t inter_partition_messages = 0;
  std::uint64_t history_entries = 0;
};

struct AuditCounters {
  std::uint64_t gvt_regressions = 0;         // a round produced a smaller GVT
  std::uint64_t events_below_gvt = 0;        // message delivered with time < current GVT
  std::uint64_t out_of_order_commits = 0;    // committed sequence not sorted by key
  std::uint64_t orphan_antis = 0;            // anti-messages left unmatched at the end
  std::uint64_t counter_retries = 0;         // GVT rounds retried on counter mismatch

  std::uint64_t total() const {
    return gvt_regressions + events_below_gvt + out_of_order_commits + orphan_antis;
  }
};

template <class State, class Record>
struct KernelReport {
  std::vector<Record> records;  // committed output, LP order then commit order
  std::vector<State> final_states;
  std::vector<std::uint64_t> committed_events_per_lp;
  std::uint64_t committed_events = 0;
  std::uint64_t rolled_back_events = 0;
  std::uint64_t inter_partition_messages = 0;
  std::uint64_t anti_messages = 0;
  std::uint64_t gvt_rounds = 0;
  std::uint64_t peak_history_entries = 0;
  std::size_t partitions = 1;
  std::vector<GvtSample> gvt_series;
  std::vector<SimTime> gvt_trace;  // every GVT value, in round order
  AuditCounters audit;
  double wall_seconds = 0.0;
};

}  // namespace dsnet::kernel
