#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "dsnet/common.hpp"

namespace dsnet::kernel {

// What one partition reports at a GVT cut. Times above the run's end time
// are reported as kTimeInfinity: such events can never be processed.
struct PartitionCut {
  SimTime local_min = kTimeInfinity;    // earliest unprocessed event owned
  std::uint64_t sent = 0;               // inter-partition messages handed to the transport
  std::uint64_t received = 0;           // inter-partition messages taken off the transport
  std::uint64_t in_transit = 0;         // messages sitting in this partition's inbound channel
  SimTime transit_min = kTimeInfinity;  // earliest of those
};

struct GvtEstimate {
  SimTime value = 0;
  std::uint64_t round = 0;
  bool terminated = false;
};

// Combines one cut per partition. Returns nullopt when the message counters
// do not balance (a message is unaccounted for and the round must be
// retried). When no work remains the estimate is the end-time sentinel with
// `terminated` set.
std::optional<GvtEstimate> compute_gvt(std::span<const PartitionCut> cuts, const GvtEstimate& previous,
                                       SimTime end_time);

}  // namespace dsnet::kernel
