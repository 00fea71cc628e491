#include "dsnet/kernel/gvt.hpp"

#include <algorithm>

namespace dsnet::kernel {

std::optional<GvtEstimate> compute_gvt(std::span<const PartitionCut> cuts, const GvtEstimate& previous,
                                       SimTime end_time) {
  std::uint64_t sent = 0;
  std::uint64_t accounted = 0;
  SimTime low = kTimeInfinity;
  for (const PartitionCut& c : cuts) {
    sent += c.sent;
    accounted += c.received + c.in_transit;
    low = std::min({low, c.local_min, c.transit_min});
  }
  if (sent != accounted) return std::nullopt;
  GvtEstimate next{0, previous.round + 1, false};
  if (low == kTimeInfinity || low > end_time) {
    next.value = end_time;
    next.terminated = true;
  } else {
    next.value = low;
  }
  return next;
}

}  // namespace dsnet::kernel
