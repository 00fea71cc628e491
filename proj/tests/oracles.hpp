#pragma once

#include <algorithm>

#include "dsnet/qos.hpp"

namespace dsnet::testing {

// Brute-force srTCM: tokens ticked every nanosecond, tc first then te.
struct TickSrtcm {
  std::int64_t tc, te, cbs, ebs, rate;
  SimTime t = 0;
  void advance(SimTime to) {
    // Token units arrive one at a time: each goes to tc if it has room, else to te.
    for (; t < to; ++t) {
      const std::int64_t to_tc = std::min(rate, cbs - tc);
      tc += to_tc;
      te = std::min(ebs, te + (rate - to_tc));
    }
  }
  Color mark(std::int64_t size, SimTime at) {
    advance(at);
    const std::int64_t need = size * kTokenScale;
    if (tc >= need) {
      tc -= need;
      return Color::Green;
    }
    if (te >= need) {
      te -= need;
      return Color::Yellow;
    }
    return Color::Red;
  }
};

}  // namespace dsnet::testing
