#pragma once

#include <chrono>
#include <map>

#include "dsnet/kernel/lp.hpp"
#include "dsnet/kernel/report.hpp"

namespace dsnet::kernel {

// Processes every event with recv_time <= end_time in global EventKey order.
template <Model M>
KernelReport<typename M::State, typename M::Record> run_sequential(const M& model, SimTime end_time) {
  using Ev = Event<typename M::Payload>;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = model.lp_count();
  std::vector<LpRuntime<M>> lps;
  lps.reserve(n);
  std::map<OrderKey, Ev> pending;
  for (LpId i = 0; i < n; ++i) {
    lps.emplace_back(i, model.initial_state(i));
    for (Ev& e : lps.back().init(model)) pending.emplace(e.order(), std::move(e));
  }
  while (!pending.empty()) {
    auto it = pending.begin();
    if (it->second.time() > end_time) break;
    Ev ev = std::move(it->second);
    pending.erase(it);
    for (Ev& e : lps[ev.target()].process(model, ev, false)) {
      DSNET_CHECK(e.target() < n, "event targets an unknown LP");
      pending.emplace(e.order(), std::move(e));
    }
  }

  KernelReport<typename M::State, typename M::Record> report;
  report.committed_events_per_lp.reserve(n);
  for (auto& lp : lps) {
    report.committed_events_per_lp.push_back(lp.committed_events());
    report.committed_events += lp.committed_events();
    for (auto& r : lp.committed_records()) report.records.push_back(std::move(r));
    report.final_states.push_back(lp.state());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dsnet::kernel
