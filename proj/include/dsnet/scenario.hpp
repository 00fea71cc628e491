#pragma once

// Scenario configuration and the glue that turns one into a RunReport.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dsnet/kernel/report.hpp"
#include "dsnet/metrics.hpp"
#include "dsnet/partition.hpp"
#include "dsnet/router.hpp"
#include "dsnet/topology.hpp"
#include "dsnet/traffic.hpp"

namespace dsnet {

enum class RunMode : std::uint8_t { Sequential, Optimistic, Baseline };

std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view text);

struct ScenarioConfig {
  std::optional<std::filesystem::path> topology_path;  // synthetic topology when absent
  SyntheticTopologyParams synthetic;
  RouteMetric route_metric = RouteMetric::HopCount;
  TrafficSpec traffic;
  QosConfig qos;
  SimTime end_ns = 500'000'000;
  RunMode mode = RunMode::Sequential;
  std::optional<SimTime> token_interval_ns;  // Baseline only
  WeightStrategy strategy = WeightStrategy::NoWeights;
  std::size_t k = 1;
  double epsilon = 0.10;
  std::optional<std::filesystem::path> plan_file;
  std::optional<std::filesystem::path> event_trace;  // VertexEvent input
  kernel::OptimisticOptions kernel;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> output_dir;
  bool profile = false;  // also write the per-node committed-event trace
};

// JSON scenario file. Every key is optional; unknown keys are rejected.
// Throws ParseError / ConfigError.
ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
// Applies a JSON object on top of an existing config (same keys as the file).
void merge_scenario(ScenarioConfig& cfg, std::string_view json_text);
std::string serialize_scenario(const ScenarioConfig& cfg);

// Throws ConfigError when the mode-specific invariants do not hold.
void validate_scenario(const ScenarioConfig& cfg);

// Everything derived from a config before the kernel starts.
struct PreparedScenario {
  ScenarioConfig config;
  std::shared_ptr<const Topology> topology;
  std::shared_ptr<const RoutingTable> routes;
  std::vector<FlowSpec> flows;
  std::string scenario_id;
  std::optional<PartitionPlan> plan;  // optimistic runs only
};

// Identity of the simulated system: topology, routing, traffic, QoS, horizon
// and seed. Execution knobs (mode, token interval, k, strategy, kernel
// settings) do not contribute.
std::string scenario_identity(const ScenarioConfig& cfg, const Topology& topo);

PreparedScenario prepare_scenario(const ScenarioConfig& cfg);
RunReport run_prepared(const PreparedScenario& p);
RunReport run_scenario(const ScenarioConfig& cfg);

// Writes records.csv, summary.txt, counters.csv, ports.csv and
// effective_config.json (plus plan.txt and event_trace.csv when relevant).
void write_outputs(const PreparedScenario& p, const RunReport& r, const std::filesystem::path& dir);

}  // namespace dsnet
