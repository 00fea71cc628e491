// dsnet: command-line front end for the DiffServ network simulator.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "dsnet/partition.hpp"
#include "dsnet/scenario.hpp"
#include "dsnet/topology.hpp"

namespace {

using namespace dsnet;
namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kConfig = 1, kRuntime = 2, kWatchdog = 3 };

constexpr const char* kOutputRootEnv = "DSNET_OUTPUT_ROOT";

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("dsnet-out");
}

// Flags that mirror ScenarioConfig fields; unset flags leave the config alone.
struct ScenarioFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> topology;
  std::optional<std::size_t> n_access, n_mixed, n_kernel;
  std::optional<std::uint64_t> topo_seed;
  std::optional<std::string> metric;
  std::optional<double> rate_pps;
  std::optional<std::uint32_t> packet_size;
  std::optional<std::string> arrival;
  std::optional<double> hotspot_fraction, hotspot_share;
  std::optional<SimTime> end_ns;
  std::optional<std::string> mode;
  std::optional<SimTime> token_interval;
  std::optional<std::size_t> k;
  std::optional<std::string> strategy;
  std::optional<double> epsilon;
  std::optional<std::string> plan;
  std::optional<std::string> event_trace;
  std::optional<std::size_t> gvt_interval, batch_size, transport_jitter;
  std::optional<double> watchdog_s;
  std::optional<std::string> runtime;
  bool no_fossil = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool profile = false;

  void add_to(CLI::App& app) {
    app.add_option("-c,--config", config, "Scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "JSON object merged over the scenario (repeatable)");
    app.add_option("--topology", topology, "Topology JSON file (synthetic topology when omitted)");
    app.add_option("--access", n_access, "Synthetic access nodes");
    app.add_option("--mixed", n_mixed, "Synthetic mixed nodes");
    app.add_option("--kernel-nodes", n_kernel, "Synthetic kernel nodes");
    app.add_option("--topo-seed", topo_seed, "Synthetic topology seed");
    app.add_option("--metric", metric, "Routing metric: hops or latency");
    app.add_option("--rate-pps", rate_pps, "Per-source packet rate");
    app.add_option("--packet-size", packet_size, "Packet size in bytes");
    app.add_option("--arrival", arrival, "cbr or poisson");
    app.add_option("--hotspot-fraction", hotspot_fraction, "Fraction of nodes in the hot set");
    app.add_option("--hotspot-share", hotspot_share, "Fraction of sources aimed at the hot set");
    app.add_option("--end-ns", end_ns, "Virtual end time in ns");
    app.add_option("--mode", mode, "sequential, optimistic or baseline");
    app.add_option("--token-interval-ns", token_interval, "Refill interval (baseline mode)");
    app.add_option("-k,--partitions", k, "Partition count");
    app.add_option("--strategy", strategy,
                   "Partition weights: no-weights, edge, vertex-event, vertex-throughput, vertex+edge");
    app.add_option("--epsilon", epsilon, "Allowed imbalance above 1");
    app.add_option("--plan", plan, "Partition plan file to use instead of partitioning");
    app.add_option("--event-trace", event_trace, "Committed-event trace from `run --profile`");
    app.add_option("--gvt-interval", gvt_interval, "Events per partition between GVT rounds");
    app.add_option("--batch-size", batch_size, "Events per scheduling quantum");
    app.add_option("--watchdog-s", watchdog_s, "Abort when GVT stalls this long (seconds)");
    app.add_option("--runtime", runtime, "threads or lockstep");
    app.add_option("--transport-jitter", transport_jitter, "Max random delay of cross-partition messages (steps)");
    app.add_flag("--no-fossil", no_fossil, "Keep all history (disables fossil collection)");
    app.add_option("--seed", seed, "Simulation seed");
    app.add_option("-o,--out", out, "Output directory");
    app.add_flag("--profile", profile, "Also write the per-node committed-event trace");
  }

  ScenarioConfig build() const {
    ScenarioConfig c = config.empty() ? ScenarioConfig{} : load_scenario(config);
    for (const auto& s : sets) merge_scenario(c, s);
    if (topology) c.topology_path = *topology;
    if (n_access) c.synthetic.n_access = *n_access;
    if (n_mixed) c.synthetic.n_mixed = *n_mixed;
    if (n_kernel) c.synthetic.n_kernel = *n_kernel;
    if (topo_seed) c.synthetic.seed = *topo_seed;
    if (metric) merge_scenario(c, R"({"topology":{"metric":")" + *metric + "\"}}");
    if (rate_pps) c.traffic.rate_pps = *rate_pps;
    if (packet_size) c.traffic.packet_size = *packet_size;
    if (arrival) merge_scenario(c, R"({"traffic":{"arrival":")" + *arrival + "\"}}");
    if (hotspot_fraction) c.traffic.hotspot_fraction = *hotspot_fraction;
    if (hotspot_share) c.traffic.hotspot_share = *hotspot_share;
    if (end_ns) c.end_ns = *end_ns;
    if (mode) c.mode = parse_run_mode(*mode);
    if (token_interval) c.token_interval_ns = *token_interval;
    if (k) c.k = *k;
    if (strategy) c.strategy = parse_weight_strategy(*strategy);
    if (epsilon) c.epsilon = *epsilon;
    if (plan) c.plan_file = *plan;
    if (event_trace) c.event_trace = *event_trace;
    if (gvt_interval) c.kernel.gvt_interval = *gvt_interval;
    if (batch_size) c.kernel.batch_size = *batch_size;
    if (transport_jitter) c.kernel.transport_jitter = *transport_jitter;
    if (watchdog_s) c.kernel.watchdog_seconds = *watchdog_s;
    if (runtime) merge_scenario(c, R"({"kernel":{"runtime":")" + *runtime + "\"}}");
    if (no_fossil) c.kernel.fossil_collection = false;
    if (seed) c.seed = *seed;
    if (out) c.output_dir = *out;
    if (profile) c.profile = true;
    return c;
  }
};

std::string run_label(const ScenarioConfig& c, const std::string& id) {
  std::string label = id + "-" + std::string(to_string(c.mode));
  if (c.token_interval_ns) label += "-ti" + std::to_string(*c.token_interval_ns);
  if (c.k > 1 || c.mode == RunMode::Optimistic) label += "-k" + std::to_string(c.k);
  return label;
}

int cmd_run(const ScenarioFlags& flags) {
  const ScenarioConfig cfg = flags.build();
  const PreparedScenario p = prepare_scenario(cfg);
  const RunReport r = run_prepared(p);
  const fs::path dir = cfg.output_dir ? *cfg.output_dir : output_root() / run_label(cfg, p.scenario_id);
  write_outputs(p, r, dir);
  write_summary(r, std::cout);
  std::cout << "output_dir=" << dir.string() << '\n';
  return r.counters.audit.total() == 0 ? kOk : kRuntime;
}

// --- sweep -------------------------------------------------------------------

struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

SweepAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("--vary expects NAME=v1,v2,...");
  SweepAxis a{spec.substr(0, eq), {}};
  if (a.name != "token_interval" && a.name != "k" && a.name != "strategy")
    throw ConfigError("sweep variable must be token_interval, k or strategy");
  std::stringstream ss(spec.substr(eq + 1));
  for (std::string v; std::getline(ss, v, ',');)
    if (!v.empty()) a.values.push_back(v);
  if (a.values.empty()) throw ConfigError("sweep variable " + a.name + " has no values");
  return a;
}

struct SweepPoint {
  std::map<std::string, std::string> values;
  std::string shaper;  // lazy or periodic
  ScenarioConfig cfg;
};

std::vector<SweepPoint> expand(const ScenarioConfig& base, const std::vector<SweepAxis>& axes, bool with_lazy) {
  std::vector<SweepPoint> points{{{}, base.mode == RunMode::Baseline ? "periodic" : "lazy", base}};
  for (const SweepAxis& axis : axes) {
    std::vector<SweepPoint> next;
    for (const SweepPoint& p : points)
      for (const std::string& v : axis.values) {
        SweepPoint q = p;
        q.values[axis.name] = v;
        try {
          if (axis.name == "token_interval") {
            q.cfg.mode = RunMode::Baseline;
            q.cfg.token_interval_ns = std::stoll(v);
            q.shaper = "periodic";
          } else if (axis.name == "k") {
            q.cfg.k = std::stoul(v);
            if (q.cfg.mode == RunMode::Sequential) q.cfg.mode = RunMode::Optimistic;
          } else {
            q.cfg.strategy = parse_weight_strategy(v);
          }
        } catch (const std::logic_error&) {
          throw ConfigError("bad value '" + v + "' for sweep variable " + axis.name);
        }
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  if (with_lazy) {
    // Lazy twin of every periodic point, so each interval has its reference run.
    std::vector<SweepPoint> out;
    for (SweepPoint& p : points) {
      const bool periodic = p.cfg.mode == RunMode::Baseline;
      SweepPoint lazy = p;
      out.push_back(std::move(p));
      if (!periodic) continue;
      lazy.cfg.token_interval_ns.reset();
      lazy.cfg.mode = lazy.cfg.k > 1 ? RunMode::Optimistic : RunMode::Sequential;
      lazy.shaper = "lazy";
      out.push_back(std::move(lazy));
    }
    points = std::move(out);
  }
  return points;
}

struct SweepRow {
  std::string key;
  bool ok = false;
  std::string error;
  RunReport report;
};

std::string csv_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(12) << *v;
  return os.str();
}

int cmd_sweep(const ScenarioFlags& flags, const std::vector<std::string>& vary, std::size_t repetitions,
              bool no_lazy, bool keep_runs) {
  if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
  const ScenarioConfig base = flags.build();
  std::vector<SweepAxis> axes;
  for (const auto& v : vary) axes.push_back(parse_axis(v));
  const auto points = expand(base, axes, !no_lazy);
  const fs::path dir = base.output_dir ? *base.output_dir : output_root() / "sweep";
  fs::create_directories(dir);

  std::vector<std::string> names;
  for (const auto& a : axes) names.push_back(a.name);
  std::ofstream rows(dir / "sweep_runs.csv");
  std::ofstream agg(dir / "sweep_aggregate.csv");
  if (!rows || !agg) throw std::runtime_error("cannot write sweep output in " + dir.string());
  auto header = [&](std::ostream& o, bool per_rep) {
    for (const auto& n : names) o << n << ',';
    o << "shaper,mode,k,strategy" << (per_rep ? ",rep,status" : ",runs,failures")
      << ",generated,delivered,dropped,mean_delay_ns,jitter_ns,rfc3550_jitter_ns,drop_rate,committed_events,"
         "refill_events,rolled_back_events,inter_partition_messages,gvt_rounds,wall_clock\n";
  };
  header(rows, true);
  header(agg, false);

  int failures = 0;
  bool watchdog = false;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const SweepPoint& pt = points[pi];
    std::ostringstream prefix;
    for (const auto& n : names) prefix << pt.values.at(n) << ',';
    prefix << pt.shaper << ',' << to_string(pt.cfg.mode) << ',' << pt.cfg.k << ',' << to_string(pt.cfg.strategy);

    std::vector<RunReport> ok;
    std::size_t point_failures = 0;
    std::optional<PreparedScenario> prepared;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      std::string status = "ok";
      try {
        if (!prepared) prepared = prepare_scenario(pt.cfg);
        RunReport r = run_prepared(*prepared);
        if (keep_runs) write_outputs(*prepared, r, dir / ("run-" + std::to_string(pi) + "-" + std::to_string(rep)));
        if (r.counters.audit.total() != 0) status = "audit-failure";
        const auto& c = r.counters;
        rows << prefix.str() << ',' << rep << ',' << status << ',' << r.generated << ',' << r.delivered << ','
             << r.dropped << ',' << csv_opt(r.mean_delay_ns) << ',' << csv_opt(r.jitter_ns) << ','
             << csv_opt(r.rfc3550_jitter_ns) << ',' << r.drop_rate << ',' << c.committed_events << ','
             << c.events_by_kind[3] << ',' << c.rolled_back_events << ',' << c.inter_partition_messages << ','
             << c.gvt_rounds << ',' << r.wall_clock << '\n';
        if (status == "ok")
          ok.push_back(std::move(r));
        else
          ++point_failures;
      } catch (const WatchdogError& e) {
        watchdog = true;
        status = std::string("watchdog: ") + e.what();
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
      }
      if (status.rfind("watchdog", 0) == 0 || status.rfind("error", 0) == 0) {
        ++point_failures;
        std::string clean = status;
        std::replace(clean.begin(), clean.end(), ',', ';');
        std::replace(clean.begin(), clean.end(), '\n', ' ');
        rows << prefix.str() << ',' << rep << ",\"" << clean << "\"" << std::string(15, ',') << '\n';
      }
      rows.flush();
    }
    failures += static_cast<int>(point_failures);

    auto mean_of = [&](auto get) -> std::optional<double> {
      double s = 0;
      std::size_t n = 0;
      for (const auto& r : ok)
        if (auto v = get(r)) {
          s += *v;
          ++n;
        }
      return n ? std::optional<double>(s / static_cast<double>(n)) : std::nullopt;
    };
    agg << prefix.str() << ',' << ok.size() << ',' << point_failures;
    const std::vector<std::function<std::optional<double>(const RunReport&)>> cols{
        [](const RunReport& r) { return std::optional<double>(r.generated); },
        [](const RunReport& r) { return std::optional<double>(r.delivered); },
        [](const RunReport& r) { return std::optional<double>(r.dropped); },
        [](const RunReport& r) { return r.mean_delay_ns; },
        [](const RunReport& r) { return r.jitter_ns; },
        [](const RunReport& r) { return r.rfc3550_jitter_ns; },
        [](const RunReport& r) { return std::optional<double>(r.drop_rate); },
        [](const RunReport& r) { return std::optional<double>(r.counters.committed_events); },
        [](const RunReport& r) { return std::optional<double>(r.counters.events_by_kind[3]); },
        [](const RunReport& r) { return std::optional<double>(r.counters.rolled_back_events); },
        [](const RunReport& r) { return std::optional<double>(r.counters.inter_partition_messages); },
        [](const RunReport& r) { return std::optional<double>(r.counters.gvt_rounds); },
        [](const RunReport& r) { return std::optional<double>(r.wall_clock); },
    };
    for (const auto& col : cols) agg << ',' << csv_opt(mean_of(col));
    agg << '\n';
    agg.flush();
    std::cerr << "[" << (pi + 1) << "/" << points.size() << "] " << prefix.str() << " runs=" << ok.size()
              << " failed=" << point_failures << '\n';
  }
  {
    std::ofstream cfg_out(dir / "effective_config.json");
    cfg_out << serialize_scenario(base) << '\n';
  }
  std::cout << "sweep_dir=" << dir.string() << "\nfailed_runs=" << failures << '\n';
  if (failures == 0) return kOk;
  return watchdog ? kWatchdog : kRuntime;
}

// --- partition / topology tools ----------------------------------------------

int cmd_partition(const ScenarioFlags& flags, const std::string& plan_out) {
  ScenarioConfig cfg = flags.build();
  validate_traffic(cfg.traffic);
  const Topology topo =
      cfg.topology_path ? load_topology(*cfg.topology_path) : generate_synthetic_topology(cfg.synthetic);
  const RoutingTable routes = compute_routes(topo, cfg.route_metric);
  const auto flows = effective_flows(cfg.traffic, topo, cfg.seed);
  std::vector<std::uint64_t> trace;
  if (cfg.event_trace) trace = load_event_trace(*cfg.event_trace);
  const PartitionInputs in{&flows, &routes, cfg.event_trace ? &trace : nullptr};
  const PartitionPlan plan = make_partition_plan(cfg.strategy, topo, cfg.k, in, cfg.epsilon);

  const fs::path out = !plan_out.empty() ? fs::path(plan_out) : output_root() / "plan.txt";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  write_plan(plan, f);
  const auto loads = partition_weights(plan.assignment, plan.vertex_weights, plan.k);
  std::cout << "plan=" << out.string() << "\nstrategy=" << to_string(plan.strategy) << "\nk=" << plan.k
            << "\nimbalance=" << plan.imbalance << "\ncut_weight=" << plan.cut_weight
            << "\ndegraded=" << (plan.degraded ? "true" : "false") << "\npartition_weights=";
  for (std::size_t i = 0; i < loads.size(); ++i) std::cout << (i ? "," : "") << loads[i];
  std::cout << '\n';
  if (plan.degraded)
    std::cerr << "warning: imbalance " << plan.imbalance << " exceeds 1+epsilon=" << 1.0 + plan.epsilon << '\n';
  return kOk;
}

int cmd_topo_gen(const SyntheticTopologyParams& p, const std::string& out) {
  const Topology topo = generate_synthetic_topology(p);
  const fs::path path = !out.empty() ? fs::path(out) : output_root() / "topology.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_topology(topo, path);
  std::cout << "topology=" << path.string() << "\nnodes=" << topo.node_count() << "\nlinks=" << topo.link_count()
            << '\n';
  return kOk;
}

int cmd_topo_convert(const std::string& nodes, const std::string& links, SimTime delay, const std::string& out) {
  std::ifstream nf(nodes), lf(links);
  if (!nf) throw ConfigError("cannot open " + nodes);
  if (!lf) throw ConfigError("cannot open " + links);
  const Topology topo = convert_csv_topology(nf, lf, delay);
  const fs::path path = !out.empty() ? fs::path(out) : output_root() / "topology.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_topology(topo, path);
  std::cout << "topology=" << path.string() << "\nnodes=" << topo.node_count() << "\nlinks=" << topo.link_count()
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel DiffServ network simulator"};
  app.require_subcommand(1);
  app.footer(std::string("Default output root: $") + kOutputRootEnv + " or ./dsnet-out");

  ScenarioFlags run_flags, sweep_flags, part_flags;
  auto* run = app.add_subcommand("run", "Simulate one scenario");
  run_flags.add_to(*run);

  auto* sweep = app.add_subcommand("sweep", "Run a cross product of scenario variants");
  sweep_flags.add_to(*sweep);
  std::vector<std::string> vary;
  std::size_t repetitions = 1;
  bool no_lazy = false, keep_runs = false;
  sweep->add_option("--vary", vary, "NAME=v1,v2,... with NAME in token_interval, k, strategy (repeatable)")
      ->required();
  sweep->add_option("-r,--repetitions", repetitions, "Runs per point");
  sweep->add_flag("--no-lazy", no_lazy, "Skip the lazy reference run next to each periodic point");
  sweep->add_flag("--keep-runs", keep_runs, "Write full outputs of every run");

  auto* part = app.add_subcommand("partition", "Compute a partition plan");
  part_flags.add_to(*part);
  std::string plan_out;
  part->add_option("--plan-out", plan_out, "Plan file to write");

  auto* gen = app.add_subcommand("topo-gen", "Write a synthetic three-tier topology");
  SyntheticTopologyParams gp;
  std::string gen_out;
  gen->add_option("--access", gp.n_access, "Access nodes");
  gen->add_option("--mixed", gp.n_mixed, "Mixed nodes");
  gen->add_option("--kernel-nodes", gp.n_kernel, "Kernel nodes");
  gen->add_option("--seed", gp.seed, "Generator seed");
  gen->add_option("--delay-ns", gp.delay_ns, "Per-link propagation delay");
  gen->add_option("--access-bps", gp.access_bandwidth_bps, "Access link bandwidth");
  gen->add_option("--core-bps", gp.core_bandwidth_bps, "Core link bandwidth");
  gen->add_option("-o,--out", gen_out, "Topology JSON to write");

  auto* conv = app.add_subcommand("topo-convert", "Convert node/link CSV tables to topology JSON");
  std::string nodes_csv, links_csv, conv_out;
  SimTime default_delay = 1000;
  conv->add_option("--nodes", nodes_csv, "Node table: name,type[,ports]")->required();
  conv->add_option("--links", links_csv, "Link table: src,dst,bandwidth_gbps[,delay_ns]")->required();
  conv->add_option("--default-delay-ns", default_delay, "Delay for links without one");
  conv->add_option("-o,--out", conv_out, "Topology JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags, vary, repetitions, no_lazy, keep_runs);
    if (*part) return cmd_partition(part_flags, plan_out);
    if (*gen) return cmd_topo_gen(gp, gen_out);
    if (*conv) return cmd_topo_convert(nodes_csv, links_csv, default_delay, conv_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const WatchdogError& e) {
    std::cerr << "watchdog: " << e.what() << '\n';
    return kWatchdog;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
