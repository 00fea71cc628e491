#include "dsnet/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "dsnet/kernel/optimistic.hpp"
#include "dsnet/kernel/sequential.hpp"

namespace dsnet {

using nlohmann::json;

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Sequential: return "sequential";
    case RunMode::Optimistic: return "optimistic";
    case RunMode::Baseline: return "baseline";
  }
  return "?";
}

RunMode parse_run_mode(std::string_view t) {
  if (t == "sequential") return RunMode::Sequential;
  if (t == "optimistic") return RunMode::Optimistic;
  if (t == "baseline") return RunMode::Baseline;
  throw ConfigError("unknown mode '" + std::string(t) + "' (sequential, optimistic, baseline)");
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void take_path(const json& j, const char* key, std::optional<std::filesystem::path>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  std::string s;
  take(j, key, s);
  out = s;
}

std::string_view metric_name(RouteMetric m) { return m == RouteMetric::HopCount ? "hops" : "latency"; }

RouteMetric parse_metric(const std::string& s) {
  if (s == "hops") return RouteMetric::HopCount;
  if (s == "latency") return RouteMetric::Latency;
  throw ConfigError("unknown route metric '" + s + "' (hops, latency)");
}

// Topology -------------------------------------------------------------------

void apply_topology(ScenarioConfig& c, const json& j) {
  check_keys(j, {"path", "synthetic", "metric"}, "topology");
  take_path(j, "path", c.topology_path);
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    check_keys(s, {"access", "mixed", "kernel", "seed", "delay_ns", "access_bps", "core_bps"}, "topology.synthetic");
    auto& p = c.synthetic;
    take(s, "access", p.n_access);
    take(s, "mixed", p.n_mixed);
    take(s, "kernel", p.n_kernel);
    take(s, "seed", p.seed);
    take(s, "delay_ns", p.delay_ns);
    take(s, "access_bps", p.access_bandwidth_bps);
    take(s, "core_bps", p.core_bandwidth_bps);
  }
  if (j.contains("metric")) {
    std::string m;
    take(j, "metric", m);
    c.route_metric = parse_metric(m);
  }
}

json dump_topology(const ScenarioConfig& c) {
  const auto& p = c.synthetic;
  json j{{"metric", metric_name(c.route_metric)}};
  j["path"] = c.topology_path ? json(c.topology_path->string()) : json(nullptr);
  j["synthetic"] = {{"access", p.n_access},   {"mixed", p.n_mixed},
                    {"kernel", p.n_kernel},   {"seed", p.seed},
                    {"delay_ns", p.delay_ns}, {"access_bps", p.access_bandwidth_bps},
                    {"core_bps", p.core_bandwidth_bps}};
  return j;
}

// Traffic --------------------------------------------------------------------

void apply_traffic(TrafficSpec& t, const json& j) {
  check_keys(j,
             {"pattern", "packet_size", "rate_pps", "ds_distribution", "arrival", "random_phase", "hotspot_fraction",
              "hotspot_share", "flows"},
             "traffic");
  if (j.contains("pattern")) {
    std::string p;
    take(j, "pattern", p);
    if (p == "access-to-core")
      t.pattern = TrafficPattern::AccessToCore;
    else if (p == "flows")
      t.pattern = TrafficPattern::ExplicitFlows;
    else
      throw ConfigError("unknown traffic pattern '" + p + "' (access-to-core, flows)");
  }
  take(j, "packet_size", t.packet_size);
  take(j, "rate_pps", t.rate_pps);
  if (j.contains("ds_distribution")) {
    const json& d = j.at("ds_distribution");
    if (!d.is_object()) throw ConfigError("traffic.ds_distribution must map DS values to probabilities");
    t.ds_distribution.clear();
    for (const auto& [key, p] : d.items()) {
      int ds = -1;
      try {
        ds = std::stoi(key);
      } catch (const std::exception&) {
      }
      if (ds < 0 || ds > 63 || !p.is_number()) throw ConfigError("bad DS distribution entry '" + key + "'");
      t.ds_distribution.emplace_back(static_cast<std::uint8_t>(ds), p.get<double>());
    }
    std::sort(t.ds_distribution.begin(), t.ds_distribution.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
  }
  if (j.contains("arrival")) {
    std::string a;
    take(j, "arrival", a);
    if (a == "cbr")
      t.arrival = ArrivalProcess::Cbr;
    else if (a == "poisson")
      t.arrival = ArrivalProcess::Poisson;
    else
      throw ConfigError("unknown arrival process '" + a + "' (cbr, poisson)");
  }
  take(j, "random_phase", t.random_phase);
  take(j, "hotspot_fraction", t.hotspot_fraction);
  take(j, "hotspot_share", t.hotspot_share);
  if (j.contains("flows")) {
    if (!j.at("flows").is_array()) throw ConfigError("traffic.flows must be an array");
    t.flows.clear();
    for (const json& f : j.at("flows")) {
      check_keys(f, {"src", "dst", "rate_pps", "ds"}, "traffic.flows[]");
      FlowSpec fs;
      take(f, "src", fs.src);
      take(f, "dst", fs.dst);
      take(f, "rate_pps", fs.rate_pps);
      if (f.contains("ds") && !f.at("ds").is_null()) {
        int ds = 0;
        take(f, "ds", ds);
        if (ds < 0 || ds > 63) throw ConfigError("flow DS field must be in 0..63");
        fs.ds = static_cast<std::uint8_t>(ds);
      }
      t.flows.push_back(fs);
    }
  }
}

json dump_traffic(const TrafficSpec& t) {
  json ds = json::object();
  for (const auto& [v, p] : t.ds_distribution) ds[std::to_string(v)] = p;
  json flows = json::array();
  for (const FlowSpec& f : t.flows) {
    json fj{{"src", f.src}, {"dst", f.dst}, {"rate_pps", f.rate_pps}};
    fj["ds"] = f.ds ? json(*f.ds) : json(nullptr);
    flows.push_back(fj);
  }
  return {{"pattern", t.pattern == TrafficPattern::AccessToCore ? "access-to-core" : "flows"},
          {"packet_size", t.packet_size},
          {"rate_pps", t.rate_pps},
          {"ds_distribution", ds},
          {"arrival", t.arrival == ArrivalProcess::Cbr ? "cbr" : "poisson"},
          {"random_phase", t.random_phase},
          {"hotspot_fraction", t.hotspot_fraction},
          {"hotspot_share", t.hotspot_share},
          {"flows", flows}};
}

// QoS ------------------------------------------------------------------------

constexpr std::array<const char*, 3> kColorNames{"green", "yellow", "red"};

void apply_profile(QosProfile& q, const json& j, const std::string& where) {
  check_keys(j,
             {"classes", "srtcm", "red", "red_weight", "queue_capacity", "shaper_rate_fraction", "shaper_rate_bps",
              "shaper_burst", "classifier"},
             where);
  take(j, "classes", q.classes);
  if (j.contains("srtcm")) {
    if (!j.at("srtcm").is_array()) throw ConfigError(where + ".srtcm must be an array (one entry per class)");
    q.srtcm.clear();
    for (const json& s : j.at("srtcm")) {
      check_keys(s, {"cir_fraction", "cbs", "ebs"}, where + ".srtcm[]");
      SrtcmProfile p;
      take(s, "cir_fraction", p.cir_fraction);
      take(s, "cbs", p.cbs);
      take(s, "ebs", p.ebs);
      q.srtcm.push_back(p);
    }
  }
  if (j.contains("red")) {
    const json& r = j.at("red");
    check_keys(r, {"green", "yellow", "red"}, where + ".red");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!r.contains(kColorNames[c])) continue;
      const json& cj = r.at(kColorNames[c]);
      check_keys(cj, {"min_fraction", "max_fraction", "max_p"}, where + ".red." + kColorNames[c]);
      take(cj, "min_fraction", q.red[c].min_fraction);
      take(cj, "max_fraction", q.red[c].max_fraction);
      take(cj, "max_p", q.red[c].max_p);
    }
  }
  take(j, "red_weight", q.red_weight);
  take(j, "queue_capacity", q.queue_capacity);
  take(j, "shaper_rate_fraction", q.shaper_rate_fraction);
  take(j, "shaper_rate_bps", q.shaper_rate_bps);
  take(j, "shaper_burst", q.shaper_burst);
  if (j.contains("classifier")) {
    const json& c = j.at("classifier");
    check_keys(c, {"default_class", "map"}, where + ".classifier");
    take(c, "default_class", q.classifier.default_class);
    if (c.contains("map")) {
      if (!c.at("map").is_object()) throw ConfigError(where + ".classifier.map must be an object");
      q.classifier.map.fill(std::nullopt);
      for (const auto& [key, cls] : c.at("map").items()) {
        int ds = -1;
        try {
          ds = std::stoi(key);
        } catch (const std::exception&) {
        }
        if (ds < 0 || ds > 63 || !cls.is_number_unsigned()) throw ConfigError("bad classifier entry '" + key + "'");
        q.classifier.map[static_cast<std::size_t>(ds)] = cls.get<std::uint8_t>();
      }
    }
  }
}

json dump_profile(const QosProfile& q) {
  json srtcm = json::array();
  for (const auto& s : q.srtcm) srtcm.push_back({{"cir_fraction", s.cir_fraction}, {"cbs", s.cbs}, {"ebs", s.ebs}});
  json red = json::object();
  for (std::size_t c = 0; c < 3; ++c)
    red[kColorNames[c]] = {
        {"min_fraction", q.red[c].min_fraction}, {"max_fraction", q.red[c].max_fraction}, {"max_p", q.red[c].max_p}};
  json map = json::object();
  for (std::size_t ds = 0; ds < q.classifier.map.size(); ++ds)
    if (q.classifier.map[ds]) map[std::to_string(ds)] = *q.classifier.map[ds];
  return {{"classes", q.classes},
          {"srtcm", srtcm},
          {"red", red},
          {"red_weight", q.red_weight},
          {"queue_capacity", q.queue_capacity},
          {"shaper_rate_fraction", q.shaper_rate_fraction},
          {"shaper_rate_bps", q.shaper_rate_bps},
          {"shaper_burst", q.shaper_burst},
          {"classifier", {{"default_class", q.classifier.default_class}, {"map", map}}}};
}

void apply_qos(QosConfig& q, const json& j) {
  check_keys(j, {"all", "access", "mixed", "kernel"}, "qos");
  if (j.contains("all"))
    for (auto& p : q.by_tier) apply_profile(p, j.at("all"), "qos.all");
  for (NodeTier t : {NodeTier::Access, NodeTier::Mixed, NodeTier::Kernel}) {
    const std::string name(to_string(t));
    if (j.contains(name)) apply_profile(q.by_tier[static_cast<std::size_t>(t)], j.at(name), "qos." + name);
  }
}

json dump_qos(const QosConfig& q) {
  json j = json::object();
  for (NodeTier t : {NodeTier::Access, NodeTier::Mixed, NodeTier::Kernel})
    j[std::string(to_string(t))] = dump_profile(q.for_tier(t));
  return j;
}

// Partition and kernel ---------------------------------------------------------

void apply_partition(ScenarioConfig& c, const json& j) {
  check_keys(j, {"strategy", "k", "epsilon", "plan_file", "event_trace"}, "partition");
  if (j.contains("strategy")) {
    std::string s;
    take(j, "strategy", s);
    c.strategy = parse_weight_strategy(s);
  }
  take(j, "k", c.k);
  take(j, "epsilon", c.epsilon);
  take_path(j, "plan_file", c.plan_file);
  take_path(j, "event_trace", c.event_trace);
}

void apply_kernel(kernel::OptimisticOptions& o, const json& j) {
  check_keys(j, {"gvt_interval", "batch_size", "watchdog_s", "runtime", "transport_jitter", "jitter_seed", "fossil_collection"},
             "kernel");
  take(j, "gvt_interval", o.gvt_interval);
  take(j, "batch_size", o.batch_size);
  take(j, "watchdog_s", o.watchdog_seconds);
  if (j.contains("runtime")) {
    std::string r;
    take(j, "runtime", r);
    if (r == "threads")
      o.runtime = kernel::Runtime::Threads;
    else if (r == "lockstep")
      o.runtime = kernel::Runtime::Lockstep;
    else
      throw ConfigError("unknown kernel runtime '" + r + "' (threads, lockstep)");
  }
  take(j, "transport_jitter", o.transport_jitter);
  take(j, "jitter_seed", o.jitter_seed);
  take(j, "fossil_collection", o.fossil_collection);
}

json opt_path(const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); }

void apply_scenario(ScenarioConfig& c, const json& j) {
  check_keys(j,
             {"topology", "traffic", "qos", "end_ns", "mode", "token_interval_ns", "partition", "kernel", "seed",
              "output_dir", "profile"},
             "scenario");
  if (j.contains("topology")) apply_topology(c, j.at("topology"));
  if (j.contains("traffic")) apply_traffic(c.traffic, j.at("traffic"));
  if (j.contains("qos")) apply_qos(c.qos, j.at("qos"));
  take(j, "end_ns", c.end_ns);
  if (j.contains("mode")) {
    std::string m;
    take(j, "mode", m);
    c.mode = parse_run_mode(m);
  }
  if (j.contains("token_interval_ns")) {
    if (j.at("token_interval_ns").is_null()) {
      c.token_interval_ns.reset();
    } else {
      SimTime t = 0;
      take(j, "token_interval_ns", t);
      c.token_interval_ns = t;
    }
  }
  if (j.contains("partition")) apply_partition(c, j.at("partition"));
  if (j.contains("kernel")) apply_kernel(c.kernel, j.at("kernel"));
  take(j, "seed", c.seed);
  take_path(j, "output_dir", c.output_dir);
  take(j, "profile", c.profile);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
}

std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig c;
  merge_scenario(c, text);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void merge_scenario(ScenarioConfig& cfg, std::string_view text) { apply_scenario(cfg, parse_json(text)); }

std::string serialize_scenario(const ScenarioConfig& c) {
  const auto& k = c.kernel;
  json j{{"topology", dump_topology(c)},
         {"traffic", dump_traffic(c.traffic)},
         {"qos", dump_qos(c.qos)},
         {"end_ns", c.end_ns},
         {"mode", to_string(c.mode)},
         {"partition",
          {{"strategy", to_string(c.strategy)},
           {"k", c.k},
           {"epsilon", c.epsilon},
           {"plan_file", opt_path(c.plan_file)},
           {"event_trace", opt_path(c.event_trace)}}},
         {"kernel",
          {{"gvt_interval", k.gvt_interval},
           {"batch_size", k.batch_size},
           {"watchdog_s", k.watchdog_seconds},
           {"runtime", k.runtime == kernel::Runtime::Threads ? "threads" : "lockstep"},
           {"transport_jitter", k.transport_jitter},
           {"jitter_seed", k.jitter_seed},
           {"fossil_collection", k.fossil_collection}}},
         {"seed", c.seed},
         {"output_dir", opt_path(c.output_dir)},
         {"profile", c.profile}};
  j["token_interval_ns"] = c.token_interval_ns ? json(*c.token_interval_ns) : json(nullptr);
  return j.dump(2);
}

void validate_scenario(const ScenarioConfig& c) {
  if (c.end_ns <= 0) throw ConfigError("end_ns must be positive");
  if (c.mode == RunMode::Baseline) {
    if (!c.token_interval_ns) throw ConfigError("baseline mode needs token_interval_ns");
    if (*c.token_interval_ns <= 0) throw ConfigError("token_interval_ns must be positive");
  } else if (c.token_interval_ns) {
    throw ConfigError("token_interval_ns only applies to baseline mode");
  }
  if (c.k == 0) throw ConfigError("k must be at least 1");
  if (c.mode == RunMode::Sequential && c.k != 1) throw ConfigError("sequential mode runs on one partition (k = 1)");
  if (!(c.epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (c.kernel.gvt_interval == 0 || c.kernel.batch_size == 0) throw ConfigError("gvt_interval and batch_size must be positive");
  if (!(c.kernel.watchdog_seconds > 0.0)) throw ConfigError("watchdog_s must be positive");
  validate_traffic(c.traffic);
  for (const QosProfile& q : c.qos.by_tier) {
    if (q.classes == 0 || q.srtcm.size() != q.classes) throw ConfigError("qos needs one srtcm entry per class");
    if (q.classifier.default_class >= q.classes) throw ConfigError("classifier default class out of range");
    for (const auto& m : q.classifier.map)
      if (m && *m >= q.classes) throw ConfigError("classifier maps to a class out of range");
    if (q.queue_capacity <= 0) throw ConfigError("queue_capacity must be positive");
    if (!(q.red_weight > 0.0 && q.red_weight <= 1.0)) throw ConfigError("red_weight must be in (0, 1]");
    for (const auto& r : q.red)
      if (r.min_fraction < 0.0 || r.max_fraction <= r.min_fraction || r.max_fraction > 1.0 || r.max_p < 0.0 ||
          r.max_p > 1.0)
        throw ConfigError("RED thresholds need 0 <= min < max <= 1 and max_p in [0, 1]");
  }
}

std::string scenario_identity(const ScenarioConfig& c, const Topology& topo) {
  json j{{"topology", json::parse(serialize_topology(topo))},
         {"metric", metric_name(c.route_metric)},
         {"traffic", dump_traffic(c.traffic)},
         {"qos", dump_qos(c.qos)},
         {"end_ns", c.end_ns},
         {"seed", c.seed}};
  return fnv1a_hex(j.dump());
}

PreparedScenario prepare_scenario(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  PreparedScenario p;
  p.config = cfg;
  p.topology = std::make_shared<const Topology>(cfg.topology_path ? load_topology(*cfg.topology_path)
                                                                  : generate_synthetic_topology(cfg.synthetic));
  p.routes = std::make_shared<const RoutingTable>(compute_routes(*p.topology, cfg.route_metric));
  p.flows = effective_flows(cfg.traffic, *p.topology, cfg.seed);
  p.scenario_id = scenario_identity(cfg, *p.topology);
  const bool optimistic = cfg.mode == RunMode::Optimistic || cfg.k > 1;
  if (optimistic) {
    if (cfg.plan_file) {
      p.plan = import_plan(*cfg.plan_file, *p.topology);
      if (p.plan->k != cfg.k)
        throw ConfigError("plan file has k=" + std::to_string(p.plan->k) + " but the scenario asks for k=" +
                          std::to_string(cfg.k));
    } else {
      std::vector<std::uint64_t> trace;
      if (cfg.event_trace) trace = load_event_trace(*cfg.event_trace);
      PartitionInputs in{&p.flows, p.routes.get(), cfg.event_trace ? &trace : nullptr};
      p.plan = make_partition_plan(cfg.strategy, *p.topology, cfg.k, in, cfg.epsilon);
    }
  }
  return p;
}

RunReport run_prepared(const PreparedScenario& p) {
  const ScenarioConfig& cfg = p.config;
  RouterEnv env;
  env.topology = p.topology;
  env.routes = p.routes;
  env.qos = cfg.qos;
  env.shaper_mode = cfg.mode == RunMode::Baseline ? ShaperMode::Periodic : ShaperMode::Lazy;
  env.token_interval = cfg.token_interval_ns.value_or(0);
  env.end_time = cfg.end_ns;
  env.packet_size = cfg.traffic.packet_size;
  env.ds_distribution = cfg.traffic.ds_distribution;
  const NetworkModel model(env, build_sources(cfg.traffic, *p.topology, cfg.seed), cfg.seed);

  auto kr = p.plan ? kernel::run_optimistic(model, p.plan->assignment, p.plan->k, cfg.end_ns, cfg.kernel)
                   : kernel::run_sequential(model, cfg.end_ns);

  RunCounters c;
  c.committed_events = kr.committed_events;
  c.rolled_back_events = kr.rolled_back_events;
  c.inter_partition_messages = kr.inter_partition_messages;
  c.anti_messages = kr.anti_messages;
  c.gvt_rounds = kr.gvt_rounds;
  c.peak_history_entries = kr.peak_history_entries;
  c.partitions = kr.partitions;
  c.committed_events_per_lp = kr.committed_events_per_lp;
  c.gvt_series = kr.gvt_series;
  c.audit = kr.audit;
  for (const RouterState& s : kr.final_states) {
    c.generated += s.stats.generated;
    for (std::size_t i = 0; i < 4; ++i) c.events_by_kind[i] += s.stats.events[i];
    for (const EgressPipeline& pl : s.pipelines) {
      c.stale_sends += pl.stats.stale_sends;
      c.redundant_sends += pl.stats.redundant_sends;
      c.blocked_episodes += pl.stats.blocked_episodes;
      c.ports.push_back({s.node, pl.port, pl.stats});
    }
  }
  RunReport r = finalize(std::move(kr.records), std::move(c), kr.wall_seconds);
  r.scenario_id = p.scenario_id;
  r.mode = std::string(to_string(cfg.mode));
  return r;
}

RunReport run_scenario(const ScenarioConfig& cfg) { return run_prepared(prepare_scenario(cfg)); }

void write_outputs(const PreparedScenario& p, const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("records.csv");
    write_records_csv(r, out);
  }
  {
    auto out = open("summary.txt");
    write_summary(r, out);
  }
  {
    auto out = open("counters.csv");
    write_counter_series(r, out);
  }
  {
    auto out = open("ports.csv");
    write_port_audit(r, out);
  }
  {
    auto out = open("effective_config.json");
    out << serialize_scenario(p.config) << '\n';
  }
  if (p.plan) {
    auto out = open("plan.txt");
    write_plan(*p.plan, out);
  }
  if (p.config.profile) {
    auto out = open("event_trace.csv");
    write_event_trace(r.counters.committed_events_per_lp, out);
  }
}

}  // namespace dsnet
