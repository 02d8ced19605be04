#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coordsim/io.hpp"
#include "coordsim/metrics.hpp"
#include "coordsim/topology.hpp"

namespace coordsim {

// ---------------------------------------------------------------------------
// Kendall rank correlation (tau-b)
// ---------------------------------------------------------------------------

inline double kendall_tau(const std::vector<std::string>& ranking_a,
                          const std::vector<std::string>& ranking_b) {
  if (ranking_a.size() != ranking_b.size())
    throw DataError("kendall_tau: rankings differ in size");
  std::map<std::string, int> pos_a, pos_b;
  for (std::size_t i = 0; i < ranking_a.size(); ++i) pos_a[ranking_a[i]] = int(i);
  for (std::size_t i = 0; i < ranking_b.size(); ++i) pos_b[ranking_b[i]] = int(i);
  if (pos_a.size() != ranking_a.size() || pos_b.size() != ranking_b.size())
    throw DataError("kendall_tau: duplicate items in ranking");
  for (const auto& [item, _] : pos_a)
    if (!pos_b.count(item)) throw DataError("kendall_tau: item sets differ");
  long concordant = 0, discordant = 0;
  std::vector<std::string> items(ranking_a);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      int da = pos_a[items[i]] - pos_a[items[j]];
      int db = pos_b[items[i]] - pos_b[items[j]];
      long s = static_cast<long>(da) * db;
      if (s > 0) ++concordant;
      else if (s < 0) ++discordant;
    }
  long total = concordant + discordant;
  if (total == 0) return 1.0;
  return double(concordant - discordant) / double(total);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

enum class Regime { under_coordination, optimal_band, over_coordination, unclassified };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::under_coordination: return "under_coordination";
    case Regime::optimal_band: return "optimal_band";
    case Regime::over_coordination: return "over_coordination";
    case Regime::unclassified: return "unclassified";
  }
  return "?";
}

// Gaps between the published bands stay unclassified.
inline Regime regime_label(double overhead_pct) {
  if (overhead_pct < 100.0) return Regime::under_coordination;
  if (overhead_pct > 200.0 && overhead_pct < 300.0) return Regime::optimal_band;
  if (overhead_pct > 400.0) return Regime::over_coordination;
  return Regime::unclassified;
}

struct SasReference {
  double mean_turns = 0;
  double error_rate = 0;
};

struct GroupKey {
  Topology architecture;
  std::string benchmark;
  auto operator<=>(const GroupKey&) const = default;
};

struct AggregateReport {
  std::map<GroupKey, CoordinationMetrics> metrics;
  std::map<GroupKey, Regime> regimes;
  // Per-benchmark architecture ranking by mean success, best first.
  std::map<std::string, std::vector<std::string>> rankings;
  // Pairwise Kendall tau between benchmark rankings.
  std::map<std::pair<std::string, std::string>, double> kendall_tau_matrix;
};

inline AggregateReport aggregate(
    const std::vector<EpisodeTrace>& traces,
    const std::map<std::string, SasReference>& sas_reference,
    const SimilarityFn& sim = default_similarity()) {
  if (traces.empty()) throw DataError("aggregate: no traces");
  std::map<GroupKey, std::vector<const EpisodeTrace*>> groups;
  for (const auto& t : traces) {
    if (!sas_reference.count(t.benchmark))
      throw DataError("missing SAS reference for benchmark: " + t.benchmark);
    groups[{t.topology, t.benchmark}].push_back(&t);
  }

  AggregateReport rep;
  for (const auto& [key, ts] : groups) {
    const SasReference& ref = sas_reference.at(key.benchmark);
    CoordinationMetrics m;
    double successes = 0, turns = 0, density = 0, red = 0, tokens = 0;
    int red_n = 0;
    for (const EpisodeTrace* t : ts) {
      successes += t->outcome == Outcome::success ? 1.0 : 0.0;
      turns += static_cast<double>(t->turns.size());
      density += message_density(*t);
      tokens += static_cast<double>(t->total_tokens);
      if (t->per_agent_rationales.size() >= 2) {
        std::vector<std::string> rats;
        for (const auto& [id, r] : t->per_agent_rationales) rats.push_back(r);
        red += redundancy(rats, sim);
        ++red_n;
      }
    }
    const double n = static_cast<double>(ts.size());
    m.success_rate = successes / n;
    m.mean_turns = turns / n;
    m.message_density = density / n;
    m.redundancy = red_n ? red / red_n : 0.0;
    m.error_rate = 1.0 - m.success_rate;
    m.overhead_pct = coordination_overhead(m.mean_turns, ref.mean_turns);
    m.efficiency = coordination_efficiency(m.success_rate, m.mean_turns,
                                           ref.mean_turns);
    m.error_amplification =
        ref.error_rate > 0 ? error_amplification(m.error_rate, ref.error_rate) : 0.0;
    m.success_per_kilotoken =
        tokens > 0 ? success_per_kilotoken(successes, tokens) : 0.0;
    rep.metrics[key] = m;
    rep.regimes[key] = regime_label(m.overhead_pct);
  }

  // Per-benchmark rankings by mean success rate, architecture-name tiebreak.
  std::map<std::string, std::vector<std::pair<double, std::string>>> by_bench;
  for (const auto& [key, m] : rep.metrics)
    by_bench[key.benchmark].push_back({m.success_rate, to_string(key.architecture)});
  for (auto& [bench, rows] : by_bench) {
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [s, arch] : rows) rep.rankings[bench].push_back(arch);
  }
  for (auto it = rep.rankings.begin(); it != rep.rankings.end(); ++it)
    for (auto jt = std::next(it); jt != rep.rankings.end(); ++jt)
      if (it->second.size() == jt->second.size() && it->second.size() > 1) {
        std::set<std::string> sa(it->second.begin(), it->second.end());
        std::set<std::string> sb(jt->second.begin(), jt->second.end());
        if (sa == sb)
          rep.kendall_tau_matrix[{it->first, jt->first}] =
              kendall_tau(it->second, jt->second);
      }
  return rep;
}

// Derive the SAS reference per benchmark from the SAS traces in a set.
inline std::map<std::string, SasReference> sas_reference_from_traces(
    const std::vector<EpisodeTrace>& traces) {
  std::map<std::string, std::pair<double, double>> acc;  // turns, failures
  std::map<std::string, int> counts;
  for (const auto& t : traces)
    if (t.topology == Topology::SAS) {
      acc[t.benchmark].first += static_cast<double>(t.turns.size());
      acc[t.benchmark].second += t.outcome == Outcome::failure ? 1.0 : 0.0;
      ++counts[t.benchmark];
    }
  std::map<std::string, SasReference> out;
  for (const auto& [bench, a] : acc)
    out[bench] = {a.first / counts[bench], a.second / counts[bench]};
  return out;
}

// ---------------------------------------------------------------------------
// Campaign runner
// ---------------------------------------------------------------------------

struct SystemConfig {
  AgentSystem system;
  // Backend definitions are resolved against a registry built per run so that
  // scripted/stochastic state never leaks across runs.
  std::function<BackendRegistry()> make_registry;
};

struct CampaignConfig {
  std::vector<SystemConfig> systems;
  std::vector<TaskSpec> tasks;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  int parallelism = 1;
};

struct RunStatus {
  std::string run_key;
  std::string file;
  std::string status;  // "success" | "failure"
};

namespace detail {

inline const json& require_field(const json& j, const std::string& key,
                                 const std::string& path) {
  if (!j.contains(key))
    throw ConfigError("config missing field: " + path + "." + key);
  return j.at(key);
}

inline ActionRecord action_from_config(const json& j, const std::string& path) {
  ActionRecord a;
  std::string kind = require_field(j, "kind", path).get<std::string>();
  if (kind == "tool_call") a.kind = ActionKind::tool_call;
  else if (kind == "message_send") a.kind = ActionKind::message_send;
  else if (kind == "final_answer") a.kind = ActionKind::final_answer;
  else throw ConfigError("unknown action kind at " + path + ".kind: " + kind);
  a.tool_name = j.value("tool", "");
  a.payload = j.value("payload", "");
  if (j.contains("params"))
    a.parameters = j.at("params").get<std::map<std::string, std::string>>();
  a.token_cost = j.value("tokens", whitespace_token_count(a.payload));
  return a;
}

}  // namespace detail

// Config file layout: output_dir, parallelism, seeds, tasks, and systems.
// Each system carries its agents, budget, and backend definitions; backends
// are "scripted" (fixed action list, optional error injections) or
// "stochastic" (error rate plus answer pool).
inline CampaignConfig load_campaign_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  CampaignConfig cfg;
  cfg.output_dir = detail::require_field(j, "output_dir", "$").get<std::string>();
  cfg.parallelism = j.value("parallelism", 1);
  if (cfg.parallelism < 1) throw ConfigError("$.parallelism must be >= 1");
  for (const auto& s : detail::require_field(j, "seeds", "$"))
    cfg.seeds.push_back(s.get<std::uint64_t>());
  if (cfg.seeds.empty()) throw ConfigError("$.seeds must be nonempty");

  int ti = 0;
  for (const auto& tj : detail::require_field(j, "tasks", "$")) {
    std::string tp = "$.tasks[" + std::to_string(ti++) + "]";
    TaskSpec t;
    t.id = detail::require_field(tj, "id", tp).get<std::string>();
    t.prompt = tj.value("prompt", "");
    t.expected_answer =
        detail::require_field(tj, "expected_answer", tp).get<std::string>();
    t.domain_label = tj.value("domain", "default");
    if (tj.contains("tools"))
      for (const auto& tool : tj.at("tools"))
        t.tools.push_back({tool.at("name").get<std::string>(),
                           tool.value("description", "")});
    cfg.tasks.push_back(std::move(t));
  }

  int si = 0;
  for (const auto& sj : detail::require_field(j, "systems", "$")) {
    std::string sp = "$.systems[" + std::to_string(si++) + "]";
    SystemConfig sc;
    sc.system.id = detail::require_field(sj, "id", sp).get<std::string>();
    sc.system.topology = topology_from_string(
        detail::require_field(sj, "topology", sp).get<std::string>());
    sc.system.orchestration =
        policy_from_string(sj.value("orchestration", "synthesis_only"));
    if (sj.contains("budget")) {
      const json& b = sj.at("budget");
      sc.system.budget.k_max_iterations = b.value("k", 10);
      sc.system.budget.n_agents = b.value("n", 1);
      sc.system.budget.r_orchestrator_rounds = b.value("r", 5);
      sc.system.budget.d_debate_rounds = b.value("d", 3);
      sc.system.budget.p_peer_rounds = b.value("p", 1);
      sc.system.budget.m_peer_requests_per_round = b.value("m", 2);
      sc.system.budget.total_token_budget = b.value("total_tokens", 100000L);
    }
    int ai = 0;
    for (const auto& aj : detail::require_field(sj, "agents", sp)) {
      std::string ap = sp + ".agents[" + std::to_string(ai++) + "]";
      AgentSpec a;
      a.id = detail::require_field(aj, "id", ap).get<int>();
      std::string role = aj.value("role", "worker");
      if (role == "worker") a.role = Role::worker;
      else if (role == "orchestrator") a.role = Role::orchestrator;
      else if (role == "aggregator") a.role = Role::aggregator;
      else throw ConfigError("unknown role at " + ap + ".role: " + role);
      a.backend_ref = detail::require_field(aj, "backend", ap).get<std::string>();
      a.model_label = aj.value("model", "");
      a.intelligence_index = aj.value("intelligence", 0.0);
      sc.system.agents.push_back(std::move(a));
    }

    const json backends = detail::require_field(sj, "backends", sp);
    for (const auto& a : sc.system.agents)
      if (!backends.contains(a.backend_ref))
        throw ConfigError("unresolvable backend at " + sp + ": " + a.backend_ref);
    sc.make_registry = [backends, sp]() {
      BackendRegistry reg;
      for (const auto& [name, bj] : backends.items()) {
        std::string bp = sp + ".backends." + name;
        std::string type = detail::require_field(bj, "type", bp).get<std::string>();
        if (type == "scripted") {
          std::vector<ActionRecord> script;
          int k = 0;
          for (const auto& step : detail::require_field(bj, "script", bp))
            script.push_back(detail::action_from_config(
                step, bp + ".script[" + std::to_string(k++) + "]"));
          std::vector<ScriptedAgent::Injection> injections;
          if (bj.contains("injections"))
            for (const auto& inj : bj.at("injections"))
              injections.push_back({inj.at("turn").get<int>(),
                                    inj.at("payload").get<std::string>()});
          reg[name] = std::make_shared<ScriptedAgent>(std::move(script),
                                                      std::move(injections));
        } else if (type == "stochastic") {
          std::vector<std::string> pool;
          for (const auto& p : detail::require_field(bj, "pool", bp))
            pool.push_back(p.get<std::string>());
          reg[name] = std::make_shared<StochasticAgent>(
              detail::require_field(bj, "error_rate", bp).get<double>(),
              std::move(pool), bj.value("seed", std::uint64_t{0}));
        } else {
          throw ConfigError("unknown backend type at " + bp + ": " + type);
        }
      }
      return reg;
    };
    cfg.systems.push_back(std::move(sc));
  }
  return cfg;
}

inline std::vector<std::string> run_campaign(const CampaignConfig& config) {
  namespace fs = std::filesystem;
  if (config.seeds.empty()) throw ConfigError("campaign needs at least one seed");
  fs::create_directories(config.output_dir);
  {
    std::ofstream probe(fs::path(config.output_dir) / ".write_probe");
    if (!probe) throw ConfigError("output_dir not writable: " + config.output_dir);
  }
  fs::remove(fs::path(config.output_dir) / ".write_probe");

  struct Run {
    const SystemConfig* sys;
    const TaskSpec* task;
    std::uint64_t seed;
    std::string key;
  };
  std::vector<Run> grid;
  std::set<std::string> keys;
  for (const auto& s : config.systems)
    for (const auto& t : config.tasks)
      for (auto seed : config.seeds) {
        std::string key = s.system.id + "__" + t.id + "__" + std::to_string(seed);
        if (!keys.insert(key).second) throw ConfigError("duplicate run key: " + key);
        grid.push_back({&s, &t, seed, key});
      }

  // Bounded fan-out; results are written in grid order for determinism.
  std::vector<EpisodeTrace> results(grid.size());
  const int par = std::max(1, config.parallelism);
  std::size_t next = 0;
  while (next < grid.size()) {
    std::size_t batch = std::min<std::size_t>(par, grid.size() - next);
    std::vector<std::future<EpisodeTrace>> futs;
    for (std::size_t b = 0; b < batch; ++b) {
      const Run& run = grid[next + b];
      futs.push_back(std::async(std::launch::async, [&run]() {
        try {
          BackendRegistry reg = run.sys->make_registry();
          return run_episode(run.sys->system, *run.task, run.seed, reg);
        } catch (const std::exception& e) {
          EpisodeTrace t;
          t.system_id = run.sys->system.id;
          t.task_id = run.task->id;
          t.benchmark = run.task->domain_label;
          t.seed = run.seed;
          t.topology = run.sys->system.topology;
          t.outcome = Outcome::failure;
          t.error_annotation = e.what();
          return t;
        }
      }));
    }
    for (std::size_t b = 0; b < batch; ++b) results[next + b] = futs[b].get();
    next += batch;
  }

  std::vector<std::string> paths;
  std::ofstream index(fs::path(config.output_dir) / "index.jsonl");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string file = grid[i].key + ".trace.jsonl";
    fs::path p = fs::path(config.output_dir) / file;
    std::ofstream out(p);
    out << serialize_trace(results[i]) << "\n";
    json idx;
    idx["run_key"] = grid[i].key;
    idx["file"] = file;
    idx["status"] = results[i].outcome == Outcome::success ? "success" : "failure";
    if (!results[i].error_annotation.empty())
      idx["error"] = results[i].error_annotation;
    index << idx.dump() << "\n";
    paths.push_back(p.string());
  }
  return paths;
}

inline std::vector<EpisodeTrace> load_traces_from_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream index(fs::path(dir) / "index.jsonl");
  if (!index) throw DataError("no index.jsonl in " + dir);
  std::vector<EpisodeTrace> out;
  std::string line;
  while (std::getline(index, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    std::ifstream tf(fs::path(dir) / j.at("file").get<std::string>());
    if (!tf) throw DataError("missing trace file: " + j.at("file").get<std::string>());
    std::string tl;
    std::getline(tf, tl);
    out.push_back(parse_trace(tl));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

inline json to_json(const AggregateReport& rep) {
  json j;
  j["groups"] = json::array();
  for (const auto& [key, m] : rep.metrics) {
    json g;
    g["architecture"] = to_string(key.architecture);
    g["benchmark"] = key.benchmark;
    g["success_rate"] = m.success_rate;
    g["mean_turns"] = m.mean_turns;
    g["overhead_pct"] = m.overhead_pct;
    g["message_density"] = m.message_density;
    g["redundancy"] = m.redundancy;
    g["efficiency"] = m.efficiency;
    g["error_amplification"] = m.error_amplification;
    g["success_per_kilotoken"] = m.success_per_kilotoken;
    g["error_rate"] = m.error_rate;
    g["regime"] = to_string(rep.regimes.at(key));
    j["groups"].push_back(g);
  }
  j["rankings"] = rep.rankings;
  j["kendall_tau"] = json::array();
  for (const auto& [pair, tau] : rep.kendall_tau_matrix)
    j["kendall_tau"].push_back(
        {{"a", pair.first}, {"b", pair.second}, {"tau", tau}});
  return j;
}

inline std::string render_report_text(const AggregateReport& rep) {
  std::ostringstream os;
  os << "architecture        benchmark        S      turns   O%      c      "
        "R      E_c    A_e    regime\n";
  for (const auto& [key, m] : rep.metrics) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%-18s  %-14s  %-5.3f  %-6.1f  %-6.1f  %-5.2f  %-5.2f  %-5.3f "
                  " %-5.2f  %s\n",
                  to_string(key.architecture), key.benchmark.c_str(),
                  m.success_rate, m.mean_turns, m.overhead_pct, m.message_density,
                  m.redundancy, m.efficiency, m.error_amplification,
                  to_string(rep.regimes.at(key)));
    os << buf;
  }
  for (const auto& [bench, ranking] : rep.rankings) {
    os << "ranking[" << bench << "]:";
    for (const auto& a : ranking) os << " " << a;
    os << "\n";
  }
  for (const auto& [pair, tau] : rep.kendall_tau_matrix)
    os << "kendall_tau(" << pair.first << ", " << pair.second << ") = " << tau
       << "\n";
  return os.str();
}

}  // namespace coordsim
