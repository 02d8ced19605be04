#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "coordsim/harness.hpp"

using namespace coordsim;
namespace fs = std::filesystem;

namespace {

EpisodeTrace make_trace(Topology topo, const std::string& benchmark, bool success,
                        int turns, int messages, std::uint64_t seed) {
  EpisodeTrace t;
  t.system_id = std::string("sys_") + to_string(topo);
  t.task_id = "task";
  t.benchmark = benchmark;
  t.seed = seed;
  t.topology = topo;
  for (int i = 0; i < turns; ++i) {
    TurnRecord turn;
    turn.agent_id = i % 3;
    turn.turn_index = i;
    turn.round = 0;
    turn.action.kind = ActionKind::tool_call;
    turn.action.tool_name = "noop";
    turn.action.payload = "step " + std::to_string(i);
    turn.action.token_cost = 2;
    t.turns.push_back(turn);
    t.total_tokens += 2;
  }
  for (int i = 0; i < messages; ++i) {
    MessageRecord m;
    m.sender = i % 3;
    m.receiver = (i + 1) % 3;
    m.payload = "msg";
    m.token_cost = 1;
    t.messages.push_back(m);
    t.total_tokens += 1;
  }
  t.outcome = success ? Outcome::success : Outcome::failure;
  t.final_answer = success ? "42" : "41";
  if (topo != Topology::SAS) {
    t.per_agent_rationales[0] = "found the answer quickly";
    t.per_agent_rationales[1] = "found the answer slowly";
  }
  return t;
}

std::string fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("coordsim_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

CampaignConfig demo_campaign(const std::string& dir, bool exploding = false) {
  CampaignConfig cfg;
  cfg.output_dir = dir;
  cfg.seeds = {1, 2, 3};
  TaskSpec t;
  t.id = "t1";
  t.prompt = "solve it";
  t.expected_answer = "42";
  t.domain_label = "demo";
  cfg.tasks.push_back(t);

  SystemConfig sc;
  sc.system.id = "solo";
  sc.system.topology = Topology::SAS;
  sc.system.budget.k_max_iterations = 5;
  sc.system.agents.push_back({0, Role::worker, "b", "m", 50.0});
  struct Exploding : AgentBackend {
    ActionRecord step(const StepContext&) override {
      throw BackendError("down");
    }
  };
  sc.make_registry = [exploding]() {
    BackendRegistry reg;
    if (exploding) {
      reg["b"] = std::make_shared<Exploding>();
    } else {
      ActionRecord a;
      a.kind = ActionKind::final_answer;
      a.payload = "42";
      a.token_cost = 1;
      reg["b"] = std::make_shared<ScriptedAgent>(std::vector<ActionRecord>{a});
    }
    return reg;
  };
  cfg.systems.push_back(sc);
  return cfg;
}

}  // namespace

TEST_CASE("kendall tau closed forms") {
  std::vector<std::string> a = {"p", "q", "r", "s"};
  CHECK(kendall_tau(a, a) == Catch::Approx(1.0));
  std::vector<std::string> rev = {"s", "r", "q", "p"};
  CHECK(kendall_tau(a, rev) == Catch::Approx(-1.0));
  std::vector<std::string> swap = {"p", "r", "q", "s"};
  CHECK(kendall_tau(a, swap) == Catch::Approx(1.0 - 2.0 / 6.0));
}

TEST_CASE("kendall tau rejects mismatched item sets") {
  CHECK_THROWS_AS(kendall_tau({"a", "b"}, {"a", "c"}), DataError);
  CHECK_THROWS_AS(kendall_tau({"a", "b"}, {"a"}), DataError);
  CHECK_THROWS_AS(kendall_tau({"a", "a"}, {"a", "a"}), DataError);
}

TEST_CASE("regime labels match the published thresholds exactly") {
  CHECK(regime_label(99) == Regime::under_coordination);
  CHECK(regime_label(100) == Regime::unclassified);
  CHECK(regime_label(200) == Regime::unclassified);
  CHECK(regime_label(201) == Regime::optimal_band);
  CHECK(regime_label(250) == Regime::optimal_band);
  CHECK(regime_label(300) == Regime::unclassified);
  CHECK(regime_label(400) == Regime::unclassified);
  CHECK(regime_label(401) == Regime::over_coordination);
}

TEST_CASE("aggregate computes self-referenced SAS metrics") {
  std::vector<EpisodeTrace> traces;
  for (int i = 0; i < 10; ++i)
    traces.push_back(make_trace(Topology::SAS, "demo", i < 7, 7, 0, i));
  auto rep = aggregate(traces, sas_reference_from_traces(traces));
  const auto& m = rep.metrics.at({Topology::SAS, "demo"});
  CHECK(m.overhead_pct == Catch::Approx(0.0));
  CHECK(m.message_density == Catch::Approx(0.0));
  CHECK(m.error_amplification == Catch::Approx(1.0));
  CHECK(m.efficiency == Catch::Approx(m.success_rate));
}

TEST_CASE("aggregate reproduces the measured overhead and efficiency columns") {
  std::vector<EpisodeTrace> traces;
  // SAS baseline: mean turns 7.2 over 10 runs
  for (int i = 0; i < 10; ++i)
    traces.push_back(make_trace(Topology::SAS, "demo", i < 5, i < 8 ? 7 : 8, 0, i));
  // MAS group engineered to S=0.37 and mean turns 11.4 (Independent row)
  for (int i = 0; i < 100; ++i)
    traces.push_back(make_trace(Topology::Independent, "demo", i < 37,
                                i < 60 ? 11 : 12, 3, 100 + i));
  auto rep = aggregate(traces, sas_reference_from_traces(traces));
  const auto& m = rep.metrics.at({Topology::Independent, "demo"});
  CHECK(m.overhead_pct == Catch::Approx(58.33).margin(0.5));
  CHECK(m.efficiency == Catch::Approx(0.234).margin(0.001));
}

TEST_CASE("aggregate assigns regimes from overhead") {
  std::vector<EpisodeTrace> traces;
  for (int i = 0; i < 10; ++i)
    traces.push_back(make_trace(Topology::SAS, "demo", true, 8, 0, i));
  for (int i = 0; i < 10; ++i)
    traces.push_back(make_trace(Topology::Decentralized, "demo", true, 28, 9,
                                100 + i));  // O = 250
  auto rep = aggregate(traces, sas_reference_from_traces(traces));
  CHECK(rep.regimes.at({Topology::Decentralized, "demo"}) == Regime::optimal_band);
}

TEST_CASE("aggregate requires a SAS reference per benchmark") {
  std::vector<EpisodeTrace> traces = {
      make_trace(Topology::Independent, "orphan", true, 10, 3, 1)};
  try {
    aggregate(traces, {});
    FAIL("expected missing-reference error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("orphan") != std::string::npos);
  }
}

TEST_CASE("aggregation is order independent") {
  std::vector<EpisodeTrace> traces;
  for (int i = 0; i < 8; ++i)
    traces.push_back(make_trace(Topology::SAS, "demo", i % 2 == 0, 7 + i % 3, 0, i));
  for (int i = 0; i < 8; ++i)
    traces.push_back(
        make_trace(Topology::Centralized, "demo", i % 3 == 0, 20 + i, 12, 50 + i));
  auto ref = sas_reference_from_traces(traces);
  auto rep1 = aggregate(traces, ref);
  std::mt19937_64 rng(5);
  std::shuffle(traces.begin(), traces.end(), rng);
  auto rep2 = aggregate(traces, ref);
  CHECK(to_json(rep1).dump() == to_json(rep2).dump());
}

TEST_CASE("rankings order architectures by success and correlate across benchmarks") {
  std::vector<EpisodeTrace> traces;
  for (const auto& bench : {"alpha", "beta"}) {
    for (int i = 0; i < 10; ++i)
      traces.push_back(make_trace(Topology::SAS, bench, i < 8, 7, 0, i));
    for (int i = 0; i < 10; ++i)
      traces.push_back(make_trace(Topology::Centralized, bench, i < 5, 20, 12, 20 + i));
    for (int i = 0; i < 10; ++i)
      traces.push_back(make_trace(Topology::Hybrid, bench, i < 2, 40, 17, 40 + i));
  }
  auto rep = aggregate(traces, sas_reference_from_traces(traces));
  const auto& ranking = rep.rankings.at("alpha");
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0] == "SAS");
  CHECK(ranking[1] == "Centralized");
  CHECK(ranking[2] == "Hybrid");
  CHECK(rep.kendall_tau_matrix.at({"alpha", "beta"}) == Catch::Approx(1.0));
}

TEST_CASE("trace serialization round trips") {
  for (Topology topo : {Topology::SAS, Topology::Independent, Topology::Hybrid}) {
    EpisodeTrace t = make_trace(topo, "demo", true, 5, 4, 9);
    t.error_annotation = topo == Topology::SAS ? "" : "note";
    EpisodeTrace back = parse_trace(serialize_trace(t));
    CHECK(back == t);
  }
}

TEST_CASE("trace parsing rejects foreign schema versions") {
  EpisodeTrace t = make_trace(Topology::SAS, "demo", true, 2, 0, 1);
  json j = json::parse(serialize_trace(t));
  j["schema_version"] = 99;
  CHECK_THROWS_AS(parse_trace(j.dump()), DataError);
}

TEST_CASE("coefficient artifacts round trip with provenance") {
  std::string dir = fresh_dir("artifact");
  auto c = default_coefficients();
  std::string path = dir + "/model.json";
  save_coefficients(c, path);
  auto back = load_coefficients(path);
  CHECK(back.beta == c.beta);
  CHECK(back.feature_mean == c.feature_mean);
  CHECK(back.feature_sd == c.feature_sd);
  CHECK(back.provenance == c.provenance);
}

TEST_CASE("run dataset round trips") {
  std::string dir = fresh_dir("dataset");
  std::vector<RunRecord> records;
  for (int i = 0; i < 5; ++i) {
    RunRecord r;
    r.features.tool_count = i + 1;
    r.features.overhead_pct = 10.0 * i;
    r.architecture = i % 2 ? Topology::Hybrid : Topology::SAS;
    r.performance = 0.1 * i;
    r.experiment_id = "e" + std::to_string(i);
    records.push_back(r);
  }
  std::string path = dir + "/runs.jsonl";
  save_run_dataset(records, path);
  auto back = load_run_dataset(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].performance == records[i].performance);
    CHECK(back[i].architecture == records[i].architecture);
    CHECK(back[i].features.tool_count == records[i].features.tool_count);
  }
}

TEST_CASE("campaign produces one trace per grid cell plus an index") {
  std::string dir = fresh_dir("grid");
  auto cfg = demo_campaign(dir);
  auto paths = run_campaign(cfg);
  CHECK(paths.size() == 3);
  CHECK(fs::exists(fs::path(dir) / "index.jsonl"));
  auto traces = load_traces_from_dir(dir);
  CHECK(traces.size() == 3);
  for (const auto& t : traces) CHECK(t.outcome == Outcome::success);
}

TEST_CASE("campaign isolates backend failures") {
  std::string dir = fresh_dir("failures");
  auto cfg = demo_campaign(dir, true);
  auto paths = run_campaign(cfg);  // no throw
  CHECK(paths.size() == 3);
  for (const auto& t : load_traces_from_dir(dir)) {
    CHECK(t.outcome == Outcome::failure);
    CHECK_FALSE(t.error_annotation.empty());
  }
}

TEST_CASE("repeated campaigns are byte identical") {
  std::string d1 = fresh_dir("rep1");
  std::string d2 = fresh_dir("rep2");
  auto c1 = demo_campaign(d1);
  c1.parallelism = 3;
  auto c2 = demo_campaign(d2);
  c2.parallelism = 1;
  run_campaign(c1);
  run_campaign(c2);
  CHECK(slurp(fs::path(d1) / "index.jsonl") == slurp(fs::path(d2) / "index.jsonl"));
  for (const auto& e : fs::directory_iterator(d1)) {
    fs::path other = fs::path(d2) / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
}

TEST_CASE("campaign validates its configuration") {
  std::string dir = fresh_dir("dupes");
  auto cfg = demo_campaign(dir);
  cfg.seeds = {1, 1};
  CHECK_THROWS_AS(run_campaign(cfg), ConfigError);
  cfg.seeds = {};
  CHECK_THROWS_AS(run_campaign(cfg), ConfigError);
}

TEST_CASE("campaign config files parse with field-path errors") {
  std::string dir = fresh_dir("cfg");
  std::string path = dir + "/campaign.json";
  {
    std::ofstream out(path);
    out << R"({
      "output_dir": ")" << dir << R"(/out",
      "seeds": [1, 2],
      "tasks": [{"id": "t", "prompt": "go", "expected_answer": "42", "domain": "demo"}],
      "systems": [{
        "id": "solo", "topology": "SAS",
        "budget": {"k": 5, "n": 1},
        "agents": [{"id": 0, "backend": "b"}],
        "backends": {"b": {"type": "scripted",
                           "script": [{"kind": "final_answer", "payload": "42"}]}}
      }]
    })";
  }
  auto cfg = load_campaign_config(path);
  CHECK(cfg.seeds.size() == 2);
  auto paths = run_campaign(cfg);
  CHECK(paths.size() == 2);

  {
    std::ofstream out(path);
    out << R"({"output_dir": "x", "seeds": [1], "tasks": [{"prompt": "no id"}],
               "systems": []})";
  }
  try {
    load_campaign_config(path);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("$.tasks[0]") != std::string::npos);
  }
}
