#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "coordsim/estimator.hpp"
#include "coordsim/scaling.hpp"
#include "coordsim/topology.hpp"

namespace coordsim {

using nlohmann::json;

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kArtifactSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Trace serialization (one JSON object per line in .jsonl files)
// ---------------------------------------------------------------------------

inline json to_json(const ActionRecord& a) {
  json j;
  j["kind"] = a.kind == ActionKind::tool_call      ? "tool_call"
              : a.kind == ActionKind::message_send ? "message_send"
                                                   : "final_answer";
  j["tool"] = a.tool_name;
  j["params"] = a.parameters;
  j["payload"] = a.payload;
  j["tokens"] = a.token_cost;
  return j;
}

inline ActionRecord action_from_json(const json& j) {
  ActionRecord a;
  std::string k = j.at("kind");
  a.kind = k == "tool_call"      ? ActionKind::tool_call
           : k == "message_send" ? ActionKind::message_send
                                 : ActionKind::final_answer;
  a.tool_name = j.at("tool");
  a.parameters = j.at("params").get<std::map<std::string, std::string>>();
  a.payload = j.at("payload");
  a.token_cost = j.at("tokens");
  return a;
}

inline json to_json(const EpisodeTrace& t) {
  json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["system_id"] = t.system_id;
  j["task_id"] = t.task_id;
  j["benchmark"] = t.benchmark;
  j["seed"] = t.seed;
  j["topology"] = to_string(t.topology);
  j["turns"] = json::array();
  for (const auto& turn : t.turns) {
    json jt;
    jt["agent"] = turn.agent_id;
    jt["turn"] = turn.turn_index;
    jt["round"] = turn.round;
    jt["action"] = to_json(turn.action);
    jt["obs"] = {{"payload", turn.observation.payload},
                 {"tokens", turn.observation.token_cost}};
    j["turns"].push_back(jt);
  }
  j["messages"] = json::array();
  for (const auto& m : t.messages)
    j["messages"].push_back({{"sender", m.sender},
                             {"receiver", m.receiver},
                             {"round", m.round},
                             {"payload", m.payload},
                             {"tokens", m.token_cost}});
  j["total_tokens"] = t.total_tokens;
  j["outcome"] = t.outcome == Outcome::success ? "success" : "failure";
  j["final_answer"] = t.final_answer;
  j["error"] = t.error_annotation;
  json rat = json::object();
  for (const auto& [id, r] : t.per_agent_rationales) rat[std::to_string(id)] = r;
  j["rationales"] = rat;
  return j;
}

inline EpisodeTrace trace_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kTraceSchemaVersion)
    throw DataError("unsupported trace schema version");
  EpisodeTrace t;
  t.system_id = j.at("system_id");
  t.task_id = j.at("task_id");
  t.benchmark = j.at("benchmark");
  t.seed = j.at("seed");
  t.topology = topology_from_string(j.at("topology"));
  for (const auto& jt : j.at("turns")) {
    TurnRecord turn;
    turn.agent_id = jt.at("agent");
    turn.turn_index = jt.at("turn");
    turn.round = jt.at("round");
    turn.action = action_from_json(jt.at("action"));
    turn.observation.payload = jt.at("obs").at("payload");
    turn.observation.token_cost = jt.at("obs").at("tokens");
    t.turns.push_back(turn);
  }
  for (const auto& jm : j.at("messages")) {
    MessageRecord m;
    m.sender = jm.at("sender");
    m.receiver = jm.at("receiver");
    m.round = jm.at("round");
    m.payload = jm.at("payload");
    m.token_cost = jm.at("tokens");
    t.messages.push_back(m);
  }
  t.total_tokens = j.at("total_tokens");
  t.outcome = j.at("outcome") == "success" ? Outcome::success : Outcome::failure;
  t.final_answer = j.at("final_answer");
  t.error_annotation = j.at("error");
  for (const auto& [key, val] : j.at("rationales").items())
    t.per_agent_rationales[std::stoi(key)] = val.get<std::string>();
  return t;
}

inline std::string serialize_trace(const EpisodeTrace& t) { return to_json(t).dump(); }

inline EpisodeTrace parse_trace(const std::string& line) {
  return trace_from_json(json::parse(line));
}

// ---------------------------------------------------------------------------
// Coefficient artifact
// ---------------------------------------------------------------------------

inline json to_json(const CoefficientSet& c) {
  json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["provenance"] = c.provenance;
  j["intelligence_mean"] = c.intelligence_mean;
  json terms = json::array();
  for (int i = 0; i < kNumScalingTerms; ++i)
    terms.push_back({{"name", scaling_term_names()[i]},
                     {"beta", c.beta[i]},
                     {"mean", c.feature_mean[i]},
                     {"sd", c.feature_sd[i]}});
  j["terms"] = terms;
  return j;
}

inline CoefficientSet coefficients_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kArtifactSchemaVersion)
    throw DataError("unsupported artifact schema version");
  CoefficientSet c;
  c.provenance = j.at("provenance");
  c.intelligence_mean = j.at("intelligence_mean");
  const auto& terms = j.at("terms");
  if (terms.size() != kNumScalingTerms)
    throw DataError("model artifact incomplete: expected 20 terms");
  for (int i = 0; i < kNumScalingTerms; ++i) {
    const auto& t = terms[i];
    if (t.at("name") != scaling_term_names()[i])
      throw DataError("artifact term order mismatch at index " + std::to_string(i));
    c.beta[i] = t.at("beta");
    c.feature_mean[i] = t.at("mean");
    c.feature_sd[i] = t.at("sd");
  }
  c.validate();
  return c;
}

inline void save_coefficients(const CoefficientSet& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write artifact: " + path);
  out << to_json(c).dump(2) << "\n";
}

inline CoefficientSet load_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read artifact: " + path);
  json j;
  in >> j;
  return coefficients_from_json(j);
}

// ---------------------------------------------------------------------------
// Run dataset (one record per line)
// ---------------------------------------------------------------------------

inline json to_json(const RunRecord& r) {
  json j;
  j["experiment_id"] = r.experiment_id;
  j["family"] = r.family_label;
  j["benchmark"] = r.benchmark_label;
  j["architecture"] = to_string(r.architecture);
  j["performance"] = r.performance;
  j["features"] = {{"intelligence", r.features.intelligence},
                   {"tool_count", r.features.tool_count},
                   {"agent_count", r.features.agent_count},
                   {"overhead_pct", r.features.overhead_pct},
                   {"message_density", r.features.message_density},
                   {"redundancy", r.features.redundancy},
                   {"efficiency", r.features.efficiency},
                   {"error_amplification", r.features.error_amplification},
                   {"single_agent_baseline", r.features.single_agent_baseline}};
  return j;
}

inline RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.experiment_id = j.at("experiment_id");
  r.family_label = j.value("family", "");
  r.benchmark_label = j.value("benchmark", "");
  r.architecture = topology_from_string(j.at("architecture"));
  r.performance = j.at("performance");
  const auto& f = j.at("features");
  r.features.intelligence = f.at("intelligence");
  r.features.tool_count = f.at("tool_count");
  r.features.agent_count = f.at("agent_count");
  r.features.overhead_pct = f.at("overhead_pct");
  r.features.message_density = f.at("message_density");
  r.features.redundancy = f.at("redundancy");
  r.features.efficiency = f.at("efficiency");
  r.features.error_amplification = f.at("error_amplification");
  r.features.single_agent_baseline = f.at("single_agent_baseline");
  return r;
}

inline std::vector<RunRecord> load_run_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset: " + path);
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(run_record_from_json(json::parse(line)));
  }
  return out;
}

inline void save_run_dataset(const std::vector<RunRecord>& records,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset: " + path);
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

}  // namespace coordsim
