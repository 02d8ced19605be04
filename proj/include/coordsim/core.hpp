#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coordsim/util.hpp"

namespace coordsim {

enum class Topology { SAS, Independent, Decentralized, Centralized, Hybrid };
enum class Role { worker, orchestrator, aggregator };
enum class OrchestrationPolicy { synthesis_only, hierarchical, consensus };
enum class ActionKind { tool_call, message_send, final_answer };

inline const char* to_string(Topology t) {
  switch (t) {
    case Topology::SAS: return "SAS";
    case Topology::Independent: return "Independent";
    case Topology::Decentralized: return "Decentralized";
    case Topology::Centralized: return "Centralized";
    case Topology::Hybrid: return "Hybrid";
  }
  return "?";
}

inline Topology topology_from_string(const std::string& s) {
  if (s == "SAS") return Topology::SAS;
  if (s == "Independent") return Topology::Independent;
  if (s == "Decentralized") return Topology::Decentralized;
  if (s == "Centralized") return Topology::Centralized;
  if (s == "Hybrid") return Topology::Hybrid;
  throw ConfigError("unknown topology: " + s);
}

inline const char* to_string(OrchestrationPolicy p) {
  switch (p) {
    case OrchestrationPolicy::synthesis_only: return "synthesis_only";
    case OrchestrationPolicy::hierarchical: return "hierarchical";
    case OrchestrationPolicy::consensus: return "consensus";
  }
  return "?";
}

inline OrchestrationPolicy policy_from_string(const std::string& s) {
  if (s == "synthesis_only") return OrchestrationPolicy::synthesis_only;
  if (s == "hierarchical") return OrchestrationPolicy::hierarchical;
  if (s == "consensus") return OrchestrationPolicy::consensus;
  throw ConfigError("unknown orchestration policy: " + s);
}

// Default token cost model: whitespace-delimited token count. Pluggable so a
// real tokenizer can be injected without touching callers.
using Tokenizer = std::function<int(std::string_view)>;

inline int whitespace_token_count(std::string_view s) {
  int n = 0;
  bool in_tok = false;
  for (char c : s) {
    bool ws = (c == ' ' || c == '\t' || c == '\n' || c == '\r');
    if (!ws && !in_tok) ++n;
    in_tok = !ws;
  }
  return n;
}

inline Tokenizer default_tokenizer() {
  return [](std::string_view s) { return whitespace_token_count(s); };
}

struct ActionRecord {
  ActionKind kind = ActionKind::final_answer;
  std::string tool_name;                        // required for tool_call
  std::map<std::string, std::string> parameters;
  std::string payload;
  int token_cost = 0;

  bool operator==(const ActionRecord&) const = default;
};

struct ObservationRecord {
  std::string payload;
  int token_cost = 0;

  bool operator==(const ObservationRecord&) const = default;
};

struct HistoryStep {
  ActionRecord action;
  ObservationRecord observation;

  bool operator==(const HistoryStep&) const = default;
  int cost() const { return action.token_cost + observation.token_cost; }
};

// Append-only agent memory under a hard token bound. The first step is the
// task seed and is never evicted.
struct History {
  std::vector<HistoryStep> steps;
  int token_count = 0;
  int max_tokens = 0;
};

inline History append_step(const History& h, ActionRecord action,
                           ObservationRecord observation) {
  const int step_cost = action.token_cost + observation.token_cost;
  if (step_cost > h.max_tokens)
    throw DataError("step exceeds budget: cost " + std::to_string(step_cost) +
                    " > max_tokens " + std::to_string(h.max_tokens));
  History out = h;
  out.steps.push_back({std::move(action), std::move(observation)});
  out.token_count += step_cost;
  // Evict oldest non-seed steps whole until the bound holds.
  while (out.token_count > out.max_tokens && out.steps.size() > 2) {
    out.token_count -= out.steps[1].cost();
    out.steps.erase(out.steps.begin() + 1);
  }
  if (out.token_count > out.max_tokens)
    throw DataError("history cannot satisfy token bound after eviction");
  return out;
}

struct BudgetConfig {
  int k_max_iterations = 10;
  int n_agents = 1;
  int r_orchestrator_rounds = 5;
  int d_debate_rounds = 3;
  int p_peer_rounds = 1;
  int m_peer_requests_per_round = 2;
  long total_token_budget = 100000;
};

struct PerAgentBudget {
  int iterations_per_agent = 0;  // per round for round-based topologies
  int rounds = 1;
  long scheduled_calls = 0;      // full call count including constant terms
};

// Total LLM calls for a topology at per-agent iteration count k, following
// the per-topology call formulas (workers plus aggregation/orchestrator calls).
inline long scheduled_llm_calls(Topology t, const BudgetConfig& b, int k) {
  const long n = b.n_agents, r = b.r_orchestrator_rounds, d = b.d_debate_rounds,
             p = b.p_peer_rounds;
  switch (t) {
    case Topology::SAS: return k;
    case Topology::Independent: return n * k + 1;
    case Topology::Decentralized: return d * n * k + 1;
    case Topology::Centralized: return r * n * k + r;
    case Topology::Hybrid: return r * n * k + r + p;
  }
  return 0;
}

// Allocate per-agent iteration caps so the worker-call total matches the
// iteration budget within +-n calls. SAS keeps the full budget.
inline PerAgentBudget match_budget(Topology t, const BudgetConfig& b) {
  if (b.k_max_iterations < 1) throw ConfigError("k_max_iterations must be >= 1");
  const long K = b.k_max_iterations;
  long divisor = 1;
  int rounds = 1;
  switch (t) {
    case Topology::SAS:
      divisor = 1;
      break;
    case Topology::Independent:
      divisor = b.n_agents;
      break;
    case Topology::Decentralized:
      divisor = static_cast<long>(b.d_debate_rounds) * b.n_agents;
      rounds = b.d_debate_rounds;
      break;
    case Topology::Centralized:
    case Topology::Hybrid:
      divisor = static_cast<long>(b.r_orchestrator_rounds) * b.n_agents;
      rounds = b.r_orchestrator_rounds;
      break;
  }
  if (divisor < 1) throw ConfigError("budget divisor must be positive");
  long lo = std::max<long>(1, K / divisor);
  long best_k = lo;
  long best_diff = std::llabs(lo * divisor - K);
  for (long cand : {lo + 1}) {
    long diff = std::llabs(cand * divisor - K);
    if (diff < best_diff) {
      best_diff = diff;
      best_k = cand;
    }
  }
  if (best_diff > b.n_agents)
    throw ConfigError("no integer allocation within +-n calls: budget " +
                      std::to_string(K) + " too small for topology " +
                      std::string(to_string(t)));
  PerAgentBudget out;
  out.iterations_per_agent = static_cast<int>(best_k);
  out.rounds = rounds;
  out.scheduled_calls = scheduled_llm_calls(t, b, out.iterations_per_agent);
  return out;
}

// Receiver sentinels: a debate broadcast is one message per sender per round;
// Independent uploads sink into a virtual aggregator when no aggregator agent
// is configured.
inline constexpr int kBroadcastReceiver = -1;
inline constexpr int kAggregatorReceiver = -2;

struct MessageRecord {
  int sender = 0;
  int receiver = 0;
  int round = 0;
  std::string payload;
  int token_cost = 0;

  bool operator==(const MessageRecord&) const = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
};

struct TaskSpec {
  std::string id;
  std::string prompt;
  std::vector<ToolSpec> tools;
  std::string expected_answer;  // judged by normalized equality per line
  std::string domain_label;

  int tool_count() const { return static_cast<int>(tools.size()); }
};

struct AgentSpec {
  int id = 0;
  Role role = Role::worker;
  std::string backend_ref;  // key into the backend registry
  std::string model_label;
  double intelligence_index = 0.0;
};

struct AgentSystem {
  std::string id;
  std::vector<AgentSpec> agents;
  Topology topology = Topology::SAS;
  OrchestrationPolicy orchestration = OrchestrationPolicy::synthesis_only;
  BudgetConfig budget;
};

inline int worker_count(const AgentSystem& s) {
  int n = 0;
  for (const auto& a : s.agents)
    if (a.role == Role::worker) ++n;
  return n;
}

inline std::optional<int> orchestrator_id(const AgentSystem& s) {
  for (const auto& a : s.agents)
    if (a.role == Role::orchestrator) return a.id;
  return std::nullopt;
}

inline void validate_system(const AgentSystem& s) {
  if (s.agents.empty()) throw ConfigError("system has no agents");
  std::vector<int> ids;
  for (const auto& a : s.agents) {
    if (!std::isfinite(a.intelligence_index))
      throw ConfigError("intelligence_index must be finite");
    ids.push_back(a.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ConfigError("duplicate agent id in system " + s.id);

  const std::size_t n = s.agents.size();
  int orchestrators = 0;
  for (const auto& a : s.agents)
    if (a.role == Role::orchestrator) ++orchestrators;
  switch (s.topology) {
    case Topology::SAS:
      if (n != 1) throw ConfigError("SAS requires exactly one agent");
      break;
    case Topology::Independent:
    case Topology::Decentralized:
      if (worker_count(s) < 2)
        throw ConfigError("MAS topology requires at least 2 workers");
      break;
    case Topology::Centralized:
    case Topology::Hybrid:
      if (orchestrators != 1)
        throw ConfigError("Centralized/Hybrid requires exactly one orchestrator");
      if (worker_count(s) < 2)
        throw ConfigError("MAS topology requires at least 2 workers");
      break;
  }
}

}  // namespace coordsim
