#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coordsim/agents.hpp"
#include "coordsim/core.hpp"

namespace coordsim {

enum class Outcome { success, failure };

struct TurnRecord {
  int agent_id = 0;
  int turn_index = 0;  // global, in execution order
  int round = 0;
  ActionRecord action;
  ObservationRecord observation;

  bool operator==(const TurnRecord&) const = default;
};

struct EpisodeTrace {
  std::string system_id;
  std::string task_id;
  std::string benchmark;
  std::uint64_t seed = 0;
  Topology topology = Topology::SAS;
  std::vector<TurnRecord> turns;
  std::vector<MessageRecord> messages;
  long total_tokens = 0;
  Outcome outcome = Outcome::failure;
  std::string final_answer;
  std::string error_annotation;
  std::map<int, std::string> per_agent_rationales;

  bool operator==(const EpisodeTrace&) const = default;
};

// Communication-overhead formula per topology. A debate broadcast counts as
// one exchange per sender per round; Independent counts one upload per worker.
inline long expected_message_count(Topology t, const BudgetConfig& b) {
  switch (t) {
    case Topology::SAS: return 0;
    case Topology::Independent: return b.n_agents;
    case Topology::Decentralized:
      return static_cast<long>(b.d_debate_rounds) * b.n_agents;
    case Topology::Centralized:
      return static_cast<long>(b.r_orchestrator_rounds) * b.n_agents;
    case Topology::Hybrid:
      return static_cast<long>(b.r_orchestrator_rounds) * b.n_agents +
             static_cast<long>(b.p_peer_rounds) * b.m_peer_requests_per_round;
  }
  return 0;
}

inline std::string normalize_answer(std::string_view s) { return to_lower(trim(s)); }

inline std::string aggregate_outputs(
    OrchestrationPolicy policy, const std::vector<std::pair<int, std::string>>& outputs,
    const std::optional<std::string>& orchestrator_answer = std::nullopt) {
  if (outputs.empty()) throw DataError("aggregate_outputs: empty outputs");
  auto sorted = outputs;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  switch (policy) {
    case OrchestrationPolicy::synthesis_only: {
      std::string out;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i) out += '\n';
        out += sorted[i].second;
      }
      return out;
    }
    case OrchestrationPolicy::hierarchical: {
      if (!orchestrator_answer)
        throw DataError("hierarchical aggregation needs an orchestrator answer");
      return *orchestrator_answer;
    }
    case OrchestrationPolicy::consensus: {
      std::map<std::string, int> votes;
      for (const auto& [id, ans] : sorted) ++votes[normalize_answer(ans)];
      int best = 0;
      for (const auto& [k, v] : votes) best = std::max(best, v);
      // Ties break toward the lowest agent id's answer.
      for (const auto& [id, ans] : sorted)
        if (votes[normalize_answer(ans)] == best) return ans;
      return sorted.front().second;
    }
  }
  throw ConfigError("unknown orchestration policy");
}

using BackendRegistry = std::map<std::string, BackendPtr>;

namespace detail {

inline ObservationRecord execute_tool(const ActionRecord& a, const TaskSpec& task,
                                      const Tokenizer& tok) {
  ObservationRecord obs;
  if (a.kind == ActionKind::tool_call) {
    if (a.tool_name == "echo") {
      for (const auto& [k, v] : a.parameters) obs.payload += v + " ";
      obs.payload = trim(obs.payload);
    } else if (a.tool_name == "calc") {
      auto lhs = a.parameters.find("a");
      auto rhs = a.parameters.find("b");
      auto op = a.parameters.find("op");
      if (lhs != a.parameters.end() && rhs != a.parameters.end() &&
          op != a.parameters.end()) {
        double x = std::stod(lhs->second), y = std::stod(rhs->second), r = 0;
        if (op->second == "add") r = x + y;
        else if (op->second == "sub") r = x - y;
        else if (op->second == "mul") r = x * y;
        else if (op->second == "div") r = y != 0 ? x / y : 0;
        std::ostringstream os;
        os << r;
        obs.payload = os.str();
      } else {
        obs.payload = "calc: missing a/b/op";
      }
    } else {
      obs.payload = "ok";
    }
  }
  obs.token_cost = tok(obs.payload);
  (void)task;
  return obs;
}

struct AgentState {
  History history;
  int steps_taken = 0;
  std::string statement;      // latest round statement
  std::string rationale;      // all statements joined
  bool finished = false;
};

struct Executor {
  const AgentSystem& system;
  const TaskSpec& task;
  std::uint64_t seed;
  const BackendRegistry& registry;
  Tokenizer tok;
  EpisodeTrace trace;
  std::map<int, AgentState> state;
  int global_turn = 0;

  Executor(const AgentSystem& sys, const TaskSpec& t, std::uint64_t sd,
           const BackendRegistry& reg, Tokenizer tk)
      : system(sys), task(t), seed(sd), registry(reg), tok(std::move(tk)) {
    trace.system_id = system.id;
    trace.task_id = task.id;
    trace.benchmark = task.domain_label;
    trace.seed = seed;
    trace.topology = system.topology;
    for (const auto& a : system.agents) {
      AgentState st;
      st.history.max_tokens = static_cast<int>(system.budget.total_token_budget);
      ActionRecord seed_action;
      seed_action.kind = ActionKind::tool_call;
      seed_action.tool_name = "task";
      seed_action.payload = task.prompt;
      seed_action.token_cost = tok(task.prompt);
      st.history = append_step(st.history, seed_action, ObservationRecord{});
      state[a.id] = std::move(st);
    }
  }

  BackendPtr backend_for(const AgentSpec& a) const {
    auto it = registry.find(a.backend_ref);
    if (it == registry.end())
      throw ConfigError("unresolvable backend: " + a.backend_ref);
    return it->second;
  }

  // Runs up to `cap` iterations for one agent, recording turns; returns the
  // agent's statement for the round.
  std::string run_agent(const AgentSpec& a, int cap, int round,
                        const std::vector<MessageRecord>& inbox) {
    auto backend = backend_for(a);
    AgentState& st = state[a.id];
    std::string stmt;
    for (int i = 0; i < cap; ++i) {
      StepContext ctx;
      ctx.agent_id = a.id;
      ctx.turn_index = st.steps_taken;
      ctx.round = round;
      ctx.history = &st.history;
      ctx.inbox = inbox;
      ctx.seed = seed;
      ActionRecord action = backend->step(ctx);
      ObservationRecord obs = detail::execute_tool(action, task, tok);
      TurnRecord turn;
      turn.agent_id = a.id;
      turn.turn_index = global_turn++;
      turn.round = round;
      turn.action = action;
      turn.observation = obs;
      trace.turns.push_back(turn);
      trace.total_tokens += action.token_cost + obs.token_cost;
      st.history = append_step(st.history, action, obs);
      ++st.steps_taken;
      stmt = action.payload;
      if (action.kind == ActionKind::final_answer) {
        st.finished = true;
        break;
      }
    }
    st.statement = stmt;
    if (!st.rationale.empty()) st.rationale += '\n';
    st.rationale += stmt;
    return stmt;
  }

  void post_message(int sender, int receiver, int round, const std::string& payload) {
    MessageRecord m;
    m.sender = sender;
    m.receiver = receiver;
    m.round = round;
    m.payload = payload;
    m.token_cost = tok(payload);
    trace.messages.push_back(m);
    trace.total_tokens += m.token_cost;
  }

  std::vector<const AgentSpec*> workers() const {
    std::vector<const AgentSpec*> w;
    for (const auto& a : system.agents)
      if (a.role == Role::worker) w.push_back(&a);
    std::sort(w.begin(), w.end(),
              [](const AgentSpec* x, const AgentSpec* y) { return x->id < y->id; });
    return w;
  }

  const AgentSpec* orchestrator() const {
    for (const auto& a : system.agents)
      if (a.role == Role::orchestrator) return &a;
    return nullptr;
  }

  void finish(const std::string& final_answer) {
    trace.final_answer = final_answer;
    for (const auto& [id, st] : state)
      if (!st.rationale.empty()) trace.per_agent_rationales[id] = st.rationale;
    trace.outcome = judge(final_answer) ? Outcome::success : Outcome::failure;
  }

  // Normalized equality against the expected answer; a multi-line synthesis
  // succeeds only if every component line matches (any-error aggregation).
  bool judge(const std::string& answer) const {
    if (task.expected_answer.empty()) return !trim(answer).empty();
    std::string want = normalize_answer(task.expected_answer);
    std::vector<std::string> lines;
    std::string cur;
    for (char c : answer) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    lines.push_back(cur);
    bool any = false;
    for (const auto& l : lines) {
      if (trim(l).empty()) continue;
      any = true;
      if (normalize_answer(l) != want) return false;
    }
    return any;
  }

  void run_sas(const PerAgentBudget& pb) {
    const AgentSpec& a = system.agents.front();
    run_agent(a, pb.iterations_per_agent, 0, {});
    finish(state[a.id].statement);
  }

  void run_independent(const PerAgentBudget& pb) {
    auto ws = workers();
    int sink = kAggregatorReceiver;
    for (const auto& a : system.agents)
      if (a.role == Role::aggregator || a.role == Role::orchestrator) sink = a.id;
    std::vector<std::pair<int, std::string>> outputs;
    for (const AgentSpec* w : ws) {
      std::string stmt = run_agent(*w, pb.iterations_per_agent, 0, {});
      post_message(w->id, sink, 0, stmt);
      outputs.emplace_back(w->id, stmt);
    }
    if (system.orchestration == OrchestrationPolicy::hierarchical)
      throw ConfigError("Independent topology has no orchestrator to aggregate");
    finish(aggregate_outputs(system.orchestration, outputs));
  }

  void run_decentralized(const PerAgentBudget& pb) {
    auto ws = workers();
    std::vector<MessageRecord> prev_round;
    for (int round = 0; round < system.budget.d_debate_rounds; ++round) {
      std::vector<MessageRecord> this_round;
      for (const AgentSpec* w : ws) {
        std::vector<MessageRecord> inbox;
        for (const auto& m : prev_round)
          if (m.sender != w->id) inbox.push_back(m);
        std::string stmt = run_agent(*w, pb.iterations_per_agent, round, inbox);
        MessageRecord m;
        m.sender = w->id;
        m.receiver = kBroadcastReceiver;
        m.round = round;
        m.payload = stmt;
        m.token_cost = tok(stmt);
        this_round.push_back(m);
      }
      for (const auto& m : this_round) {
        trace.messages.push_back(m);
        trace.total_tokens += m.token_cost;
      }
      prev_round = std::move(this_round);
      // Unanimity ends the debate early.
      bool unanimous = true;
      for (std::size_t i = 1; i < ws.size(); ++i)
        if (normalize_answer(state[ws[i]->id].statement) !=
            normalize_answer(state[ws[0]->id].statement))
          unanimous = false;
      if (unanimous) break;
    }
    std::vector<std::pair<int, std::string>> outputs;
    for (const AgentSpec* w : ws) outputs.emplace_back(w->id, state[w->id].statement);
    auto policy = system.orchestration == OrchestrationPolicy::hierarchical
                      ? OrchestrationPolicy::consensus
                      : system.orchestration;
    finish(aggregate_outputs(policy, outputs));
  }

  void run_orchestrated(const PerAgentBudget& pb, bool peer_phase) {
    auto ws = workers();
    const AgentSpec* orch = orchestrator();
    if (!orch) throw ConfigError("orchestrated topology needs an orchestrator");
    std::vector<MessageRecord> orch_inbox;
    std::optional<std::string> orch_final;
    std::string orch_last;
    for (int round = 0; round < system.budget.r_orchestrator_rounds; ++round) {
      orch_last = run_agent(*orch, 1, round, orch_inbox);
      if (state[orch->id].finished) {
        orch_final = orch_last;
        break;
      }
      // Instruction rides on the orchestrator turn; only result uploads are
      // accounted as messages.
      MessageRecord instruction;
      instruction.sender = orch->id;
      instruction.round = round;
      instruction.payload = orch_last;
      instruction.token_cost = 0;
      orch_inbox.clear();
      for (const AgentSpec* w : ws) {
        std::vector<MessageRecord> inbox{instruction};
        for (const auto& m : trace.messages)
          if (m.receiver == w->id) inbox.push_back(m);
        std::string stmt = run_agent(*w, pb.iterations_per_agent, round, inbox);
        post_message(w->id, orch->id, round, stmt);
        orch_inbox.push_back(trace.messages.back());
      }
      if (peer_phase && round == 0) {
        for (int pr = 0; pr < system.budget.p_peer_rounds; ++pr) {
          for (int j = 0; j < system.budget.m_peer_requests_per_round; ++j) {
            const AgentSpec* from = ws[j % ws.size()];
            const AgentSpec* to = ws[(j + 1) % ws.size()];
            post_message(from->id, to->id,
                         system.budget.r_orchestrator_rounds + pr,
                         state[from->id].statement);
          }
        }
      }
    }
    if (orch_final) {
      finish(*orch_final);
      return;
    }
    std::vector<std::pair<int, std::string>> outputs;
    for (const AgentSpec* w : ws) outputs.emplace_back(w->id, state[w->id].statement);
    if (system.orchestration == OrchestrationPolicy::hierarchical)
      finish(aggregate_outputs(system.orchestration, outputs, orch_last));
    else
      finish(aggregate_outputs(system.orchestration, outputs));
  }
};

}  // namespace detail

inline EpisodeTrace run_episode(const AgentSystem& system, const TaskSpec& task,
                                std::uint64_t seed, const BackendRegistry& registry,
                                Tokenizer tok = default_tokenizer()) {
  validate_system(system);  // configuration errors surface before execution
  PerAgentBudget pb = match_budget(system.topology, system.budget);
  detail::Executor ex(system, task, seed, registry, std::move(tok));
  try {
    switch (system.topology) {
      case Topology::SAS: ex.run_sas(pb); break;
      case Topology::Independent: ex.run_independent(pb); break;
      case Topology::Decentralized: ex.run_decentralized(pb); break;
      case Topology::Centralized: ex.run_orchestrated(pb, false); break;
      case Topology::Hybrid: ex.run_orchestrated(pb, true); break;
    }
  } catch (const BackendError& e) {
    ex.trace.outcome = Outcome::failure;
    ex.trace.error_annotation = e.what();
  }
  return ex.trace;
}

}  // namespace coordsim
