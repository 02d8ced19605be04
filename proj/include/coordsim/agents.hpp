#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "coordsim/core.hpp"

namespace coordsim {

struct StepContext {
  int agent_id = 0;
  int turn_index = 0;  // per-agent step count
  int round = 0;
  const History* history = nullptr;
  std::vector<MessageRecord> inbox;
  std::uint64_t seed = 0;
};

// The per-agent decision function: one action per step.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual ActionRecord step(const StepContext& ctx) = 0;
};

using BackendPtr = std::shared_ptr<AgentBackend>;

// Replays a fixed action list; exhaustion yields an empty final answer.
class ScriptedAgent : public AgentBackend {
 public:
  struct Injection {
    int turn_index;
    std::string corrupted_payload;
  };

  explicit ScriptedAgent(std::vector<ActionRecord> script,
                         std::vector<Injection> error_injections = {})
      : script_(std::move(script)), injections_(std::move(error_injections)) {
    if (script_.empty()) throw ConfigError("scripted agent needs a nonempty script");
  }

  ActionRecord step(const StepContext& ctx) override {
    if (ctx.turn_index >= static_cast<int>(script_.size())) {
      ActionRecord done;
      done.kind = ActionKind::final_answer;
      done.payload.clear();
      done.token_cost = 0;
      return done;
    }
    ActionRecord a = script_[ctx.turn_index];
    for (const auto& inj : injections_)
      if (inj.turn_index == ctx.turn_index) {
        a.payload = inj.corrupted_payload;
        a.token_cost = whitespace_token_count(a.payload);
      }
    return a;
  }

 private:
  std::vector<ActionRecord> script_;
  std::vector<Injection> injections_;
};

// Monte-Carlo backend: answers answer_pool[0], corrupted with probability
// base_error_rate. Fully determined by (agent seed, step seed, turn index).
class StochasticAgent : public AgentBackend {
 public:
  StochasticAgent(double base_error_rate, std::vector<std::string> answer_pool,
                  std::uint64_t seed)
      : rate_(base_error_rate), pool_(std::move(answer_pool)), seed_(seed) {
    if (rate_ < 0.0 || rate_ > 1.0)
      throw ConfigError("base_error_rate must be in [0,1]");
    if (pool_.empty()) throw ConfigError("answer pool must be nonempty");
  }

  ActionRecord step(const StepContext& ctx) override {
    // splitmix chain rather than mt19937: the first mt19937 output after
    // single-word seeding is visibly biased across sequential episode seeds
    std::uint64_t h = mix_seed(seed_ ^ ctx.seed, ctx.agent_id, ctx.turn_index);
    double u = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
    ActionRecord a;
    a.kind = ActionKind::final_answer;
    if (u < rate_) {
      std::uint64_t pick = splitmix64(h + 0x6a09e667ULL);
      a.payload = pool_.size() > 1 ? pool_[1 + pick % (pool_.size() - 1)]
                                   : pool_[0] + " [corrupted]";
    } else {
      a.payload = pool_[0];
    }
    a.token_cost = whitespace_token_count(a.payload);
    return a;
  }

 private:
  double rate_;
  std::vector<std::string> pool_;
  std::uint64_t seed_;
};

// Lenient grammar for model output:
//   "FINAL: <answer>"               -> final_answer
//   "TO <id>: <text>"               -> message_send
//   "<tool> k=v k=v ..."            -> tool_call (tool must look like a name)
// Anything else becomes a no-op observation carried as an empty tool call.
inline ActionRecord parse_llm_action(const std::string& text) {
  ActionRecord a;
  std::string t = trim(text);
  if (t.rfind("FINAL:", 0) == 0) {
    a.kind = ActionKind::final_answer;
    a.payload = trim(t.substr(6));
    a.token_cost = whitespace_token_count(a.payload);
    return a;
  }
  if (t.rfind("TO ", 0) == 0) {
    auto colon = t.find(':');
    if (colon != std::string::npos) {
      std::string id_part = trim(t.substr(3, colon - 3));
      bool numeric = !id_part.empty() &&
                     id_part.find_first_not_of("0123456789") == std::string::npos;
      if (numeric) {
        a.kind = ActionKind::message_send;
        a.parameters["recipient"] = id_part;
        a.payload = trim(t.substr(colon + 1));
        a.token_cost = whitespace_token_count(a.payload);
        return a;
      }
    }
  }
  auto toks = split_ws(t);
  if (!toks.empty() &&
      toks[0].find_first_not_of(
          "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") ==
          std::string::npos &&
      !toks[0].empty() && !std::isdigit(static_cast<unsigned char>(toks[0][0]))) {
    bool args_ok = true;
    std::map<std::string, std::string> params;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      auto eq = toks[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        args_ok = false;
        break;
      }
      params[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
    }
    if (args_ok) {
      a.kind = ActionKind::tool_call;
      a.tool_name = toks[0];
      a.parameters = std::move(params);
      a.payload = t;
      a.token_cost = whitespace_token_count(a.payload);
      return a;
    }
  }
  // Malformed output: represent as a no-op tool call so the turn is recorded
  // without aborting the episode.
  a.kind = ActionKind::tool_call;
  a.tool_name = "noop";
  a.payload = t;
  a.token_cost = whitespace_token_count(a.payload);
  return a;
}

struct LlmAgentConfig {
  std::string endpoint;     // e.g. http://host:port/v1/chat/completions
  std::string model_label;
  double temperature = 0.7;
  int request_timeout_sec = 30;
  int max_retries = 3;
  std::vector<std::string> api_key_ring;
};

// Transport is injected so the adapter (retry, backoff, key rotation, parse)
// is testable without a live service. The default transport in tools/ uses
// cpp-httplib.
using LlmTransport = std::function<std::string(const LlmAgentConfig&,
                                               const std::string& api_key,
                                               const std::string& prompt)>;

class LlmAgent : public AgentBackend {
 public:
  LlmAgent(LlmAgentConfig cfg, LlmTransport transport)
      : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    if (cfg_.api_key_ring.empty()) cfg_.api_key_ring.push_back("");
  }

  ActionRecord step(const StepContext& ctx) override {
    std::string prompt = render_prompt(ctx);
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      const std::string& key = next_key();
      try {
        return parse_llm_action(transport_(cfg_, key, prompt));
      } catch (const std::exception& e) {
        last_error = e.what();
        if (attempt < cfg_.max_retries)
          std::this_thread::sleep_for(
              std::chrono::milliseconds(std::min(1000, 25 << attempt)));
      }
    }
    throw BackendError("llm transport failed after retries: " + last_error);
  }

 private:
  const std::string& next_key() {
    std::lock_guard<std::mutex> lock(mu_);
    key_index_ = (key_index_ + 1) % cfg_.api_key_ring.size();
    return cfg_.api_key_ring[key_index_];
  }

  std::string render_prompt(const StepContext& ctx) const {
    std::string p;
    if (ctx.history)
      for (const auto& s : ctx.history->steps) {
        p += s.action.payload;
        p += '\n';
        p += s.observation.payload;
        p += '\n';
      }
    for (const auto& m : ctx.inbox) {
      p += "[from " + std::to_string(m.sender) + "] " + m.payload + "\n";
    }
    return p;
  }

  LlmAgentConfig cfg_;
  LlmTransport transport_;
  std::mutex mu_;
  std::size_t key_index_ = 0;
};

}  // namespace coordsim
