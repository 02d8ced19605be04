#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coordsim/topology.hpp"
#include "coordsim/util.hpp"

namespace coordsim {

// ---------------------------------------------------------------------------
// Similarity
// ---------------------------------------------------------------------------

using SimilarityFn = std::function<double(const std::string&, const std::string&)>;

// Cosine over term-frequency vectors of lowercased whitespace tokens.
// Deterministic and hermetic; an embedding service can be plugged in instead.
inline double tf_cosine_similarity(const std::string& a, const std::string& b) {
  std::map<std::string, int> fa, fb;
  for (const auto& t : split_ws(to_lower(a))) ++fa[t];
  for (const auto& t : split_ws(to_lower(b))) ++fb[t];
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, c] : fa) {
    na += double(c) * c;
    auto it = fb.find(t);
    if (it != fb.end()) dot += double(c) * it->second;
  }
  for (const auto& [t, c] : fb) nb += double(c) * c;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline SimilarityFn default_similarity() {
  return [](const std::string& a, const std::string& b) {
    return tf_cosine_similarity(a, b);
  };
}

// ---------------------------------------------------------------------------
// Scalar coordination metrics
// ---------------------------------------------------------------------------

struct CoordinationMetrics {
  double success_rate = 0;
  double mean_turns = 0;
  double overhead_pct = 0;
  double message_density = 0;
  double redundancy = 0;
  double efficiency = 0;
  double error_amplification = 0;
  double success_per_kilotoken = 0;
  double error_rate = 0;
};

inline double coordination_overhead(double t_mas, double t_sas) {
  if (t_sas <= 0) throw DataError("coordination_overhead: t_sas must be > 0");
  return (t_mas - t_sas) / t_sas * 100.0;
}

inline double coordination_efficiency(double s, double t, double t_sas) {
  if (t <= 0 || t_sas <= 0)
    throw DataError("coordination_efficiency: turn counts must be > 0");
  return s / (t / t_sas);
}

inline double error_amplification(double e_mas, double e_sas) {
  if (e_sas <= 0) throw DataError("error_amplification: e_sas must be > 0");
  return e_mas / e_sas;
}

inline double error_absorption(double e_sas, double e_mas) {
  if (e_sas <= 0) throw DataError("error_absorption: e_sas must be > 0");
  return (e_sas - e_mas) / e_sas;
}

inline double message_density(const EpisodeTrace& trace) {
  if (trace.turns.empty()) throw DataError("message_density: trace has no turns");
  return static_cast<double>(trace.messages.size()) / trace.turns.size();
}

inline double redundancy(const std::vector<std::string>& rationales,
                         const SimilarityFn& sim = default_similarity()) {
  if (rationales.size() < 2)
    throw DataError("redundancy: need at least 2 rationales");
  double total = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < rationales.size(); ++i)
    for (std::size_t j = i + 1; j < rationales.size(); ++j) {
      total += sim(rationales[i], rationales[j]);
      ++pairs;
    }
  return total / pairs;
}

inline double success_per_kilotoken(double successes, double total_tokens) {
  if (total_tokens <= 0)
    throw DataError("success_per_kilotoken: total_tokens must be > 0");
  return successes / (total_tokens / 1000.0);
}

inline double agentic_advantage(double best_interactive, double best_single_shot) {
  if (best_interactive <= 0)
    throw DataError("agentic_advantage: interactive score must be > 0");
  return (best_interactive - best_single_shot) / best_interactive;
}

// ---------------------------------------------------------------------------
// Token overlap
// ---------------------------------------------------------------------------

struct TokenOverlapReport {
  double unique_mass = 0;
  double shared_mass = 0;
  double contradictory_mass = 0;
  double shared_token_entropy_bits = 0;
};

// Labels every token instance unique / shared / contradictory. Assertion
// pairs (sentences from different agents) below the similarity threshold mark
// their tokens contradictory, overriding the overlap label.
inline TokenOverlapReport classify_token_overlap(
    const std::map<int, std::string>& rationales,
    const SimilarityFn& sim = default_similarity(),
    double contradiction_threshold = 0.3) {
  if (rationales.size() < 2)
    throw DataError("classify_token_overlap: need at least 2 rationales");

  std::map<std::string, std::set<int>> owners;
  std::map<int, std::vector<std::string>> tokens;
  long total = 0;
  for (const auto& [id, text] : rationales) {
    tokens[id] = split_ws(to_lower(text));
    total += static_cast<long>(tokens[id].size());
    for (const auto& t : tokens[id]) owners[t].insert(id);
  }
  if (total == 0) return {};

  std::map<int, std::set<std::string>> contradictory_per_agent;
  for (auto it = rationales.begin(); it != rationales.end(); ++it)
    for (auto jt = std::next(it); jt != rationales.end(); ++jt)
      for (const auto& sa : split_sentences(it->second))
        for (const auto& sb : split_sentences(jt->second))
          if (sim(sa, sb) < contradiction_threshold) {
            for (const auto& t : split_ws(to_lower(sa)))
              contradictory_per_agent[it->first].insert(t);
            for (const auto& t : split_ws(to_lower(sb)))
              contradictory_per_agent[jt->first].insert(t);
          }

  long unique_n = 0, shared_n = 0, contra_n = 0;
  std::map<std::string, long> shared_counts;
  for (const auto& [id, toks] : tokens) {
    const auto& contra = contradictory_per_agent[id];
    for (const auto& t : toks) {
      if (contra.count(t)) {
        ++contra_n;
      } else if (owners[t].size() == 1) {
        ++unique_n;
      } else {
        ++shared_n;
        ++shared_counts[t];
      }
    }
  }

  TokenOverlapReport rep;
  rep.unique_mass = double(unique_n) / total;
  rep.shared_mass = double(shared_n) / total;
  rep.contradictory_mass = double(contra_n) / total;
  if (shared_n > 0) {
    double h = 0;
    for (const auto& [t, c] : shared_counts) {
      double p = double(c) / shared_n;
      h -= p * std::log2(p);
    }
    rep.shared_token_entropy_bits = std::max(0.0, h);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

enum class ErrorCategory {
  logical_contradiction,
  numerical_drift,
  context_omission,
  coordination_failure
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::logical_contradiction: return "logical_contradiction";
    case ErrorCategory::numerical_drift: return "numerical_drift";
    case ErrorCategory::context_omission: return "context_omission";
    case ErrorCategory::coordination_failure: return "coordination_failure";
  }
  return "?";
}

struct ErrorRecord {
  ErrorCategory category;
  int agent_id = 0;
  int turn_index = 0;
  std::string detail;
};

struct ErrorCandidate {
  int agent_id = 0;
  int turn_index = 0;
  std::string text;
  std::optional<double> numeric_value;
  std::vector<std::string> required_entities;
  std::optional<int> message_receiver;
  std::vector<int> valid_agent_ids;
  bool is_mas = false;
};

struct GroundTruth {
  std::optional<double> numeric_value;
};

namespace detail {

// Extract (entity, predicate, polarity) triples from "<entity> is [not] <pred>".
struct Assertion {
  std::string entity, predicate;
  bool positive;
};

inline std::vector<Assertion> extract_assertions(const std::string& text) {
  std::vector<Assertion> out;
  for (const auto& sentence : split_sentences(to_lower(text))) {
    auto toks = split_ws(sentence);
    for (std::size_t i = 1; i + 1 < toks.size() + 1; ++i) {
      if (i < toks.size() && toks[i] == "is") {
        if (i + 1 < toks.size() && toks[i + 1] == "not" && i + 2 < toks.size())
          out.push_back({toks[i - 1], toks[i + 2], false});
        else if (i + 1 < toks.size() && toks[i + 1] == "false")
          out.push_back({toks[i - 1], "true", false});
        else if (i + 1 < toks.size())
          out.push_back({toks[i - 1], toks[i + 1], true});
      }
    }
  }
  return out;
}

inline bool has_contradiction(const std::string& text, std::string* detail) {
  auto as = extract_assertions(text);
  for (std::size_t i = 0; i < as.size(); ++i)
    for (std::size_t j = i + 1; j < as.size(); ++j)
      if (as[i].entity == as[j].entity && as[i].predicate == as[j].predicate &&
          as[i].positive != as[j].positive) {
        if (detail) *detail = "conflicting assertions about '" + as[i].entity + "'";
        return true;
      }
  return false;
}

}  // namespace detail

// Deterministic rule-based classifier. Unclassifiable candidates return
// nullopt; callers keep their own dropped-count.
inline std::optional<ErrorRecord> classify_error(const ErrorCandidate& c,
                                                 const GroundTruth& truth) {
  ErrorRecord rec;
  rec.agent_id = c.agent_id;
  rec.turn_index = c.turn_index;

  if (c.is_mas && c.message_receiver &&
      std::find(c.valid_agent_ids.begin(), c.valid_agent_ids.end(),
                *c.message_receiver) == c.valid_agent_ids.end()) {
    rec.category = ErrorCategory::coordination_failure;
    rec.detail = "message routed to nonexistent agent " +
                 std::to_string(*c.message_receiver);
    return rec;
  }
  std::string detail;
  if (detail::has_contradiction(c.text, &detail)) {
    rec.category = ErrorCategory::logical_contradiction;
    rec.detail = detail;
    return rec;
  }
  if (c.numeric_value && truth.numeric_value && *truth.numeric_value != 0) {
    double rel = std::fabs(*c.numeric_value - *truth.numeric_value) /
                 std::fabs(*truth.numeric_value);
    // Strictly above 5%: a value at exactly 5% deviation is not drift.
    if (rel > 0.05) {
      rec.category = ErrorCategory::numerical_drift;
      rec.detail = "relative deviation " + std::to_string(rel);
      return rec;
    }
  }
  if (!c.required_entities.empty()) {
    std::string lower = to_lower(c.text);
    for (const auto& ent : c.required_entities)
      if (lower.find(to_lower(ent)) == std::string::npos) {
        rec.category = ErrorCategory::context_omission;
        rec.detail = "missing required entity '" + ent + "'";
        return rec;
      }
  }
  return std::nullopt;
}

// Fraction of turns carrying at least one error record.
inline double trace_error_rate(const EpisodeTrace& trace,
                               const std::vector<ErrorRecord>& records) {
  if (trace.turns.empty()) return 0.0;
  std::set<int> bad;
  for (const auto& r : records) bad.insert(r.turn_index);
  return double(bad.size()) / trace.turns.size();
}

// ---------------------------------------------------------------------------
// Information gain
// ---------------------------------------------------------------------------

struct InformationGain {
  double bits = 0;
  bool degenerate_posterior = false;
};

// Bernoulli posterior-variance reduction in bits: 1/2 log2(var_pre/var_post)
// with var = p(1-p) at the list mean.
inline InformationGain information_gain(const std::vector<double>& pre,
                                        const std::vector<double>& post) {
  if (pre.empty() || post.empty())
    throw DataError("information_gain: probability lists must be nonempty");
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) {
      if (x < 0 || x > 1) throw DataError("information_gain: probability out of [0,1]");
      s += x;
    }
    return s / v.size();
  };
  double p_pre = mean(pre), p_post = mean(post);
  double var_pre = p_pre * (1 - p_pre), var_post = p_post * (1 - p_post);
  InformationGain out;
  if (var_pre == var_post) return out;
  if (var_post == 0) {
    out.bits = var_pre > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    out.degenerate_posterior = var_pre > 0;
    return out;
  }
  if (var_pre == 0) {
    out.bits = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.bits = 0.5 * std::log2(var_pre / var_post);
  return out;
}

}  // namespace coordsim
