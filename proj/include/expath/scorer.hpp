#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "expath/kg.hpp"
#include "expath/rules.hpp"

namespace expath {

enum class PositionPolicy { all, head, tail };

std::string_view policy_name(PositionPolicy p);
PositionPolicy parse_policy(std::string_view name);  // all | head | tail

// Facts-per-entity below 10 selects head; otherwise all.
PositionPolicy choose_policy(const KnowledgeGraph& kg);

struct ScoringOptions {
  bool use_cp = true;
  bool use_pt = true;
  PositionPolicy policy = PositionPolicy::all;
  // Re-score after each pick with the picked fact's rules removed.
  bool greedy = false;

  void validate() const;  // at least one rule kind enabled
};

// Importance of `f` inside one mined rule: 1 for PT, otherwise
// r_h * p_h + (1 - r_h) * p_t with r_h = Rel_h / (Rel_h + Rel_t).
// `fallback` is set when Rel_h + Rel_t == 0 forced r_h = 0.5.
double weight(const Fact& f, const MinedRule& rule, bool* fallback = nullptr);

// 1 - prod(1 - conf_i * w_i).
double noisy_or(std::span<const double> conf_times_weight);

struct Contribution {
  std::size_t rule_index = 0;  // into MinedRuleSet::rules
  double conf = 0.0;
  double weight = 0.0;
};

struct ScoredFact {
  Fact fact;
  double cd = 0.0;
  std::vector<Contribution> contributions;
};

// Rules supporting f: CP rules with f as a first or last hop of one of their
// grounded paths, PT rules whose body fact is f.
ScoredFact confidence_degree(const Fact& f, const MinedRuleSet& rules,
                             const ScoringOptions& options = {});

struct Explanation {
  Fact prediction;
  PositionPolicy policy = PositionPolicy::all;
  std::size_t k = 1;
  std::vector<ScoredFact> facts;  // cd descending
};

Explanation select_explanation(const KnowledgeGraph& kg, const MinedRuleSet& rules, std::size_t k,
                               const ScoringOptions& options);

// {prediction, policy, k, facts: [{h, r, t, cd, rules: [{rule, conf, w, example_path}]}]}
nlohmann::json explanation_json(const KnowledgeGraph& kg, const Explanation& ex,
                                const MinedRuleSet& rules);

// Graphviz rendering of the h/t neighbourhood with explanation facts and one
// grounded path per supporting CP rule highlighted.
std::string explanation_dot(const KnowledgeGraph& kg, const Explanation& ex,
                            const MinedRuleSet& rules, std::size_t max_nodes = 60);

}  // namespace expath
