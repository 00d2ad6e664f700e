#include "expath/scorer.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "expath/serialize.hpp"

namespace expath {

std::string_view policy_name(PositionPolicy p) {
  switch (p) {
    case PositionPolicy::all: return "all";
    case PositionPolicy::head: return "head";
    case PositionPolicy::tail: return "tail";
  }
  return "?";
}

PositionPolicy parse_policy(std::string_view name) {
  if (name == "all") return PositionPolicy::all;
  if (name == "head") return PositionPolicy::head;
  if (name == "tail") return PositionPolicy::tail;
  throw InvalidArgument("unknown position policy '" + std::string(name) +
                        "' (expected all, head or tail)");
}

PositionPolicy choose_policy(const KnowledgeGraph& kg) {
  if (kg.num_entities() == 0) return PositionPolicy::all;
  const double ratio = static_cast<double>(kg.facts(Split::train).size()) /
                       static_cast<double>(kg.num_entities());
  return ratio < 10.0 ? PositionPolicy::head : PositionPolicy::all;
}

void ScoringOptions::validate() const {
  if (!use_cp && !use_pt)
    throw InvalidArgument("scoring needs CP or PT rules enabled (or a baseline method)");
}

double weight(const Fact& f, const MinedRule& rule, bool* fallback) {
  if (fallback) *fallback = false;
  if (!rule.rule.is_cp()) return 1.0;
  if (!rule.group) throw InvalidArgument("CP rule without a path group");
  const double sum = rule.relevance.rel_h + rule.relevance.rel_t;
  double r_h = 0.5;
  if (sum != 0.0) {
    r_h = rule.relevance.rel_h / sum;
  } else if (fallback) {
    *fallback = true;
  }
  const auto p = position_proportions(f, *rule.group);
  return r_h * p.head + (1.0 - r_h) * p.tail;
}

double noisy_or(std::span<const double> conf_times_weight) {
  double keep = 1.0;
  for (double x : conf_times_weight) keep *= 1.0 - x;
  return 1.0 - keep;
}

namespace {

bool supports(const MinedRule& rule, const Fact& f) {
  if (!rule.rule.is_cp()) return rule.pt_body_fact == f;
  for (const auto& p : rule.group->grounded) {
    if (p.first() == f || p.last() == f) return true;
  }
  return false;
}

bool enabled(const MinedRule& rule, const ScoringOptions& o) {
  return rule.rule.is_cp() ? o.use_cp : o.use_pt;
}

ScoredFact score_masked(const Fact& f, const MinedRuleSet& rules, const ScoringOptions& options,
                        const std::vector<bool>& active) {
  ScoredFact out;
  out.fact = f;
  std::vector<double> terms;
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& rule = rules.rules[i];
    if (!active[i] || !enabled(rule, options) || !supports(rule, f)) continue;
    const double w = weight(f, rule);
    out.contributions.push_back({i, rule.metrics.conf, w});
    terms.push_back(rule.metrics.conf * w);
  }
  out.cd = noisy_or(terms);
  return out;
}

bool incident(const Fact& f, EntityId e) { return f.head == e || f.tail == e; }

}  // namespace

ScoredFact confidence_degree(const Fact& f, const MinedRuleSet& rules,
                             const ScoringOptions& options) {
  return score_masked(f, rules, options, std::vector<bool>(rules.rules.size(), true));
}

Explanation select_explanation(const KnowledgeGraph& kg, const MinedRuleSet& rules, std::size_t k,
                               const ScoringOptions& options) {
  options.validate();
  if (k == 0) throw InvalidArgument("explanation size must be at least 1");
  Explanation ex;
  ex.prediction = rules.prediction;
  ex.policy = options.policy;
  ex.k = k;

  const EntityId h = rules.prediction.head;
  const EntityId t = rules.prediction.tail;
  std::set<Fact> candidates;
  for (const auto& rule : rules.rules) {
    if (!enabled(rule, options)) continue;
    if (rule.rule.is_cp()) {
      for (const auto& p : rule.group->grounded) {
        candidates.insert(p.first());
        candidates.insert(p.last());
      }
    } else {
      candidates.insert(rule.pt_body_fact);
    }
  }
  std::erase_if(candidates, [&](const Fact& f) {
    switch (options.policy) {
      case PositionPolicy::head: return !incident(f, h);
      case PositionPolicy::tail: return !incident(f, t);
      case PositionPolicy::all: return false;
    }
    return false;
  });

  std::map<Fact, std::string> labels;
  for (const auto& f : candidates) labels[f] = kg.to_string(f);
  auto better = [&](const ScoredFact& a, const ScoredFact& b) {
    if (a.cd != b.cd) return a.cd > b.cd;
    if (a.contributions.size() != b.contributions.size())
      return a.contributions.size() > b.contributions.size();
    return labels.at(a.fact) < labels.at(b.fact);
  };

  std::vector<bool> active(rules.rules.size(), true);
  auto score_all = [&] {
    std::vector<ScoredFact> scored;
    for (const auto& f : candidates) {
      auto s = score_masked(f, rules, options, active);
      if (!s.contributions.empty()) scored.push_back(std::move(s));
    }
    std::sort(scored.begin(), scored.end(), better);
    return scored;
  };

  if (!options.greedy) {
    auto scored = score_all();
    if (scored.size() > k) scored.resize(k);
    ex.facts = std::move(scored);
    return ex;
  }
  while (ex.facts.size() < k) {
    auto scored = score_all();
    if (scored.empty()) break;
    auto pick = std::move(scored.front());
    for (const auto& c : pick.contributions) active[c.rule_index] = false;
    candidates.erase(pick.fact);
    ex.facts.push_back(std::move(pick));
  }
  return ex;
}

namespace {

nlohmann::json step_json(const KnowledgeGraph& kg, const PathStep& s) {
  auto j = fact_json(kg, s.fact);
  j["inverse"] = s.inverse;
  return j;
}

const GroundedPath* example_path(const MinedRule& rule, const Fact& f) {
  if (!rule.group) return nullptr;
  for (const auto& p : rule.group->grounded) {
    if (p.first() == f || p.last() == f) return &p;
  }
  return nullptr;
}

}  // namespace

nlohmann::json explanation_json(const KnowledgeGraph& kg, const Explanation& ex,
                                const MinedRuleSet& rules) {
  nlohmann::json j;
  j["prediction"] = fact_json(kg, ex.prediction);
  j["policy"] = policy_name(ex.policy);
  j["k"] = ex.k;
  j["stats"] = {{"grounded_paths", rules.grounded_paths},
                {"relation_paths", rules.relation_paths},
                {"relevant_paths", rules.relevant_paths},
                {"paths_truncated", rules.paths_truncated},
                {"rules", rules.rules.size()}};
  auto facts = nlohmann::json::array();
  for (const auto& sf : ex.facts) {
    auto fj = fact_json(kg, sf.fact);
    fj["cd"] = sf.cd;
    auto rj = nlohmann::json::array();
    for (const auto& c : sf.contributions) {
      const auto& rule = rules.rules[c.rule_index];
      nlohmann::json entry;
      entry["rule"] = rule.text;
      entry["kind"] = rule.rule.is_cp() ? "cp" : "pt";
      entry["conf"] = c.conf;
      entry["w"] = c.weight;
      entry["supp"] = rule.metrics.supp;
      entry["sc"] = rule.metrics.sc;
      entry["hc"] = rule.metrics.hc;
      auto path = nlohmann::json::array();
      if (const auto* p = example_path(rule, sf.fact)) {
        for (const auto& s : p->steps) path.push_back(step_json(kg, s));
      } else {
        path.push_back(step_json(kg, PathStep{rule.pt_body_fact, rule.rule.pt_relation.inverse}));
      }
      entry["example_path"] = std::move(path);
      rj.push_back(std::move(entry));
    }
    fj["rules"] = std::move(rj);
    facts.push_back(std::move(fj));
  }
  j["facts"] = std::move(facts);
  return j;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string explanation_dot(const KnowledgeGraph& kg, const Explanation& ex,
                            const MinedRuleSet& rules, std::size_t max_nodes) {
  const EntityId h = ex.prediction.head;
  const EntityId t = ex.prediction.tail;
  std::set<Fact> explained;
  for (const auto& sf : ex.facts) explained.insert(sf.fact);
  std::set<Fact> on_path;
  for (const auto& sf : ex.facts) {
    for (const auto& c : sf.contributions) {
      if (const auto* p = example_path(rules.rules[c.rule_index], sf.fact)) {
        for (const auto& s : p->steps) on_path.insert(s.fact);
      }
    }
  }

  // Highlighted structure first, then the plain neighbourhood until the cap.
  std::vector<EntityId> order;
  std::set<EntityId> seen;
  auto visit = [&](EntityId e) {
    if (seen.insert(e).second) order.push_back(e);
  };
  visit(h);
  visit(t);
  for (const auto* group : {&explained, &on_path}) {
    for (const auto& f : *group) {
      visit(f.head);
      visit(f.tail);
    }
  }
  std::size_t omitted = 0;
  std::set<Fact> context;
  for (EntityId centre : {h, t}) {
    for (const auto& e : kg.neighbors(centre)) {
      if (seen.contains(e.other) || seen.size() < max_nodes) {
        visit(e.other);
        context.insert(e.fact);
      } else {
        ++omitted;
      }
    }
  }

  std::ostringstream out;
  out << "digraph explanation {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n";
  for (EntityId e : order) {
    out << "  n" << e << " [label=\"" << dot_escape(kg.entities().label(e)) << "\"";
    if (e == h || e == t) out << ", style=bold";
    out << "];\n";
  }
  std::set<Fact> drawn;
  auto edge = [&](const Fact& f, const char* attrs) {
    if (!drawn.insert(f).second) return;
    if (!seen.contains(f.head) || !seen.contains(f.tail)) return;
    out << "  n" << f.head << " -> n" << f.tail << " [label=\""
        << dot_escape(kg.relations().label(f.relation)) << "\"" << attrs << "];\n";
  };
  for (const auto& f : explained) edge(f, ", color=red, penwidth=2.5");
  for (const auto& f : on_path) edge(f, ", color=blue");
  for (const auto& f : context) edge(f, ", color=gray60");
  out << "  n" << h << " -> n" << t << " [label=\""
      << dot_escape(kg.relations().label(ex.prediction.relation))
      << "\", style=dashed, color=red];\n";
  if (omitted > 0) {
    out << "  truncated [shape=box, style=filled, fillcolor=khaki, label=\"" << omitted
        << " neighbour edges omitted (" << max_nodes << "-node cap)\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace expath
