#include "expath/rules.hpp"

#include <algorithm>
#include <cctype>

#include "expath/random.hpp"

namespace expath {

Rule Rule::closed_path(RelationId head, RelationPath body) {
  Rule r;
  r.kind = RuleKind::cp;
  r.head_relation = head;
  r.body = std::move(body);
  return r;
}

Rule Rule::property_head(RelationId head, EntityId c, SignedRelation r0, EntityId c_body) {
  Rule r;
  r.kind = RuleKind::pt_head;
  r.head_relation = head;
  r.pt_head_constant = c;
  r.pt_relation = r0;
  r.pt_body_constant = c_body;
  return r;
}

Rule Rule::property_tail(RelationId head, EntityId c, SignedRelation r0, EntityId c_body) {
  Rule r = property_head(head, c, r0, c_body);
  r.kind = RuleKind::pt_tail;
  return r;
}

std::string to_string(const KnowledgeGraph& kg, const Rule& rule) {
  const auto& head = kg.relations().label(rule.head_relation);
  switch (rule.kind) {
    case RuleKind::cp:
      return head + " <- " + to_string(kg, rule.body);
    case RuleKind::pt_head:
      return head + "(X, " + kg.entities().label(rule.pt_head_constant) + ") <- " +
             kg.to_string(rule.pt_relation) + "(X, " +
             kg.entities().label(rule.pt_body_constant) + ")";
    case RuleKind::pt_tail:
      return head + "(" + kg.entities().label(rule.pt_head_constant) + ", Y) <- " +
             kg.to_string(rule.pt_relation) + "(Y, " +
             kg.entities().label(rule.pt_body_constant) + ")";
  }
  return {};
}

namespace {

class RuleParser {
 public:
  RuleParser(const KnowledgeGraph& kg, std::string_view text) : kg_(kg), text_(text) {}

  Rule parse() {
    const auto arrow = text_.find("<-");
    if (arrow == std::string_view::npos) fail("expected '<-'", 0);
    const auto head = span(0, arrow);
    const auto body = span(arrow + 2, text_.size());
    if (head.empty()) fail("empty rule head", 0);
    if (body.empty()) fail("empty rule body", arrow + 2);

    if (text_.substr(head.begin, head.size()).find('(') != std::string_view::npos) {
      return parse_property(head, body);
    }
    auto head_rel = relation(head, /*head=*/true);
    if (head_rel.inverse) fail("rule head cannot be an inverse relation", head.begin);
    RelationPath path;
    std::size_t start = body.begin;
    while (true) {
      auto comma = text_.find(',', start);
      const std::size_t end = (comma == std::string_view::npos || comma >= body.end) ? body.end : comma;
      path.push_back(relation(span(start, end), false));
      if (end == body.end) break;
      start = end + 1;
    }
    if (path.size() > kMaxPathLength) fail("closed-path body longer than 3", body.begin);
    return Rule::closed_path(head_rel.relation, std::move(path));
  }

 private:
  struct Span {
    std::size_t begin;
    std::size_t end;
    bool empty() const { return begin >= end; }
    std::size_t size() const { return end - begin; }
  };

  [[noreturn]] void fail(const std::string& msg, std::size_t pos) const {
    throw ParseError("rule parse error at column " + std::to_string(pos + 1) + ": " + msg, 1,
                     pos + 1);
  }

  Span span(std::size_t b, std::size_t e) const {
    while (b < e && std::isspace(static_cast<unsigned char>(text_[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text_[e - 1]))) --e;
    return {b, e};
  }

  std::string_view view(Span s) const { return text_.substr(s.begin, s.size()); }

  void no_inner_space(Span s, const char* hint) const {
    for (auto i = s.begin; i < s.end; ++i) {
      if (std::isspace(static_cast<unsigned char>(text_[i])))
        fail(std::string("unexpected whitespace inside a name; ") + hint, i);
    }
  }

  SignedRelation relation(Span s, bool head) const {
    if (s.empty()) fail("empty relation name", s.begin);
    no_inner_space(s, "separate body relations with ','");
    auto name = view(s);
    bool inverse = false;
    if (name.back() == '\'') {
      inverse = true;
      name.remove_suffix(1);
    }
    auto id = kg_.relations().find(name);
    if (!id) {
      if (head) throw HeadRelationAbsent("head relation '" + std::string(name) + "' is not in the graph");
      throw LookupError("relation '" + std::string(name) + "' is not in the graph");
    }
    return {*id, inverse};
  }

  EntityId entity(Span s) const {
    if (s.empty()) fail("empty constant", s.begin);
    no_inner_space(s, "constants cannot contain whitespace");
    auto id = kg_.entities().find(view(s));
    if (!id) throw LookupError("entity '" + std::string(view(s)) + "' is not in the graph");
    return *id;
  }

  struct Atom {
    SignedRelation relation;
    Span first;
    Span second;
  };

  Atom atom(Span s, bool head) const {
    auto text = view(s);
    auto open = text.find('(');
    if (open == std::string_view::npos) fail("expected '('", s.begin);
    if (text.back() != ')') fail("expected ')'", s.end - 1);
    Atom a;
    a.relation = relation(span(s.begin, s.begin + open), head);
    const std::size_t args_begin = s.begin + open + 1;
    const std::size_t args_end = s.end - 1;
    auto args = text_.substr(args_begin, args_end - args_begin);
    // One argument is a variable, so split at the comma next to it.
    auto first_comma = args.find(',');
    auto last_comma = args.rfind(',');
    if (first_comma == std::string_view::npos) fail("expected two arguments", args_begin);
    auto lead = span(args_begin, args_begin + first_comma);
    auto trail = span(args_begin + last_comma + 1, args_end);
    if (view(lead) == "X" || view(lead) == "Y") {
      a.first = lead;
      a.second = span(args_begin + first_comma + 1, args_end);
    } else if (view(trail) == "X" || view(trail) == "Y") {
      a.first = span(args_begin, args_begin + last_comma);
      a.second = trail;
    } else {
      fail("property-transition atom needs a variable X or Y", args_begin);
    }
    return a;
  }

  Rule parse_property(Span head, Span body) const {
    Atom h = atom(head, true);
    Atom b = atom(body, false);
    if (h.relation.inverse) fail("rule head cannot be an inverse relation", head.begin);
    if (view(b.first) != "X" && view(b.first) != "Y")
      fail("body atom must read r0(Var, c')", body.begin);
    if (view(h.first) == "X") {
      if (view(b.first) != "X") fail("body variable must match head variable X", b.first.begin);
      return Rule::property_head(h.relation.relation, entity(h.second), b.relation, entity(b.second));
    }
    if (view(h.second) == "Y") {
      if (view(b.first) != "Y") fail("body variable must match head variable Y", b.first.begin);
      return Rule::property_tail(h.relation.relation, entity(h.first), b.relation, entity(b.second));
    }
    fail("head must read r(X, c) or r(c, Y)", head.begin);
  }

  const KnowledgeGraph& kg_;
  std::string_view text_;
};

std::vector<EntityId> others(std::span<const Edge> edges) {
  std::vector<EntityId> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.push_back(e.other);
  return out;
}

std::size_t sorted_intersection_size(const std::vector<EntityId>& a, const std::vector<EntityId>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

RuleMetrics finish(std::uint64_t supp, std::uint64_t body, std::uint64_t head,
                   std::uint64_t min_supp) {
  RuleMetrics m;
  m.supp = supp;
  m.body_count = body;
  m.head_count = head;
  m.sc = body ? static_cast<double>(supp) / static_cast<double>(body) : 0.0;
  m.hc = head ? static_cast<double>(supp) / static_cast<double>(head) : 0.0;
  m.conf = smoothed_confidence(m.sc, supp, min_supp);
  return m;
}

}  // namespace

Rule parse_rule(const KnowledgeGraph& kg, std::string_view text) {
  return RuleParser(kg, text).parse();
}

double smoothed_confidence(double sc, std::uint64_t supp, std::uint64_t min_supp) {
  if (supp == 0) return 0.0;
  return sc * static_cast<double>(supp) / static_cast<double>(supp + min_supp);
}

SparseBoolMatrix body_matrix(const KnowledgeGraph& kg, const RelationPath& body) {
  if (body.empty()) throw InvalidArgument("rule body must not be empty");
  SparseBoolMatrix acc = kg.adjacency(body.front());
  for (std::size_t i = 1; i < body.size(); ++i) acc = acc.bool_product(kg.adjacency(body[i]));
  return acc;
}

RuleMetrics eval_cp(const KnowledgeGraph& kg, RelationId head, const RelationPath& body,
                    std::uint64_t min_supp) {
  if (head >= kg.num_relations()) throw HeadRelationAbsent("head relation id out of range");
  const auto head_matrix = kg.adjacency(forward(head));
  if (head_matrix.nnz() == 0)
    throw HeadRelationAbsent("head relation '" + kg.relations().label(head) +
                             "' has no train facts");
  const auto b = body_matrix(kg, body);
  return finish(b.and_count(head_matrix), b.nnz(), head_matrix.nnz(), min_supp);
}

RuleMetrics eval_pt(const KnowledgeGraph& kg, const Rule& rule, std::uint64_t min_supp) {
  if (rule.is_cp()) throw InvalidArgument("eval_pt expects a property-transition rule");
  std::vector<EntityId> heads;
  if (rule.kind == RuleKind::pt_head) {
    heads = others(kg.neighbors(rule.pt_head_constant, backward(rule.head_relation)));
  } else {
    heads = others(kg.neighbors(rule.pt_head_constant, forward(rule.head_relation)));
  }
  const auto bodies = others(kg.neighbors(rule.pt_body_constant, rule.pt_relation.invert()));
  return finish(sorted_intersection_size(heads, bodies), bodies.size(), heads.size(), min_supp);
}

RuleMetrics evaluate(const KnowledgeGraph& kg, const Rule& rule, std::uint64_t min_supp) {
  return rule.is_cp() ? eval_cp(kg, rule.head_relation, rule.body, min_supp)
                      : eval_pt(kg, rule, min_supp);
}

RelevanceEstimator::RelevanceEstimator(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                       RelevanceOptions options)
    : kg_(kg), model_(model), options_(options) {}

std::size_t RelevanceEstimator::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

std::shared_ptr<const std::optional<std::vector<float>>> RelevanceEstimator::mimic(
    EntityId e, SignedRelation sr) {
  CacheKey key{e, sr};
  if (options_.exclude_both_orientations) key.relation.inverse = false;
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  FactSet excluded;
  for (const auto& edge : kg_.neighbors(e, sr)) excluded.insert(edge.fact);
  if (options_.exclude_both_orientations) {
    for (const auto& edge : kg_.neighbors(e, sr.invert())) excluded.insert(edge.fact);
  }
  const std::uint64_t salt =
      mix_seed(key.relation.relation, (key.relation.inverse ? 1u : 0u) |
                                          (options_.exclude_both_orientations ? 2u : 0u));
  const auto epochs = options_.epochs.value_or(model_.config().mimic_epochs);
  std::optional<std::vector<float>> vec;
  try {
    vec = post_train_mimic(model_, kg_, e, excluded, epochs, salt);
  } catch (const DegenerateEntity&) {
    vec.reset();
  }
  auto value = std::make_shared<const std::optional<std::vector<float>>>(std::move(vec));
  std::unique_lock lock(mutex_);
  // Another thread may have won the race; its value is identical.
  auto [it, inserted] = cache_.emplace(key, value);
  return it->second;
}

double RelevanceEstimator::side_relevance(const Fact& prediction, Side side, SignedRelation sr,
                                          bool* degenerate) {
  const EntityId e = side == Side::head ? prediction.head : prediction.tail;
  auto vec = mimic(e, sr);
  if (!vec->has_value()) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  if (degenerate) *degenerate = false;
  const std::span<const float> m(**vec);
  const double original = plausibility(model_, prediction.head, prediction.relation, prediction.tail);
  const double mimicked =
      side == Side::head
          ? plausibility(model_.score(m, prediction.relation, model_.entity(prediction.tail)))
          : plausibility(model_.score(model_.entity(prediction.head), prediction.relation, m));
  return 1.0 - mimicked / original;
}

RelevancePair RelevanceEstimator::relevance(const Fact& prediction, const RelationPath& path) {
  if (path.empty()) throw InvalidArgument("relation path must not be empty");
  RelevancePair out;
  out.rel_h = side_relevance(prediction, Side::head, path.front(), &out.degenerate_h);
  out.rel_t = side_relevance(prediction, Side::tail, path.back().invert(), &out.degenerate_t);
  return out;
}

RuleMiner::RuleMiner(const KnowledgeGraph& kg, const EmbeddingModel& model, MiningOptions options)
    : kg_(kg), model_(model), options_(options), relevance_(kg, model, options.relevance) {}

RuleMetrics RuleMiner::cp_metrics(RelationId head, const RelationPath& body) {
  auto key = std::make_pair(head, body);
  {
    std::lock_guard lock(cp_mutex_);
    if (auto it = cp_cache_.find(key); it != cp_cache_.end()) return it->second;
  }
  auto m = eval_cp(kg_, head, body, options_.thresholds.min_supp);
  std::lock_guard lock(cp_mutex_);
  cp_cache_.emplace(std::move(key), m);
  return m;
}

bool RuleMiner::passes(const RuleMetrics& m) const {
  return m.sc >= options_.thresholds.min_sc && m.hc >= options_.thresholds.min_hc;
}

MinedRuleSet RuleMiner::mine(const Fact& prediction) {
  const EntityId h = prediction.head;
  const EntityId t = prediction.tail;
  const RelationId r = prediction.relation;
  MinedRuleSet out;
  out.prediction = prediction;

  auto search = find_grounded_paths(kg_, h, t, options_.max_len, options_.path_cap);
  out.grounded_paths = search.paths.size();
  out.paths_truncated = search.truncated;
  for (const auto& p : search.paths) {
    for (const auto& s : p.steps) {
      if (s.fact == prediction) throw Error("prediction appears as a train fact on its own path");
    }
  }
  auto groups = aggregate(search.paths);
  out.relation_paths = groups.size();

  const bool head_present = !kg_.facts_by_relation(r).empty();
  for (auto& g : groups) {
    const auto rel = relevance_.relevance(prediction, g.relations);
    if (!(rel.rel_h > options_.rel_eps && rel.rel_t > options_.rel_eps)) continue;
    ++out.relevant_paths;
    if (!head_present) continue;
    const auto m = cp_metrics(r, g.relations);
    if (!passes(m)) continue;
    MinedRule mr;
    mr.rule = Rule::closed_path(r, g.relations);
    mr.metrics = m;
    mr.relevance = rel;
    mr.group = std::make_shared<const PathGroup>(std::move(g));
    mr.text = to_string(kg_, mr.rule);
    out.rules.push_back(std::move(mr));
  }

  auto add_pt = [&](const Rule& rule, const Fact& body_fact) {
    const auto m = eval_pt(kg_, rule, options_.thresholds.min_supp);
    if (!passes(m)) return;
    MinedRule mr;
    mr.rule = rule;
    mr.metrics = m;
    mr.pt_body_fact = body_fact;
    mr.text = to_string(kg_, rule);
    out.rules.push_back(std::move(mr));
  };
  for (const auto& e : kg_.neighbors(h)) {
    if (e.fact == prediction) continue;
    if (e.relation == forward(r) && e.other == t) continue;
    add_pt(Rule::property_head(r, t, e.relation, e.other), e.fact);
  }
  for (const auto& e : kg_.neighbors(t)) {
    if (e.fact == prediction) continue;
    if (e.relation == backward(r) && e.other == h) continue;
    add_pt(Rule::property_tail(r, h, e.relation, e.other), e.fact);
  }

  std::sort(out.rules.begin(), out.rules.end(), [](const MinedRule& a, const MinedRule& b) {
    if (a.metrics.conf != b.metrics.conf) return a.metrics.conf > b.metrics.conf;
    return a.text < b.text;
  });
  return out;
}

MinedRuleSet mine(const KnowledgeGraph& kg, const EmbeddingModel& model, const Fact& prediction,
                  const MiningOptions& options) {
  RuleMiner miner(kg, model, options);
  return miner.mine(prediction);
}

}  // namespace expath
