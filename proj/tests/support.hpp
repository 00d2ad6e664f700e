#pragma once

// Random graph generators and brute-force oracles shared by the unit tests
// and the acceptance harness.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "expath/kg.hpp"
#include "expath/paths.hpp"
#include "expath/random.hpp"
#include "expath/rules.hpp"

namespace expath::testkit {

struct RandomGraphSpec {
  std::uint32_t entities = 50;
  std::uint32_t relations = 4;
  std::size_t facts = 200;
  double self_loop_rate = 0.02;
};

inline std::vector<Triple> random_triples(const RandomGraphSpec& spec, Rng& rng) {
  std::vector<Triple> out;
  for (std::size_t i = 0; i < spec.facts; ++i) {
    auto h = static_cast<std::uint32_t>(rng.below(spec.entities));
    auto t = static_cast<std::uint32_t>(rng.below(spec.entities));
    if (h == t && !rng.bernoulli(spec.self_loop_rate)) t = (t + 1) % spec.entities;
    const auto r = static_cast<std::uint32_t>(rng.below(spec.relations));
    out.push_back({"e" + std::to_string(h), "r" + std::to_string(r), "e" + std::to_string(t)});
  }
  return out;
}

// Train-only graph over random triples.
inline KnowledgeGraph random_graph(const RandomGraphSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return KnowledgeGraph::build(random_triples(spec, rng), {}, {});
}

// (x, y) pairs reachable through `step` over the raw train fact list.
inline std::set<std::pair<EntityId, EntityId>> step_pairs(const KnowledgeGraph& kg,
                                                          SignedRelation step) {
  std::set<std::pair<EntityId, EntityId>> out;
  for (const auto& f : kg.facts(Split::train)) {
    if (f.relation != step.relation) continue;
    if (step.inverse) out.insert({f.tail, f.head});
    else out.insert({f.head, f.tail});
  }
  return out;
}

struct OracleMetrics {
  std::uint64_t supp = 0, body = 0, head = 0;
};

// Hash-free equi-join of the body steps, then intersection with head facts.
inline OracleMetrics brute_force_cp(const KnowledgeGraph& kg, RelationId head,
                                    const RelationPath& body) {
  std::set<std::pair<EntityId, EntityId>> acc = step_pairs(kg, body.front());
  for (std::size_t i = 1; i < body.size(); ++i) {
    std::map<EntityId, std::vector<EntityId>> next;
    for (const auto& [b, y] : step_pairs(kg, body[i])) next[b].push_back(y);
    std::set<std::pair<EntityId, EntityId>> joined;
    for (const auto& [x, a] : acc) {
      const auto it = next.find(a);
      if (it == next.end()) continue;
      for (EntityId y : it->second) joined.insert({x, y});
    }
    acc = std::move(joined);
  }
  const auto heads = step_pairs(kg, forward(head));
  OracleMetrics m;
  m.body = acc.size();
  m.head = heads.size();
  for (const auto& p : acc) m.supp += heads.contains(p);
  return m;
}

// Hash-set oracle for property-transition metrics.
inline OracleMetrics hash_set_pt(const KnowledgeGraph& kg, const Rule& rule) {
  std::unordered_set<EntityId> heads, bodies;
  for (const auto& f : kg.facts(Split::train)) {
    if (f.relation == rule.head_relation) {
      if (rule.kind == RuleKind::pt_head && f.tail == rule.pt_head_constant) heads.insert(f.head);
      if (rule.kind == RuleKind::pt_tail && f.head == rule.pt_head_constant) heads.insert(f.tail);
    }
    if (f.relation == rule.pt_relation.relation) {
      // r0(X, c') read from X's side.
      if (!rule.pt_relation.inverse && f.tail == rule.pt_body_constant) bodies.insert(f.head);
      if (rule.pt_relation.inverse && f.head == rule.pt_body_constant) bodies.insert(f.tail);
    }
  }
  OracleMetrics m;
  m.head = heads.size();
  m.body = bodies.size();
  for (auto x : bodies) m.supp += heads.contains(x);
  return m;
}

// Exhaustive DFS over simple paths of length 1..max_len.
inline std::set<GroundedPath> dfs_paths(const KnowledgeGraph& kg, EntityId h, EntityId t,
                                        std::size_t max_len) {
  std::set<GroundedPath> out;
  std::vector<PathStep> stack;
  std::vector<EntityId> visited{h};
  const auto& facts = kg.facts(Split::train);
  auto rec = [&](auto&& self, EntityId at) -> void {
    if (stack.size() == max_len) return;
    for (const auto& f : facts) {
      for (bool inverse : {false, true}) {
        const EntityId from = inverse ? f.tail : f.head;
        const EntityId to = inverse ? f.head : f.tail;
        if (from != at) continue;
        if (std::find(visited.begin(), visited.end(), to) != visited.end()) continue;
        stack.push_back({f, inverse});
        if (to == t) {
          out.insert(GroundedPath{stack});
        } else {
          visited.push_back(to);
          self(self, to);
          visited.pop_back();
        }
        stack.pop_back();
      }
    }
  };
  rec(rec, h);
  return out;
}

inline RelationPath random_body(Rng& rng, std::uint32_t relations, std::size_t len) {
  RelationPath body;
  for (std::size_t i = 0; i < len; ++i)
    body.push_back({static_cast<RelationId>(rng.below(relations)), rng.bernoulli(0.5)});
  return body;
}

}  // namespace expath::testkit
