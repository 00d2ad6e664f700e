#include "expath/paths.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "expath/error.hpp"

namespace expath {

RelationPath relation_path(const GroundedPath& p) {
  RelationPath out;
  out.reserve(p.steps.size());
  for (const auto& s : p.steps) out.push_back(s.relation());
  return out;
}

namespace {

PathStep step_of(const Edge& e) { return {e.fact, e.relation.inverse}; }

class Collector {
 public:
  explicit Collector(std::size_t cap) : cap_(cap) {}
  bool full() const { return out_.paths.size() >= cap_; }
  // Returns false once the cap is hit.
  bool add(std::initializer_list<PathStep> steps) {
    if (full()) {
      out_.truncated = true;
      return false;
    }
    out_.paths.push_back(GroundedPath{std::vector<PathStep>(steps)});
    return true;
  }
  PathSearch take() { return std::move(out_); }

 private:
  std::size_t cap_;
  PathSearch out_;
};

}  // namespace

PathSearch find_grounded_paths(const KnowledgeGraph& kg, EntityId h, EntityId t,
                               std::size_t max_len, std::size_t cap) {
  if (h >= kg.num_entities() || t >= kg.num_entities()) throw LookupError("unknown entity id");
  if (h == t) throw InvalidArgument("self-loop predictions are not supported");
  if (max_len < 1 || max_len > kMaxPathLength)
    throw InvalidArgument("path length bound must be within 1..3");
  if (cap == 0) throw InvalidArgument("path cap must be positive");

  // Last hops into t, keyed by the entity they leave from. t's own edges are
  // already sorted by (relation, inverse, other); seen from the other side the
  // orientation flips, so re-sort each bucket.
  std::unordered_map<EntityId, std::vector<Edge>> into_t;
  for (const auto& e : kg.neighbors(t)) {
    into_t[e.other].push_back(Edge{e.relation.invert(), t, e.fact});
  }
  for (auto& [from, edges] : into_t) {
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.relation < b.relation;
    });
  }
  auto last_hops = [&](EntityId from) -> const std::vector<Edge>* {
    auto it = into_t.find(from);
    return it == into_t.end() ? nullptr : &it->second;
  };

  Collector out(cap);
  const auto first_hops = kg.neighbors(h);

  if (const auto* direct = last_hops(h)) {
    for (const auto& e : *direct) {
      if (!out.add({step_of(e)})) return out.take();
    }
  }
  if (max_len >= 2) {
    for (const auto& e1 : first_hops) {
      const EntityId a = e1.other;
      if (a == h || a == t) continue;
      if (const auto* hops = last_hops(a)) {
        for (const auto& e2 : *hops) {
          if (!out.add({step_of(e1), step_of(e2)})) return out.take();
        }
      }
    }
  }
  if (max_len >= 3) {
    for (const auto& e1 : first_hops) {
      const EntityId a = e1.other;
      if (a == h || a == t) continue;
      for (const auto& e2 : kg.neighbors(a)) {
        const EntityId b = e2.other;
        if (b == h || b == t || b == a) continue;
        if (const auto* hops = last_hops(b)) {
          for (const auto& e3 : *hops) {
            if (!out.add({step_of(e1), step_of(e2), step_of(e3)})) return out.take();
          }
        }
      }
    }
  }
  return out.take();
}

std::vector<PathGroup> aggregate(std::span<const GroundedPath> paths) {
  auto key_less = [](const RelationPath& a, const RelationPath& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  };
  std::map<RelationPath, std::vector<GroundedPath>, decltype(key_less)> groups(key_less);
  for (const auto& p : paths) groups[relation_path(p)].push_back(p);
  std::vector<PathGroup> out;
  out.reserve(groups.size());
  for (auto& [rels, grounded] : groups) out.push_back({rels, std::move(grounded)});
  return out;
}

PositionProportions position_proportions(const Fact& f, const PathGroup& g) {
  if (g.grounded.empty()) return {};
  std::size_t first = 0;
  std::size_t last = 0;
  for (const auto& p : g.grounded) {
    if (p.first() == f) ++first;
    if (p.last() == f) ++last;
  }
  const auto n = static_cast<double>(g.grounded.size());
  return {static_cast<double>(first) / n, static_cast<double>(last) / n};
}

std::string to_string(const KnowledgeGraph& kg, const RelationPath& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ", ";
    out += kg.to_string(p[i]);
  }
  return out;
}

}  // namespace expath
