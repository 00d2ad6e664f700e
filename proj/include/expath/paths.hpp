#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "expath/kg.hpp"

namespace expath {

// One hop of a grounded path. `inverse` means the stored fact is walked from
// its tail to its head.
struct PathStep {
  Fact fact;
  bool inverse = false;

  EntityId from() const { return inverse ? fact.tail : fact.head; }
  EntityId to() const { return inverse ? fact.head : fact.tail; }
  SignedRelation relation() const { return {fact.relation, inverse}; }
  friend auto operator<=>(const PathStep&, const PathStep&) = default;
};

struct GroundedPath {
  std::vector<PathStep> steps;

  std::size_t length() const { return steps.size(); }
  const Fact& first() const { return steps.front().fact; }
  const Fact& last() const { return steps.back().fact; }
  friend auto operator<=>(const GroundedPath&, const GroundedPath&) = default;
};

using RelationPath = std::vector<SignedRelation>;

RelationPath relation_path(const GroundedPath& p);

struct PathGroup {
  RelationPath relations;
  std::vector<GroundedPath> grounded;
};

inline constexpr std::size_t kMaxPathLength = 3;
inline constexpr std::size_t kDefaultPathCap = 100000;

struct PathSearch {
  std::vector<GroundedPath> paths;
  bool truncated = false;
};

// Simple train paths of length 1..max_len from h to t, either orientation per
// hop. Ordered by length, then lexicographically by (relation, inverse,
// entity) per hop; cut off after `cap` paths.
PathSearch find_grounded_paths(const KnowledgeGraph& kg, EntityId h, EntityId t,
                               std::size_t max_len = kMaxPathLength,
                               std::size_t cap = kDefaultPathCap);

// Partition by relation sequence, groups ordered by (length, sequence).
std::vector<PathGroup> aggregate(std::span<const GroundedPath> paths);

struct PositionProportions {
  double head = 0.0;  // share of paths whose first hop is the fact
  double tail = 0.0;  // share of paths whose last hop is the fact
};

PositionProportions position_proportions(const Fact& f, const PathGroup& g);

// "r1, r2'" using relation labels.
std::string to_string(const KnowledgeGraph& kg, const RelationPath& p);

}  // namespace expath
