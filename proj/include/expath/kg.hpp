#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "expath/sparse.hpp"

namespace expath {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// A relation together with the direction it is traversed in. Inverse
// relations are never materialized; they are a view over forward facts.
struct SignedRelation {
  RelationId relation = 0;
  bool inverse = false;

  constexpr SignedRelation invert() const { return {relation, !inverse}; }
  friend constexpr auto operator<=>(const SignedRelation&, const SignedRelation&) = default;
};

constexpr SignedRelation forward(RelationId r) { return {r, false}; }
constexpr SignedRelation backward(RelationId r) { return {r, true}; }
constexpr SignedRelation invert(SignedRelation sr) { return sr.invert(); }

struct Fact {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend constexpr auto operator<=>(const Fact&, const Fact&) = default;
};

struct FactHash {
  std::size_t operator()(const Fact& f) const noexcept {
    std::uint64_t x = (std::uint64_t{f.head} << 32) ^ (std::uint64_t{f.relation} << 16) ^ f.tail;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

using FactSet = std::unordered_set<Fact, FactHash>;

// Traversal entry in the adjacency index: walking `relation` from the indexed
// entity reaches `other` through the stored forward `fact`.
struct Edge {
  SignedRelation relation;
  EntityId other = 0;
  Fact fact;
};

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Tab-separated "head<TAB>relation<TAB>tail" lines; "\n" or "\r\n" endings.
std::vector<Triple> parse_triples(std::string_view text);
std::vector<Triple> read_triples_file(const std::filesystem::path& path);

class Dictionary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  std::uint32_t at(std::string_view label) const;  // throws LookupError
  const std::string& label(std::uint32_t id) const;
  std::uint32_t size() const { return static_cast<std::uint32_t>(labels_.size()); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> ids_;
};

enum class Split { train, valid, test };

std::string_view split_name(Split s);

struct BuildStats {
  std::size_t duplicates_train = 0;
  std::size_t duplicates_valid = 0;
  std::size_t duplicates_test = 0;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph();

  static KnowledgeGraph build(const std::vector<Triple>& train, const std::vector<Triple>& valid,
                              const std::vector<Triple>& test, BuildStats* stats = nullptr);
  // Reads train.txt, valid.txt and test.txt from `dir`.
  static KnowledgeGraph load(const std::filesystem::path& dir, BuildStats* stats = nullptr);

  std::uint32_t num_entities() const { return dicts_->entities.size(); }
  std::uint32_t num_relations() const { return dicts_->relations.size(); }
  const Dictionary& entities() const { return dicts_->entities; }
  const Dictionary& relations() const { return dicts_->relations; }

  const std::vector<Fact>& facts(Split s) const { return split(s).facts; }
  bool contains(Split s, const Fact& f) const { return split(s).members.contains(f); }
  // True when f is in any split.
  bool is_known(const Fact& f) const;

  // Edges leaving `e` along `sr`, sorted by (relation, inverse, other).
  std::span<const Edge> neighbors(EntityId e, SignedRelation sr) const;
  // All train edges at `e` in both directions, same ordering.
  std::span<const Edge> neighbors(EntityId e) const;
  std::size_t degree(EntityId e) const { return neighbors(e).size(); }

  std::span<const Fact> facts_by_relation(RelationId r) const;

  // Entities forming a known (any split) fact with the fixed endpoints.
  std::span<const EntityId> known_tails(EntityId h, RelationId r) const;
  std::span<const EntityId> known_heads(RelationId r, EntityId t) const;

  // Train adjacency of a signed relation over all entities.
  SparseBoolMatrix adjacency(SignedRelation sr) const;

  // New graph without `victims` in the train split. Throws LookupError
  // listing every victim that is not a train fact.
  KnowledgeGraph remove_facts(std::span<const Fact> victims) const;

  Fact resolve(const Triple& t) const;  // throws LookupError
  Triple labels(const Fact& f) const;
  std::string to_string(const Fact& f) const;
  std::string to_string(SignedRelation sr) const;  // label plus "'" when inverse

 private:
  struct Dictionaries {
    Dictionary entities;
    Dictionary relations;
  };
  struct SplitData {
    std::vector<Fact> facts;
    FactSet members;
  };
  struct TrainIndex {
    std::vector<std::size_t> edge_offsets;
    std::vector<Edge> edges;
    std::vector<std::size_t> rel_offsets;
    std::vector<Fact> by_relation;
  };
  struct KnownIndex {
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> heads;
  };

  const SplitData& split(Split s) const;
  void check_entity(EntityId e) const;
  void rebuild_indices();

  std::shared_ptr<const Dictionaries> dicts_;
  std::shared_ptr<const SplitData> train_;
  std::shared_ptr<const SplitData> valid_;
  std::shared_ptr<const SplitData> test_;
  std::shared_ptr<const TrainIndex> index_;
  std::shared_ptr<const KnownIndex> known_;
};

}  // namespace expath
