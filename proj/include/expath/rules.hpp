#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "expath/kg.hpp"
#include "expath/kge.hpp"
#include "expath/paths.hpp"

namespace expath {

enum class RuleKind { cp, pt_head, pt_tail };

// Closed-path rule  r(X, Y) <- b1(X, A1), ..., bn(An-1, Y)
// or property transition
//   pt_head:  r(X, c) <- r0(X, c')
//   pt_tail:  r(c, Y) <- r0(Y, c')
// where r0 is read from the variable's side.
struct Rule {
  RuleKind kind = RuleKind::cp;
  RelationId head_relation = 0;
  RelationPath body;                // cp
  SignedRelation pt_relation{};     // pt
  EntityId pt_body_constant = 0;    // c'
  EntityId pt_head_constant = 0;    // c

  static Rule closed_path(RelationId head, RelationPath body);
  static Rule property_head(RelationId head, EntityId c, SignedRelation r0, EntityId c_body);
  static Rule property_tail(RelationId head, EntityId c, SignedRelation r0, EntityId c_body);

  bool is_cp() const { return kind == RuleKind::cp; }
  friend auto operator<=>(const Rule&, const Rule&) = default;
};

// "head <- b1, b2'"  or  "head(X, c) <- body(X, c')"  /  "head(c, Y) <- body(Y, c')".
std::string to_string(const KnowledgeGraph& kg, const Rule& rule);
// Inverse of to_string. Throws ParseError (with column) on bad syntax and
// LookupError on labels missing from the graph.
Rule parse_rule(const KnowledgeGraph& kg, std::string_view text);

struct Thresholds {
  double min_sc = 0.1;
  double min_hc = 0.01;
  std::uint64_t min_supp = 10;
};

struct RuleMetrics {
  std::uint64_t supp = 0;
  std::uint64_t body_count = 0;
  std::uint64_t head_count = 0;
  double sc = 0.0;
  double hc = 0.0;
  double conf = 0.0;
};

// SC * supp / (supp + minSupp).
double smoothed_confidence(double sc, std::uint64_t supp, std::uint64_t min_supp);

class HeadRelationAbsent : public LookupError {
 public:
  using LookupError::LookupError;
};

// Body pairs as the left-to-right fold of binarized adjacency products.
SparseBoolMatrix body_matrix(const KnowledgeGraph& kg, const RelationPath& body);

RuleMetrics eval_cp(const KnowledgeGraph& kg, RelationId head, const RelationPath& body,
                    std::uint64_t min_supp = Thresholds{}.min_supp);
RuleMetrics eval_pt(const KnowledgeGraph& kg, const Rule& rule,
                    std::uint64_t min_supp = Thresholds{}.min_supp);
RuleMetrics evaluate(const KnowledgeGraph& kg, const Rule& rule,
                     std::uint64_t min_supp = Thresholds{}.min_supp);

struct RelevancePair {
  double rel_h = 0.0;
  double rel_t = 0.0;
  bool degenerate_h = false;  // exclusion emptied the head's fact set
  bool degenerate_t = false;
};

struct RelevanceOptions {
  // Exclude facts of the relation in both orientations, not just the
  // traversed one.
  bool exclude_both_orientations = false;
  std::optional<std::uint32_t> epochs;  // defaults to the model's mimic_epochs
};

// Mimic-based relevance of a relation path to a prediction. Mimic vectors
// are cached per (entity, excluded relation) and shared across predictions;
// safe for concurrent use.
class RelevanceEstimator {
 public:
  RelevanceEstimator(const KnowledgeGraph& kg, const EmbeddingModel& model,
                     RelevanceOptions options = {});

  RelevancePair relevance(const Fact& prediction, const RelationPath& path);
  // 1 - plaus(mimic)/plaus(original) for one side; `sr` is the relation
  // excluded at that entity, read from the entity.
  double side_relevance(const Fact& prediction, Side side, SignedRelation sr, bool* degenerate);

  std::size_t cache_size() const;

 private:
  struct CacheKey {
    EntityId entity;
    SignedRelation relation;
    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
  };
  // nullopt marks a degenerate exclusion.
  std::shared_ptr<const std::optional<std::vector<float>>> mimic(EntityId e, SignedRelation sr);

  const KnowledgeGraph& kg_;
  const EmbeddingModel& model_;
  RelevanceOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<CacheKey, std::shared_ptr<const std::optional<std::vector<float>>>> cache_;
};

struct MinedRule {
  Rule rule;
  RuleMetrics metrics;
  RelevancePair relevance;                 // CP only; PT keeps the default pair
  std::shared_ptr<const PathGroup> group;  // CP only
  Fact pt_body_fact{};                     // PT only
  std::string text;                        // serialization
};

struct MinedRuleSet {
  Fact prediction;
  std::vector<MinedRule> rules;  // conf descending, ties by text
  std::size_t grounded_paths = 0;
  std::size_t relation_paths = 0;
  std::size_t relevant_paths = 0;
  bool paths_truncated = false;
};

struct MiningOptions {
  Thresholds thresholds;
  std::size_t max_len = kMaxPathLength;
  std::size_t path_cap = kDefaultPathCap;
  double rel_eps = 0.0;  // keep a path when both relevances exceed this
  RelevanceOptions relevance;
};

// Per-prediction CP and PT rule mining. CP metrics and mimics are cached
// across predictions; mine() is thread-safe.
class RuleMiner {
 public:
  RuleMiner(const KnowledgeGraph& kg, const EmbeddingModel& model, MiningOptions options = {});

  MinedRuleSet mine(const Fact& prediction);

  const MiningOptions& options() const { return options_; }
  RelevanceEstimator& relevance() { return relevance_; }

 private:
  RuleMetrics cp_metrics(RelationId head, const RelationPath& body);
  bool passes(const RuleMetrics& m) const;

  const KnowledgeGraph& kg_;
  const EmbeddingModel& model_;
  MiningOptions options_;
  RelevanceEstimator relevance_;
  std::mutex cp_mutex_;
  std::map<std::pair<RelationId, RelationPath>, RuleMetrics> cp_cache_;
};

// One-shot convenience over RuleMiner.
MinedRuleSet mine(const KnowledgeGraph& kg, const EmbeddingModel& model, const Fact& prediction,
                  const MiningOptions& options = {});

}  // namespace expath
