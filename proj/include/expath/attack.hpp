#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expath/kg.hpp"
#include "expath/kge.hpp"

namespace expath {

struct Target {
  Fact fact;
  RankResult original;
  double rr = 0.0;
};

struct TargetSet {
  std::vector<Target> targets;
  std::vector<Fact> facts() const;
};

// Only targets the model already predicts well (RR above this) are attacked.
inline constexpr double kTargetMinRR = 0.5;

// Seeded uniform sample of test facts with filtered RR > 0.5. Returns fewer
// than n when the pool runs out; throws when it is empty.
TargetSet select_targets(const EmbeddingModel& model, const KnowledgeGraph& kg, std::size_t n,
                         std::uint64_t seed);

// Ranks the given predictions without the RR filter (imported target lists).
TargetSet rank_targets(const EmbeddingModel& model, const KnowledgeGraph& kg,
                       std::span<const Fact> predictions);

// One row per target. Facts are kept as labels so reports can be fused and
// summarized without the dataset.
struct AttackRow {
  Triple target;
  double rr_before = 0.0;
  double rr_after = 0.0;
  double h1_before = 0.0;
  double h1_after = 0.0;
  std::uint32_t head_rank_before = 1, tail_rank_before = 1;
  std::uint32_t head_rank_after = 1, tail_rank_after = 1;
  std::vector<Triple> explanation;
};

struct AttackReport {
  std::string method;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool per_target = false;
  std::vector<AttackRow> rows;
  std::vector<Triple> removed;  // sorted, unique
  double delta_mrr = 0.0;
  double delta_h1 = 0.0;
  std::size_t h1_eligible = 0;

  void recompute();
};

// A target enters the δH@1 aggregate only if it was a hit before the attack.
bool h1_eligible(const AttackRow& row);

// 1 - sum(after) / sum(before); 0 for an empty or all-zero table.
double delta_mrr(std::span<const AttackRow> rows);
double delta_h1(std::span<const AttackRow> rows);

struct AttackOptions {
  std::string method = "expath";
  std::size_t k = 0;
  bool per_target = false;  // one retrain per target instead of one per batch
};

// Removes the explanation facts (all at once, or per target), retrains with
// `config` unchanged and re-ranks every target. explanations[i] belongs to
// targets.targets[i]; each fact must be in the train split.
AttackReport run_attack(const KnowledgeGraph& kg, const ModelConfig& config,
                        const TargetSet& targets, std::span<const std::vector<Fact>> explanations,
                        const AttackOptions& options);

// Per target keeps the row with the smaller post-attack RR.
AttackReport fuse(const AttackReport& x, const AttackReport& y);

// Train facts touching the prediction's head or tail, excluding the
// prediction itself, in serialization order.
std::vector<Fact> incident_facts(const KnowledgeGraph& kg, const Fact& prediction);

// Facts of the relations with the fewest train facts (ties by relation label),
// shuffled with `seed` inside one relation.
std::vector<Fact> baseline_sparse(const KnowledgeGraph& kg, const Fact& prediction, std::size_t k,
                                  std::uint64_t seed = 0);
std::vector<Fact> baseline_random(const KnowledgeGraph& kg, const Fact& prediction, std::size_t k,
                                  std::uint64_t seed);

struct ExplanationSet {
  std::string method;
  std::vector<Fact> predictions;
  std::vector<std::vector<Fact>> facts;  // parallel to predictions
};

nlohmann::json explanation_set_json(const KnowledgeGraph& kg, const ExplanationSet& set);
ExplanationSet parse_explanation_set(const KnowledgeGraph& kg, const nlohmann::json& j);
ExplanationSet import_explanations(const KnowledgeGraph& kg, const std::filesystem::path& path);

nlohmann::json report_json(const AttackReport& report);
AttackReport report_from_json(const nlohmann::json& j);

}  // namespace expath
