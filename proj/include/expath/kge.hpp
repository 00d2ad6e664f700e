#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "expath/error.hpp"
#include "expath/kg.hpp"

namespace expath {

enum class ModelFamily { translational, complex_bilinear, real_bilinear };

// CLI spellings: transe, complex, distmult.
std::string_view family_name(ModelFamily f);
ModelFamily parse_family(std::string_view name);

struct ModelConfig {
  ModelFamily family = ModelFamily::complex_bilinear;
  std::uint32_t dimension = 32;
  std::uint32_t epochs = 100;
  double learning_rate = 0.05;
  std::uint32_t negatives = 5;
  std::uint32_t batch_size = 128;
  double regularization = 1e-4;
  double margin = 1.0;  // translational only
  std::uint64_t seed = 42;

  // Local post-training used for mimic entities.
  std::uint32_t mimic_epochs = 50;
  double mimic_lr_scale = 10.0;

  // Throws InvalidArgument on a non-positive size or rate, or an odd
  // complex dimension.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  // Zero tables of the right shape.
  EmbeddingModel(ModelConfig config, std::uint32_t num_entities, std::uint32_t num_relations);
  // Seeded uniform(-0.1, 0.1) tables.
  static EmbeddingModel initialize(const ModelConfig& config, std::uint32_t num_entities,
                                   std::uint32_t num_relations);

  const ModelConfig& config() const { return config_; }
  std::uint32_t dim() const { return config_.dimension; }
  std::uint32_t num_entities() const { return num_entities_; }
  std::uint32_t num_relations() const { return num_relations_; }

  std::span<const float> entity(EntityId e) const;
  std::span<const float> relation(RelationId r) const;
  std::span<float> entity(EntityId e);
  std::span<float> relation(RelationId r);
  const std::vector<float>& entity_table() const { return entities_; }
  const std::vector<float>& relation_table() const { return relations_; }

  // f_r(h, t); higher is more plausible.
  double score(EntityId h, RelationId r, EntityId t) const;
  double score(std::span<const float> h, RelationId r, std::span<const float> t) const;

  // Scores of <h, r, e> (tails) or <e, r, t> (heads) for every entity e.
  void score_tails(EntityId h, RelationId r, std::vector<double>& out) const;
  void score_heads(RelationId r, EntityId t, std::vector<double>& out) const;

  bool all_finite() const;

  // Writes <prefix>.meta.json and <prefix>.emb.bin.
  void save(const std::filesystem::path& prefix) const;
  static EmbeddingModel load(const std::filesystem::path& prefix);

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  ModelConfig config_;
  std::uint32_t num_entities_ = 0;
  std::uint32_t num_relations_ = 0;
  std::vector<float> entities_;
  std::vector<float> relations_;
};

// Logistic transform of a raw score into (0, 1).
double plausibility(double score);
double plausibility(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t);

// Deterministic mini-batch SGD on the train split.
EmbeddingModel train(const KnowledgeGraph& kg, const ModelConfig& config);

enum class Side { head, tail };

// 1 + number of candidates scoring strictly higher than the target. Filtered
// mode skips candidates that form another known fact in any split.
std::uint32_t rank(const EmbeddingModel& model, const KnowledgeGraph& kg, const Fact& f, Side side,
                   bool filtered = true);

struct RankResult {
  Fact fact;
  std::uint32_t head_rank = 1;
  std::uint32_t tail_rank = 1;

  double reciprocal_rank() const { return 0.5 * (1.0 / head_rank + 1.0 / tail_rank); }
  double hits_at_1() const { return 0.5 * ((head_rank == 1) + (tail_rank == 1)); }
};

RankResult rank_both(const EmbeddingModel& model, const KnowledgeGraph& kg, const Fact& f,
                     bool filtered = true);

struct Evaluation {
  double mrr = 0.0;
  double hits_at_1 = 0.0;
  std::vector<RankResult> ranks;
};

Evaluation mrr_h1(const EmbeddingModel& model, const KnowledgeGraph& kg, std::span<const Fact> facts,
                  bool filtered = true);

// Re-embeds `e` on its train facts minus `excluded`, all other parameters
// frozen, starting from its current vector. `salt` separates the random
// streams of different exclusions of the same entity. Throws
// DegenerateEntity when nothing is left to train on.
std::vector<float> post_train_mimic(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                    EntityId e, const FactSet& excluded,
                                    std::uint32_t epochs, std::uint64_t salt = 0);

class DegenerateEntity : public Error {
 public:
  using Error::Error;
};

}  // namespace expath
