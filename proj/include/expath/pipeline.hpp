#pragma once

// Command-level workflows shared by the C API and the acceptance harness.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expath/attack.hpp"
#include "expath/kg.hpp"
#include "expath/kge.hpp"
#include "expath/rules.hpp"
#include "expath/scorer.hpp"

namespace expath {

struct RunConfig {
  std::filesystem::path data;
  ModelConfig model;
  Thresholds thresholds;
  std::optional<PositionPolicy> policy;  // nullopt: chosen from the graph
  std::size_t k = 1;
  std::size_t targets = 20;
  std::uint64_t seed = 42;
  std::size_t runs = 1;
  std::string method = "expath";  // expath | sparse | random | import:<path>
  std::string fallback = "none";  // baseline used when eXpath finds nothing
  bool use_cp = true;
  bool use_pt = true;
  bool greedy = false;
  bool per_target = false;
  std::size_t max_len = kMaxPathLength;
  std::size_t path_cap = kDefaultPathCap;
  double rel_eps = 0.0;
  bool exclude_both = false;  // mimic drops both orientations of a relation
  unsigned jobs = 0;  // 0: hardware concurrency

  void validate() const;  // throws InvalidArgument
  MiningOptions mining() const;
  ScoringOptions scoring(const KnowledgeGraph& kg) const;
  // Method label used in reports, including ablation suffixes.
  std::string method_label() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Overlays the keys present in `j` onto `c`.
void from_json(const nlohmann::json& j, RunConfig& c);

unsigned resolve_jobs(unsigned jobs);

struct ExplainedPrediction {
  MinedRuleSet rules;
  Explanation explanation;
};

// Mines and explains every prediction on `jobs` workers; output order
// follows the input.
std::vector<ExplainedPrediction> explain_all(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                             std::span<const Fact> predictions,
                                             const RunConfig& config);

std::vector<Fact> explanation_facts(const Explanation& ex);

// Fact sets for `targets` under config.method (never "import:").
std::vector<std::vector<Fact>> method_explanations(const KnowledgeGraph& kg,
                                                   const EmbeddingModel& model,
                                                   const TargetSet& targets,
                                                   const RunConfig& config, std::uint64_t seed);

// Training metrics: {counts, valid, test[, train]} with mrr and h1.
nlohmann::json training_metrics(const KnowledgeGraph& kg, const EmbeddingModel& model);

// Single-run report when config.runs == 1, otherwise
// {method, runs: [...], summary: {delta_mrr: {mean, std}, delta_h1: {...}}}.
nlohmann::json attack_command(const KnowledgeGraph& kg, const RunConfig& config);

// {rules: [{rule, kind, supp, body_count, head_count, sc, hc, conf}]}
nlohmann::json rules_command(const KnowledgeGraph& kg, std::span<const std::string> rules,
                             const Thresholds& thresholds);

// Fuses single-run reports or multi-run documents run by run.
nlohmann::json fuse_command(const nlohmann::json& x, const nlohmann::json& y);

// Summary table over report documents: {rows: [{method, k, runs, delta_mrr: {mean, std}, ...}]}.
nlohmann::json report_command(std::span<const nlohmann::json> documents);
std::string report_table(const nlohmann::json& summary);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

}  // namespace expath
