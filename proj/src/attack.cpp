#include "expath/attack.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "expath/random.hpp"
#include "expath/serialize.hpp"

namespace expath {

std::vector<Fact> TargetSet::facts() const {
  std::vector<Fact> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(t.fact);
  return out;
}

TargetSet select_targets(const EmbeddingModel& model, const KnowledgeGraph& kg, std::size_t n,
                         std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("target count must be positive");
  std::vector<Fact> pool = kg.facts(Split::test);
  std::sort(pool.begin(), pool.end());
  Rng rng(mix_seed(seed, 0x7a7));
  rng.shuffle(std::span<Fact>(pool));
  TargetSet out;
  for (const auto& f : pool) {
    if (out.targets.size() == n) break;
    const auto r = rank_both(model, kg, f);
    const double rr = r.reciprocal_rank();
    if (rr > kTargetMinRR) out.targets.push_back({f, r, rr});
  }
  if (out.targets.empty())
    throw Error("no test fact has reciprocal rank above 0.5; train the model longer");
  return out;
}

TargetSet rank_targets(const EmbeddingModel& model, const KnowledgeGraph& kg,
                       std::span<const Fact> predictions) {
  TargetSet out;
  for (const auto& f : predictions) {
    const auto r = rank_both(model, kg, f);
    out.targets.push_back({f, r, r.reciprocal_rank()});
  }
  return out;
}

bool h1_eligible(const AttackRow& row) { return row.h1_before > 0.0; }

double delta_mrr(std::span<const AttackRow> rows) {
  double before = 0.0;
  double after = 0.0;
  for (const auto& r : rows) {
    before += r.rr_before;
    after += r.rr_after;
  }
  return before > 0.0 ? 1.0 - after / before : 0.0;
}

double delta_h1(std::span<const AttackRow> rows) {
  double before = 0.0;
  double after = 0.0;
  for (const auto& r : rows) {
    if (!h1_eligible(r)) continue;
    before += r.h1_before;
    after += r.h1_after;
  }
  return before > 0.0 ? 1.0 - after / before : 0.0;
}

void AttackReport::recompute() {
  delta_mrr = expath::delta_mrr(rows);
  delta_h1 = expath::delta_h1(rows);
  h1_eligible = static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const AttackRow& r) { return expath::h1_eligible(r); }));
}

namespace {

void fill_after(AttackRow& row, const RankResult& r) {
  row.rr_after = r.reciprocal_rank();
  row.h1_after = r.hits_at_1();
  row.head_rank_after = r.head_rank;
  row.tail_rank_after = r.tail_rank;
}

AttackRow row_before(const KnowledgeGraph& kg, const Target& t, std::span<const Fact> expl) {
  AttackRow row;
  row.target = kg.labels(t.fact);
  row.rr_before = t.original.reciprocal_rank();
  row.h1_before = t.original.hits_at_1();
  row.head_rank_before = t.original.head_rank;
  row.tail_rank_before = t.original.tail_rank;
  for (const auto& f : expl) row.explanation.push_back(kg.labels(f));
  return row;
}

}  // namespace

AttackReport run_attack(const KnowledgeGraph& kg, const ModelConfig& config,
                        const TargetSet& targets, std::span<const std::vector<Fact>> explanations,
                        const AttackOptions& options) {
  if (explanations.size() != targets.targets.size())
    throw InvalidArgument("one explanation per target is required");
  config.validate();

  std::set<Fact> removed;
  for (const auto& expl : explanations) {
    for (const auto& f : expl) {
      if (!kg.contains(Split::train, f))
        throw InvalidArgument("explanation fact is not in the train split: " + kg.to_string(f));
      removed.insert(f);
    }
  }

  AttackReport report;
  report.method = options.method;
  report.k = options.k;
  report.seed = config.seed;
  report.per_target = options.per_target;
  for (const auto& f : removed) report.removed.push_back(kg.labels(f));
  std::sort(report.removed.begin(), report.removed.end());

  for (std::size_t i = 0; i < targets.targets.size(); ++i)
    report.rows.push_back(row_before(kg, targets.targets[i], explanations[i]));

  if (!options.per_target) {
    const std::vector<Fact> victims(removed.begin(), removed.end());
    const auto attacked = kg.remove_facts(victims);
    const auto model = train(attacked, config);
    for (std::size_t i = 0; i < targets.targets.size(); ++i)
      fill_after(report.rows[i], rank_both(model, attacked, targets.targets[i].fact));
  } else {
    // Targets with identical explanations share one retrain.
    std::map<std::vector<Fact>, std::vector<std::size_t>> by_set;
    for (std::size_t i = 0; i < targets.targets.size(); ++i) {
      std::vector<Fact> key(explanations[i].begin(), explanations[i].end());
      std::sort(key.begin(), key.end());
      key.erase(std::unique(key.begin(), key.end()), key.end());
      by_set[key].push_back(i);
    }
    for (const auto& [victims, members] : by_set) {
      const auto attacked = kg.remove_facts(victims);
      const auto model = train(attacked, config);
      for (auto i : members)
        fill_after(report.rows[i], rank_both(model, attacked, targets.targets[i].fact));
    }
  }
  report.recompute();
  return report;
}

AttackReport fuse(const AttackReport& x, const AttackReport& y) {
  if (x.rows.size() != y.rows.size())
    throw InvalidArgument("cannot fuse reports over different target sets");
  AttackReport out;
  out.method = x.method + "+" + y.method;
  out.k = std::max(x.k, y.k);
  out.seed = x.seed;
  out.per_target = x.per_target || y.per_target;
  std::set<Triple> removed;
  for (std::size_t i = 0; i < x.rows.size(); ++i) {
    const auto& a = x.rows[i];
    const auto& b = y.rows[i];
    if (!(a.target == b.target) || a.rr_before != b.rr_before)
      throw InvalidArgument("cannot fuse reports: target " + std::to_string(i) +
                            " differs (" + a.target.head + " " + a.target.relation + " " +
                            a.target.tail + ")");
    // Ties keep the explanation that comes first in label order so the
    // operation stays commutative.
    const bool pick_b = b.rr_after < a.rr_after ||
                        (b.rr_after == a.rr_after && b.explanation < a.explanation);
    const auto& row = pick_b ? b : a;
    out.rows.push_back(row);
    removed.insert(row.explanation.begin(), row.explanation.end());
  }
  out.removed.assign(removed.begin(), removed.end());
  out.recompute();
  return out;
}

std::vector<Fact> incident_facts(const KnowledgeGraph& kg, const Fact& prediction) {
  std::set<Fact> facts;
  for (EntityId e : {prediction.head, prediction.tail}) {
    for (const auto& edge : kg.neighbors(e)) facts.insert(edge.fact);
  }
  facts.erase(prediction);
  std::vector<Fact> out(facts.begin(), facts.end());
  std::vector<std::string> keys;
  keys.reserve(out.size());
  for (const auto& f : out) keys.push_back(kg.to_string(f));
  std::vector<std::size_t> order(out.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<Fact> sorted;
  sorted.reserve(out.size());
  for (auto i : order) sorted.push_back(out[i]);
  return sorted;
}

std::vector<Fact> baseline_sparse(const KnowledgeGraph& kg, const Fact& prediction, std::size_t k,
                                  std::uint64_t seed) {
  std::map<RelationId, std::vector<Fact>> by_relation;
  for (const auto& f : incident_facts(kg, prediction)) by_relation[f.relation].push_back(f);
  std::vector<RelationId> order;
  for (const auto& [r, _] : by_relation) order.push_back(r);
  std::sort(order.begin(), order.end(), [&](RelationId a, RelationId b) {
    const auto ca = kg.facts_by_relation(a).size();
    const auto cb = kg.facts_by_relation(b).size();
    if (ca != cb) return ca < cb;
    return kg.relations().label(a) < kg.relations().label(b);
  });
  std::vector<Fact> out;
  for (RelationId r : order) {
    if (out.size() >= k) break;
    auto& facts = by_relation[r];
    Rng rng(mix_seed(mix_seed(seed, r), 0x5ba75e));
    rng.shuffle(std::span<Fact>(facts));
    for (const auto& f : facts) {
      if (out.size() >= k) break;
      out.push_back(f);
    }
  }
  return out;
}

std::vector<Fact> baseline_random(const KnowledgeGraph& kg, const Fact& prediction, std::size_t k,
                                  std::uint64_t seed) {
  auto facts = incident_facts(kg, prediction);
  Rng rng(mix_seed(seed, 0x7a4d0));
  rng.shuffle(std::span<Fact>(facts));
  if (facts.size() > k) facts.resize(k);
  return facts;
}

nlohmann::json explanation_set_json(const KnowledgeGraph& kg, const ExplanationSet& set) {
  if (set.predictions.size() != set.facts.size())
    throw InvalidArgument("explanation set: predictions and fact lists differ in length");
  auto targets = nlohmann::json::array();
  for (std::size_t i = 0; i < set.predictions.size(); ++i) {
    auto facts = nlohmann::json::array();
    for (const auto& f : set.facts[i]) facts.push_back(fact_json(kg, f));
    targets.push_back({{"prediction", fact_json(kg, set.predictions[i])}, {"facts", facts}});
  }
  return {{"method", set.method}, {"targets", targets}};
}

ExplanationSet parse_explanation_set(const KnowledgeGraph& kg, const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("targets") || !j.at("targets").is_array())
    throw ParseError("explanation set must be an object with a 'targets' array");
  ExplanationSet out;
  out.method = j.value("method", std::string("import"));
  const auto& targets = j.at("targets");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    const std::string where = "targets[" + std::to_string(i) + "]";
    if (!t.is_object() || !t.contains("prediction") || !t.contains("facts") ||
        !t.at("facts").is_array())
      throw ParseError(where + " needs 'prediction' and a 'facts' array");
    try {
      out.predictions.push_back(fact_from_json(kg, t.at("prediction")));
      std::vector<Fact> facts;
      for (const auto& f : t.at("facts")) facts.push_back(fact_from_json(kg, f));
      out.facts.push_back(std::move(facts));
    } catch (const LookupError& e) {
      throw LookupError(where + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

ExplanationSet import_explanations(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  try {
    return parse_explanation_set(kg, read_json_file(path));
  } catch (const LookupError& e) {
    throw LookupError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json report_json(const AttackReport& report) {
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    auto expl = nlohmann::json::array();
    for (const auto& t : r.explanation) expl.push_back(triple_json(t));
    rows.push_back({{"prediction", triple_json(r.target)},
                    {"rr_before", r.rr_before},
                    {"rr_after", r.rr_after},
                    {"h1_before", r.h1_before},
                    {"h1_after", r.h1_after},
                    {"head_rank_before", r.head_rank_before},
                    {"tail_rank_before", r.tail_rank_before},
                    {"head_rank_after", r.head_rank_after},
                    {"tail_rank_after", r.tail_rank_after},
                    {"explanation", expl}});
  }
  auto removed = nlohmann::json::array();
  for (const auto& t : report.removed) removed.push_back(triple_json(t));
  return {{"method", report.method},       {"k", report.k},
          {"seed", report.seed},           {"per_target", report.per_target},
          {"delta_mrr", report.delta_mrr}, {"delta_h1", report.delta_h1},
          {"h1_eligible", report.h1_eligible},
          {"targets", rows},               {"removed", removed}};
}

AttackReport report_from_json(const nlohmann::json& j) {
  AttackReport out;
  try {
    out.method = j.at("method").get<std::string>();
    out.k = j.value("k", std::size_t{0});
    out.seed = j.value("seed", std::uint64_t{0});
    out.per_target = j.value("per_target", false);
    for (const auto& r : j.at("targets")) {
      AttackRow row;
      row.target = triple_from_json(r.at("prediction"));
      row.rr_before = r.at("rr_before").get<double>();
      row.rr_after = r.at("rr_after").get<double>();
      row.h1_before = r.at("h1_before").get<double>();
      row.h1_after = r.at("h1_after").get<double>();
      row.head_rank_before = r.value("head_rank_before", 1u);
      row.tail_rank_before = r.value("tail_rank_before", 1u);
      row.head_rank_after = r.value("head_rank_after", 1u);
      row.tail_rank_after = r.value("tail_rank_after", 1u);
      for (const auto& t : r.value("explanation", nlohmann::json::array()))
        row.explanation.push_back(triple_from_json(t));
      out.rows.push_back(std::move(row));
    }
    for (const auto& t : j.value("removed", nlohmann::json::array()))
      out.removed.push_back(triple_from_json(t));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("attack report: ") + e.what());
  }
  out.recompute();
  return out;
}

}  // namespace expath
