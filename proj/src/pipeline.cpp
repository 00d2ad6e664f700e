#include "expath/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "expath/random.hpp"
#include "expath/serialize.hpp"

namespace expath {

void RunConfig::validate() const {
  model.validate();
  if (k < 1 || k > 8) throw InvalidArgument("explanation size k must be within 1..8");
  if (targets < 1) throw InvalidArgument("target count must be positive");
  if (runs < 1) throw InvalidArgument("runs must be positive");
  if (max_len < 1 || max_len > kMaxPathLength) throw InvalidArgument("max_len must be within 1..3");
  if (path_cap < 1) throw InvalidArgument("path_cap must be positive");
  if (!use_cp && !use_pt && method == "expath")
    throw InvalidArgument("eXpath needs CP or PT rules; pick a baseline method instead");
  const bool known = method == "expath" || method == "sparse" || method == "random" ||
                     method.rfind("import:", 0) == 0;
  if (!known) throw InvalidArgument("unknown method '" + method + "'");
  if (fallback != "none" && fallback != "sparse" && fallback != "random")
    throw InvalidArgument("fallback must be none, sparse or random");
  if (thresholds.min_sc < 0 || thresholds.min_hc < 0)
    throw InvalidArgument("thresholds must be non-negative");
}

MiningOptions RunConfig::mining() const {
  MiningOptions m;
  m.thresholds = thresholds;
  m.max_len = max_len;
  m.path_cap = path_cap;
  m.rel_eps = rel_eps;
  m.relevance.exclude_both_orientations = exclude_both;
  return m;
}

ScoringOptions RunConfig::scoring(const KnowledgeGraph& kg) const {
  ScoringOptions s;
  s.use_cp = use_cp;
  s.use_pt = use_pt;
  s.greedy = greedy;
  s.policy = policy ? *policy : choose_policy(kg);
  return s;
}

std::string RunConfig::method_label() const {
  if (method != "expath") return method;
  std::string out = "expath";
  if (!use_cp) out += "-no-cp";
  if (!use_pt) out += "-no-pt";
  if (greedy) out += "-greedy";
  return out;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"data", c.data.string()},
       {"model", c.model},
       {"thresholds", {{"min_sc", c.thresholds.min_sc}, {"min_hc", c.thresholds.min_hc}, {"min_supp", c.thresholds.min_supp}}},
       {"policy", c.policy ? std::string(policy_name(*c.policy)) : std::string("auto")},
       {"k", c.k},
       {"targets", c.targets},
       {"seed", c.seed},
       {"runs", c.runs},
       {"method", c.method},
       {"fallback", c.fallback},
       {"use_cp", c.use_cp},
       {"use_pt", c.use_pt},
       {"greedy", c.greedy},
       {"per_target", c.per_target},
       {"max_len", c.max_len},
       {"path_cap", c.path_cap},
       {"rel_eps", c.rel_eps},
       {"exclude_both", c.exclude_both},
       {"jobs", c.jobs}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw InvalidArgument("run config must be a JSON object");
  try {
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("model")) {
      ModelConfig m = c.model;
      from_json(j.at("model"), m);
      c.model = m;
    }
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      c.thresholds.min_sc = t.value("min_sc", c.thresholds.min_sc);
      c.thresholds.min_hc = t.value("min_hc", c.thresholds.min_hc);
      c.thresholds.min_supp = t.value("min_supp", c.thresholds.min_supp);
    }
    if (j.contains("policy")) {
      const auto p = j.at("policy").get<std::string>();
      c.policy = p == "auto" ? std::nullopt : std::optional(parse_policy(p));
    }
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("targets")) c.targets = j.at("targets").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("runs")) c.runs = j.at("runs").get<std::size_t>();
    if (j.contains("method")) c.method = j.at("method").get<std::string>();
    if (j.contains("fallback")) c.fallback = j.at("fallback").get<std::string>();
    if (j.contains("use_cp")) c.use_cp = j.at("use_cp").get<bool>();
    if (j.contains("use_pt")) c.use_pt = j.at("use_pt").get<bool>();
    if (j.contains("greedy")) c.greedy = j.at("greedy").get<bool>();
    if (j.contains("per_target")) c.per_target = j.at("per_target").get<bool>();
    if (j.contains("max_len")) c.max_len = j.at("max_len").get<std::size_t>();
    if (j.contains("path_cap")) c.path_cap = j.at("path_cap").get<std::size_t>();
    if (j.contains("rel_eps")) c.rel_eps = j.at("rel_eps").get<double>();
    if (j.contains("exclude_both")) c.exclude_both = j.at("exclude_both").get<bool>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("run config: ") + e.what());
  }
}

unsigned resolve_jobs(unsigned jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ExplainedPrediction> explain_all(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                             std::span<const Fact> predictions,
                                             const RunConfig& config) {
  const auto scoring = config.scoring(kg);
  scoring.validate();
  RuleMiner miner(kg, model, config.mining());
  std::vector<std::optional<ExplainedPrediction>> slots(predictions.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < predictions.size(); i = next++) {
      try {
        auto rules = miner.mine(predictions[i]);
        auto ex = select_explanation(kg, rules, config.k, scoring);
        slots[i] = ExplainedPrediction{std::move(rules), std::move(ex)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = predictions.size();
      }
    }
  };
  const auto n = std::min<std::size_t>(resolve_jobs(config.jobs), std::max<std::size_t>(1, predictions.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<ExplainedPrediction> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<Fact> explanation_facts(const Explanation& ex) {
  std::vector<Fact> out;
  for (const auto& sf : ex.facts) out.push_back(sf.fact);
  return out;
}

namespace {

std::vector<Fact> baseline(const std::string& name, const KnowledgeGraph& kg, const Fact& f,
                           std::size_t k, std::uint64_t seed) {
  return name == "sparse" ? baseline_sparse(kg, f, k, seed) : baseline_random(kg, f, k, seed);
}

}  // namespace

std::vector<std::vector<Fact>> method_explanations(const KnowledgeGraph& kg,
                                                   const EmbeddingModel& model,
                                                   const TargetSet& targets,
                                                   const RunConfig& config, std::uint64_t seed) {
  std::vector<std::vector<Fact>> out;
  const auto facts = targets.facts();
  if (config.method == "sparse" || config.method == "random") {
    for (std::size_t i = 0; i < facts.size(); ++i)
      out.push_back(baseline(config.method, kg, facts[i], config.k, mix_seed(seed, i)));
    return out;
  }
  if (config.method != "expath") throw InvalidArgument("method_explanations: unsupported method " + config.method);
  const auto explained = explain_all(kg, model, facts, config);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    auto set = explanation_facts(explained[i].explanation);
    if (set.empty() && config.fallback != "none")
      set = baseline(config.fallback, kg, facts[i], config.k, mix_seed(seed, i));
    out.push_back(std::move(set));
  }
  return out;
}

nlohmann::json training_metrics(const KnowledgeGraph& kg, const EmbeddingModel& model) {
  nlohmann::json j;
  j["counts"] = {{"entities", kg.num_entities()},
                 {"relations", kg.num_relations()},
                 {"train", kg.facts(Split::train).size()},
                 {"valid", kg.facts(Split::valid).size()},
                 {"test", kg.facts(Split::test).size()}};
  auto metrics = [&](Split s) -> nlohmann::json {
    const auto& facts = kg.facts(s);
    if (facts.empty()) return nullptr;
    const auto e = mrr_h1(model, kg, facts);
    return {{"mrr", e.mrr}, {"h1", e.hits_at_1}};
  };
  j["valid"] = metrics(Split::valid);
  j["test"] = metrics(Split::test);
  // Filtered train ranking is quadratic in practice; only small graphs.
  constexpr std::size_t kTrainEvalLimit = 20000;
  j["train"] = kg.facts(Split::train).size() <= kTrainEvalLimit ? metrics(Split::train) : nlohmann::json(nullptr);
  return j;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

namespace {

nlohmann::json mean_std_json(std::span<const double> values) {
  const auto m = mean_std(values);
  return {{"mean", m.mean}, {"std", m.std}};
}

AttackReport single_run(const KnowledgeGraph& kg, const RunConfig& config, std::uint64_t seed) {
  ModelConfig mc = config.model;
  mc.seed = seed;
  const auto model = train(kg, mc);
  AttackOptions opts;
  opts.k = config.k;
  opts.per_target = config.per_target;

  if (config.method.rfind("import:", 0) == 0) {
    const auto set = import_explanations(kg, config.method.substr(7));
    opts.method = set.method;
    const auto targets = rank_targets(model, kg, set.predictions);
    return run_attack(kg, mc, targets, set.facts, opts);
  }
  opts.method = config.method_label();
  const auto targets = select_targets(model, kg, config.targets, seed);
  const auto expl = method_explanations(kg, model, targets, config, seed);
  return run_attack(kg, mc, targets, expl, opts);
}

bool is_multi(const nlohmann::json& j) { return j.is_object() && j.contains("runs") && j.at("runs").is_array(); }

nlohmann::json multi_document(const std::vector<AttackReport>& reports) {
  std::vector<double> dm, dh;
  auto runs = nlohmann::json::array();
  for (const auto& r : reports) {
    dm.push_back(r.delta_mrr);
    dh.push_back(r.delta_h1);
    runs.push_back(report_json(r));
  }
  return {{"method", reports.front().method},
          {"k", reports.front().k},
          {"runs", runs},
          {"summary", {{"delta_mrr", mean_std_json(dm)}, {"delta_h1", mean_std_json(dh)}}}};
}

}  // namespace

nlohmann::json attack_command(const KnowledgeGraph& kg, const RunConfig& config) {
  config.validate();
  std::vector<AttackReport> reports;
  for (std::size_t i = 0; i < config.runs; ++i) reports.push_back(single_run(kg, config, config.seed + i));
  if (reports.size() == 1) return report_json(reports.front());
  return multi_document(reports);
}

nlohmann::json rules_command(const KnowledgeGraph& kg, std::span<const std::string> rules,
                             const Thresholds& thresholds) {
  auto out = nlohmann::json::array();
  for (const auto& text : rules) {
    const Rule rule = parse_rule(kg, text);
    const auto m = evaluate(kg, rule, thresholds.min_supp);
    out.push_back({{"rule", to_string(kg, rule)},
                   {"kind", rule.is_cp() ? "cp" : "pt"},
                   {"supp", m.supp},
                   {"body_count", m.body_count},
                   {"head_count", m.head_count},
                   {"sc", m.sc},
                   {"hc", m.hc},
                   {"conf", m.conf},
                   {"passes", m.sc >= thresholds.min_sc && m.hc >= thresholds.min_hc}});
  }
  return {{"rules", out}};
}

nlohmann::json fuse_command(const nlohmann::json& x, const nlohmann::json& y) {
  if (is_multi(x) != is_multi(y)) throw InvalidArgument("cannot fuse a single-run report with a multi-run one");
  if (!is_multi(x)) return report_json(fuse(report_from_json(x), report_from_json(y)));
  const auto& rx = x.at("runs");
  const auto& ry = y.at("runs");
  if (rx.size() != ry.size()) throw InvalidArgument("cannot fuse documents with different run counts");
  std::vector<AttackReport> fused;
  for (std::size_t i = 0; i < rx.size(); ++i) fused.push_back(fuse(report_from_json(rx[i]), report_from_json(ry[i])));
  return multi_document(fused);
}

nlohmann::json report_command(std::span<const nlohmann::json> documents) {
  auto rows = nlohmann::json::array();
  for (const auto& d : documents) {
    std::vector<AttackReport> reports;
    if (is_multi(d)) {
      for (const auto& r : d.at("runs")) reports.push_back(report_from_json(r));
    } else {
      reports.push_back(report_from_json(d));
    }
    if (reports.empty()) throw InvalidArgument("report document without runs");
    std::vector<double> dm, dh;
    for (const auto& r : reports) {
      dm.push_back(r.delta_mrr);
      dh.push_back(r.delta_h1);
    }
    rows.push_back({{"method", reports.front().method},
                    {"k", reports.front().k},
                    {"runs", reports.size()},
                    {"targets", reports.front().rows.size()},
                    {"delta_mrr", mean_std_json(dm)},
                    {"delta_h1", mean_std_json(dh)}});
  }
  return {{"rows", rows}};
}

std::string report_table(const nlohmann::json& summary) {
  std::string out = "| method | k | runs | targets | dMRR | dH@1 |\n|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& r : summary.at("rows")) {
    std::snprintf(buf, sizeof buf, "| %s | %zu | %zu | %zu | %.3f +/- %.3f | %.3f +/- %.3f |\n",
                  r.at("method").get<std::string>().c_str(), r.at("k").get<std::size_t>(),
                  r.at("runs").get<std::size_t>(), r.at("targets").get<std::size_t>(),
                  r.at("delta_mrr").at("mean").get<double>(), r.at("delta_mrr").at("std").get<double>(),
                  r.at("delta_h1").at("mean").get<double>(), r.at("delta_h1").at("std").get<double>());
    out += buf;
  }
  return out;
}

}  // namespace expath
