#include "expath/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "expath/random.hpp"
#include "expath/rules.hpp"
#include "expath/serialize.hpp"

namespace expath {

namespace {

std::string relation_label(std::uint32_t r) { return "r" + std::to_string(r); }

std::string entity_label(std::uint32_t e, std::uint32_t n) {
  std::string digits = std::to_string(e);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n - 1).size());
  return "e" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

struct Step {
  std::uint32_t relation;
  bool inverse;
};

Step parse_step(const SyntheticSpec& spec, std::string token) {
  bool inverse = false;
  if (!token.empty() && token.back() == '\'') {
    inverse = true;
    token.pop_back();
  }
  for (std::uint32_t r = 0; r < spec.relations; ++r) {
    if (relation_label(r) == token) return {r, inverse};
  }
  throw InvalidArgument("planted rule uses unknown relation '" + token + "' (labels are r0..r" +
                        std::to_string(spec.relations - 1) + ")");
}

// Raw fact over integer ids; ordered for set membership.
struct Raw {
  std::uint32_t h, r, t;
  friend auto operator<=>(const Raw&, const Raw&) = default;
};

std::uint64_t tree_size(std::size_t len, std::uint32_t fan_in, std::uint32_t branching) {
  // sources + level-1 nodes + ... + root
  std::uint64_t level = 1;  // nodes at the current level, from the root down
  std::uint64_t total = 1;
  for (std::size_t l = len; l-- > 1;) {
    level *= branching;
    total += level;
  }
  return total + level * fan_in;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (entities < 2) throw InvalidArgument("synthetic spec: need at least 2 entities");
  if (relations < 1) throw InvalidArgument("synthetic spec: need at least 1 relation");
  if (fan_in < 1 || branching < 1) throw InvalidArgument("synthetic spec: fan_in and branching must be positive");
  if (!(density >= 0.0)) throw InvalidArgument("synthetic spec: density must be non-negative");
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw InvalidArgument("synthetic spec: coverage must be in [0, 1]");
  for (double f : {holdout, valid_fraction, test_fraction}) {
    if (!(f >= 0.0 && f < 1.0)) throw InvalidArgument("synthetic spec: split fractions must be in [0, 1)");
  }
  if (valid_fraction + test_fraction >= 1.0)
    throw InvalidArgument("synthetic spec: valid and test fractions leave no train facts");
  for (const auto& rule : rules) {
    if (!(rule.probability > 0.0 && rule.probability <= 1.0))
      throw InvalidArgument("synthetic spec: rule probability must be in (0, 1]");
    if (rule.body.empty() || rule.body.size() > 3)
      throw InvalidArgument("synthetic spec: rule bodies need 1 to 3 steps");
    const auto head = parse_step(*this, rule.head);
    if (head.inverse) throw InvalidArgument("synthetic spec: rule head cannot be inverse");
    for (const auto& b : rule.body) {
      if (parse_step(*this, b).relation == head.relation)
        throw InvalidArgument("synthetic spec: head relation " + rule.head + " appears in its own body");
    }
  }
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  auto rules = nlohmann::json::array();
  for (const auto& r : s.rules) rules.push_back({{"head", r.head}, {"body", r.body}, {"p", r.probability}});
  j = {{"entities", s.entities},   {"relations", s.relations},
       {"rules", rules},           {"density", s.density},
       {"fan_in", s.fan_in},       {"branching", s.branching},
       {"coverage", s.coverage},   {"holdout", s.holdout},
       {"valid_fraction", s.valid_fraction}, {"test_fraction", s.test_fraction},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  if (!j.is_object()) throw InvalidArgument("synthetic spec must be a JSON object");
  try {
    if (j.contains("entities")) s.entities = j.at("entities").get<std::uint32_t>();
    if (j.contains("relations")) s.relations = j.at("relations").get<std::uint32_t>();
    if (j.contains("density")) s.density = j.at("density").get<double>();
    if (j.contains("fan_in")) s.fan_in = j.at("fan_in").get<std::uint32_t>();
    if (j.contains("branching")) s.branching = j.at("branching").get<std::uint32_t>();
    if (j.contains("coverage")) s.coverage = j.at("coverage").get<double>();
    if (j.contains("holdout")) s.holdout = j.at("holdout").get<double>();
    if (j.contains("valid_fraction")) s.valid_fraction = j.at("valid_fraction").get<double>();
    if (j.contains("test_fraction")) s.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rules")) {
      s.rules.clear();
      for (const auto& r : j.at("rules")) {
        s.rules.push_back({r.at("head").get<std::string>(),
                           r.at("body").get<std::vector<std::string>>(), r.value("p", 1.0)});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("synthetic spec: ") + e.what());
  }
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<std::uint32_t> pool(spec.entities);
  for (std::uint32_t i = 0; i < spec.entities; ++i) pool[i] = i;
  rng.shuffle(std::span<std::uint32_t>(pool));
  std::size_t next = 0;

  std::set<std::uint32_t> rule_relations;
  std::set<Raw> body_facts;
  std::vector<std::pair<Step, std::vector<Step>>> parsed;
  for (const auto& rule : spec.rules) {
    std::vector<Step> body;
    for (const auto& b : rule.body) body.push_back(parse_step(spec, b));
    const auto head = parse_step(spec, rule.head);
    rule_relations.insert(head.relation);
    for (const auto& s : body) rule_relations.insert(s.relation);
    parsed.emplace_back(head, std::move(body));
  }

  // Trees, one rule after another, each within its share of the coverage.
  const double share = spec.rules.empty() ? 0.0 : spec.coverage / static_cast<double>(spec.rules.size());
  for (const auto& [head, body] : parsed) {
    const auto size = tree_size(body.size(), spec.fan_in, spec.branching);
    const auto trees = static_cast<std::size_t>(std::floor(share * spec.entities / static_cast<double>(size)));
    for (std::size_t tr = 0; tr < trees; ++tr) {
      // level[L] is the root; children of a level-l node sit at level l-1.
      std::vector<std::uint32_t> upper{pool[next++]};
      for (std::size_t l = body.size(); l-- > 0;) {
        const std::uint32_t fan = l == 0 ? spec.fan_in : spec.branching;
        std::vector<std::uint32_t> lower;
        for (auto parent : upper) {
          for (std::uint32_t c = 0; c < fan; ++c) {
            const auto child = pool[next++];
            lower.push_back(child);
            const Step s = body[l];
            body_facts.insert(s.inverse ? Raw{parent, s.relation, child} : Raw{child, s.relation, parent});
          }
        }
        upper = std::move(lower);
      }
    }
  }

  // Head facts over every body-connected pair of the generated body facts.
  std::vector<Triple> body_triples;
  for (const auto& f : body_facts)
    body_triples.push_back({entity_label(f.h, spec.entities), relation_label(f.r), entity_label(f.t, spec.entities)});
  std::set<Raw> head_facts;
  SyntheticData data;
  if (!body_triples.empty()) {
    const auto body_kg = KnowledgeGraph::build(body_triples, {}, {});
    auto to_raw = [&](EntityId e) {
      return static_cast<std::uint32_t>(std::stoul(body_kg.entities().label(e).substr(1)));
    };
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      const auto& [head, body] = parsed[i];
      RelationPath path;
      for (const auto& s : body) path.push_back({body_kg.relations().at(relation_label(s.relation)), s.inverse});
      const auto pairs = body_matrix(body_kg, path).entries();
      data.body_pairs += pairs.size();
      for (const auto& [x, y] : pairs) {
        if (x == y) continue;
        if (rng.bernoulli(spec.rules[i].probability)) head_facts.insert({to_raw(x), head.relation, to_raw(y)});
      }
    }
  }
  if (head_facts.empty())
    throw Error("synthetic spec is infeasible: no head facts were produced (raise coverage, "
                "entities or rule probability)");
  data.head_facts = head_facts.size();

  std::vector<std::uint32_t> background_relations;
  for (std::uint32_t r = 0; r < spec.relations; ++r) {
    if (!rule_relations.contains(r)) background_relations.push_back(r);
  }
  std::set<Raw> all(body_facts.begin(), body_facts.end());
  all.insert(head_facts.begin(), head_facts.end());
  std::vector<Raw> background;
  const auto target = static_cast<std::size_t>(std::llround(spec.density * spec.entities));
  if (target > 0 && background_relations.empty())
    throw Error("synthetic spec is infeasible: background density needs a relation outside the planted rules");
  std::vector<std::uint32_t> degree(spec.entities, 0);
  for (const auto& f : all) {
    ++degree[f.h];
    ++degree[f.t];
  }
  auto add_background = [&](std::uint32_t h, std::uint32_t t) {
    if (h == t) return false;
    const Raw f{h, background_relations[rng.below(background_relations.size())], t};
    if (!all.insert(f).second) return false;
    background.push_back(f);
    ++degree[h];
    ++degree[t];
    return true;
  };
  if (target > 0) {
    // Every entity appears at least once, then uniform random pairs.
    for (std::uint32_t e = 0; e < spec.entities; ++e) {
      while (degree[e] == 0) {
        const auto other = static_cast<std::uint32_t>(rng.below(spec.entities));
        if (rng.bernoulli(0.5)) add_background(e, other);
        else add_background(other, e);
      }
    }
    std::size_t attempts = 0;
    while (background.size() < target && attempts++ < 100 * target) {
      add_background(static_cast<std::uint32_t>(rng.below(spec.entities)),
                     static_cast<std::uint32_t>(rng.below(spec.entities)));
    }
  }

  // Split: body facts stay in train, held-out head facts go to test, the
  // remaining valid/test quota comes from background facts whose endpoints
  // keep another train fact.
  std::vector<Raw> train(body_facts.begin(), body_facts.end());
  std::vector<Raw> valid, test;
  std::vector<Raw> heads(head_facts.begin(), head_facts.end());
  rng.shuffle(std::span<Raw>(heads));
  const auto held = std::min(heads.size() - 1,
                             static_cast<std::size_t>(std::max<long long>(1, std::llround(spec.holdout * heads.size()))));
  test.assign(heads.begin(), heads.begin() + static_cast<std::ptrdiff_t>(held));
  train.insert(train.end(), heads.begin() + static_cast<std::ptrdiff_t>(held), heads.end());

  const std::size_t total = all.size();
  const auto valid_quota = static_cast<std::size_t>(std::llround(spec.valid_fraction * total));
  const auto test_quota_all = static_cast<std::size_t>(std::llround(spec.test_fraction * total));
  const std::size_t test_quota = test_quota_all > test.size() ? test_quota_all - test.size() : 0;
  // Train degree after the head holdout.
  std::vector<std::uint32_t> train_degree(spec.entities, 0);
  for (const auto& f : train) {
    ++train_degree[f.h];
    ++train_degree[f.t];
  }
  for (const auto& f : background) {
    ++train_degree[f.h];
    ++train_degree[f.t];
  }
  rng.shuffle(std::span<Raw>(background));
  std::size_t to_test = 0;
  for (const auto& f : background) {
    const bool movable = train_degree[f.h] >= 2 && train_degree[f.t] >= 2;
    if (movable && valid.size() < valid_quota) {
      valid.push_back(f);
    } else if (movable && to_test < test_quota) {
      test.push_back(f);
      ++to_test;
    } else {
      train.push_back(f);
      continue;
    }
    --train_degree[f.h];
    --train_degree[f.t];
  }

  auto labelled = [&](const std::vector<Raw>& facts) {
    std::vector<Triple> out;
    out.reserve(facts.size());
    for (const auto& f : facts)
      out.push_back({entity_label(f.h, spec.entities), relation_label(f.r), entity_label(f.t, spec.entities)});
    std::sort(out.begin(), out.end());
    return out;
  };
  data.train = labelled(train);
  data.valid = labelled(valid);
  data.test = labelled(test);
  return data;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec,
                   const SyntheticData& data) {
  auto lines = [](const std::vector<Triple>& facts) {
    std::string out;
    for (const auto& t : facts) out += t.head + "\t" + t.relation + "\t" + t.tail + "\n";
    return out;
  };
  write_text_file(dir / "train.txt", lines(data.train));
  write_text_file(dir / "valid.txt", lines(data.valid));
  write_text_file(dir / "test.txt", lines(data.test));
  nlohmann::json meta = {{"spec", spec},
                         {"body_pairs", data.body_pairs},
                         {"head_facts", data.head_facts},
                         {"counts", {{"train", data.train.size()}, {"valid", data.valid.size()}, {"test", data.test.size()}}}};
  write_text_file(dir / "synth.json", dump(meta));
}

}  // namespace expath
