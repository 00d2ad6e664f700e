#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "expath/rules.hpp"
#include "expath/synth.hpp"

using namespace expath;

namespace {

// Standard confidence of the planted rule over all splits together.
double planted_sc(const SyntheticData& d) {
  auto all = d.train;
  all.insert(all.end(), d.valid.begin(), d.valid.end());
  all.insert(all.end(), d.test.begin(), d.test.end());
  const auto kg = KnowledgeGraph::build(all, {}, {});
  const auto& rel = kg.relations();
  return eval_cp(kg, rel.at("r0"), {forward(rel.at("r1")), forward(rel.at("r2"))}).sc;
}

}  // namespace

TEST(Synth, CertainRuleHeadsEveryBodyPair) {
  SyntheticSpec s;
  s.entities = 300;
  s.rules[0].probability = 1.0;
  const auto d = generate(s);
  EXPECT_EQ(d.head_facts, d.body_pairs);
  EXPECT_DOUBLE_EQ(planted_sc(d), 1.0);
}

TEST(Synth, ConfidenceTracksProbability) {
  SyntheticSpec s;
  s.entities = 3000;
  s.fan_in = 4;
  s.rules[0].probability = 0.6;
  EXPECT_NEAR(planted_sc(generate(s)), 0.6, 0.05);
}

TEST(Synth, DeterministicPerSeed) {
  SyntheticSpec s;
  s.entities = 200;
  const auto a = generate(s);
  const auto b = generate(s);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  s.seed = 43;
  EXPECT_NE(generate(s).train, a.train);
}

TEST(Synth, SplitsAreDisjointSortedAndConnected) {
  SyntheticSpec s;
  s.entities = 400;
  const auto d = generate(s);
  EXPECT_TRUE(std::is_sorted(d.train.begin(), d.train.end()));
  std::set<Triple> seen;
  for (const auto* split : {&d.train, &d.valid, &d.test})
    for (const auto& t : *split) EXPECT_TRUE(seen.insert(t).second);
  EXPECT_FALSE(d.test.empty());
  EXPECT_FALSE(d.valid.empty());
  // Every evaluation entity also appears in train.
  const auto kg = KnowledgeGraph::build(d.train, {}, {});
  for (const auto* split : {&d.valid, &d.test}) {
    for (const auto& t : *split) {
      EXPECT_TRUE(kg.entities().find(t.head).has_value());
      EXPECT_TRUE(kg.entities().find(t.tail).has_value());
    }
  }
}

TEST(Synth, RejectsInvalidAndInfeasibleSpecs) {
  SyntheticSpec s;
  s.coverage = 1.5;
  EXPECT_THROW(generate(s), InvalidArgument);
  s = {};
  s.rules[0].body = {"r1", "r0"};
  EXPECT_THROW(generate(s), InvalidArgument);
  s = {};
  s.rules[0].body = {"r1", "r9"};
  EXPECT_THROW(generate(s), InvalidArgument);
  s = {};
  s.coverage = 0.0;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.relations = 3;  // every relation is planted, none left for background
  EXPECT_THROW(generate(s), Error);
  s.density = 0.0;
  s.entities = 300;
  EXPECT_NO_THROW(generate(s));
}

TEST(Synth, SpecJsonRoundTrip) {
  SyntheticSpec s;
  s.entities = 123;
  s.rules = {{"r0", {"r1'", "r2"}, 0.7}, {"r3", {"r4"}, 1.0}};
  s.seed = 9;
  const nlohmann::json j = s;
  const auto back = j.get<SyntheticSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(Synth, WritesLoadableDataset) {
  SyntheticSpec s;
  s.entities = 200;
  const auto d = generate(s);
  const auto dir = std::filesystem::temp_directory_path() / "expath_synth_test";
  write_dataset(dir, s, d);
  const auto kg = KnowledgeGraph::load(dir);
  EXPECT_EQ(kg.facts(Split::train).size(), d.train.size());
  EXPECT_TRUE(std::filesystem::exists(dir / "synth.json"));
  std::filesystem::remove_all(dir);
}
