#include <gtest/gtest.h>

#include "expath/kge.hpp"
#include "expath/rules.hpp"
#include "support.hpp"

using namespace expath;

namespace {

void expect_metrics(const RuleMetrics& m, const testkit::OracleMetrics& o, std::uint64_t min_supp) {
  EXPECT_EQ(m.supp, o.supp);
  EXPECT_EQ(m.body_count, o.body);
  EXPECT_EQ(m.head_count, o.head);
  const double sc = o.body ? static_cast<double>(o.supp) / o.body : 0.0;
  const double hc = o.head ? static_cast<double>(o.supp) / o.head : 0.0;
  EXPECT_NEAR(m.sc, sc, 1e-12);
  EXPECT_NEAR(m.hc, hc, 1e-12);
  EXPECT_NEAR(m.conf, sc * o.supp / static_cast<double>(o.supp + min_supp), 1e-12);
}

}  // namespace

TEST(SmoothedConfidence, Formula) {
  EXPECT_DOUBLE_EQ(smoothed_confidence(0.5, 10, 10), 0.25);
  EXPECT_DOUBLE_EQ(smoothed_confidence(1.0, 0, 10), 0.0);
  EXPECT_DOUBLE_EQ(smoothed_confidence(0.8, 30, 0), 0.8);
}

TEST(ClosedPath, MatchesNestedJoinOracle) {
  Rng rng(77);
  for (std::uint64_t g = 0; g < 10; ++g) {
    const auto kg = testkit::random_graph({25, 4, 120, 0.05}, 500 + g);
    for (int i = 0; i < 10; ++i) {
      const auto head = static_cast<RelationId>(rng.below(kg.num_relations()));
      const auto body = testkit::random_body(rng, kg.num_relations(), 1 + rng.below(3));
      expect_metrics(eval_cp(kg, head, body, 10), testkit::brute_force_cp(kg, head, body), 10);
    }
  }
}

TEST(ClosedPath, MissingHeadRelationIsReported) {
  const auto kg = KnowledgeGraph::build({{"a", "r", "b"}}, {}, {{"a", "q", "b"}});
  EXPECT_THROW(eval_cp(kg, kg.relations().at("q"), {forward(0)}), HeadRelationAbsent);
  EXPECT_THROW(eval_cp(kg, 0, {}), InvalidArgument);
}

TEST(PropertyTransition, MatchesHashSetOracle) {
  Rng rng(5);
  for (std::uint64_t g = 0; g < 10; ++g) {
    const auto kg = testkit::random_graph({12, 3, 90, 0.05}, 900 + g);
    for (int i = 0; i < 20; ++i) {
      const auto head = static_cast<RelationId>(rng.below(kg.num_relations()));
      const auto c = static_cast<EntityId>(rng.below(kg.num_entities()));
      const SignedRelation r0{static_cast<RelationId>(rng.below(kg.num_relations())), rng.bernoulli(0.5)};
      const auto c2 = static_cast<EntityId>(rng.below(kg.num_entities()));
      const auto rule = rng.bernoulli(0.5) ? Rule::property_head(head, c, r0, c2)
                                           : Rule::property_tail(head, c, r0, c2);
      expect_metrics(eval_pt(kg, rule, 10), testkit::hash_set_pt(kg, rule), 10);
      EXPECT_EQ(evaluate(kg, rule, 10).supp, eval_pt(kg, rule, 10).supp);
    }
  }
}

TEST(RuleText, RoundTrips) {
  const auto kg = testkit::random_graph({10, 3, 40, 0.0}, 3);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Rule rule;
    const auto head = static_cast<RelationId>(rng.below(3));
    const SignedRelation r0{static_cast<RelationId>(rng.below(3)), rng.bernoulli(0.5)};
    switch (i % 3) {
      case 0: rule = Rule::closed_path(head, testkit::random_body(rng, 3, 1 + rng.below(3))); break;
      case 1: rule = Rule::property_head(head, 1, r0, 2); break;
      default: rule = Rule::property_tail(head, 3, r0, 4); break;
    }
    const auto text = to_string(kg, rule);
    EXPECT_EQ(parse_rule(kg, text), rule) << text;
  }
}

TEST(RuleText, ErrorsCarryColumnsAndNames) {
  const auto kg = KnowledgeGraph::build({{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r0", "c"}}, {}, {});
  EXPECT_EQ(to_string(kg, parse_rule(kg, "r0 <- r1, r2")), "r0 <- r1, r2");
  EXPECT_EQ(to_string(kg, parse_rule(kg, "  r0<-r1 ,r2'  ")), "r0 <- r1, r2'");
  try {
    parse_rule(kg, "r0 <- r1 r2");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), 9u);
  }
  EXPECT_THROW(parse_rule(kg, "r0 r1"), ParseError);
  EXPECT_THROW(parse_rule(kg, "r0 <- "), ParseError);
  EXPECT_THROW(parse_rule(kg, "r0 <- r1,, r2"), ParseError);
  EXPECT_THROW(parse_rule(kg, "r9 <- r1"), HeadRelationAbsent);
  EXPECT_THROW(parse_rule(kg, "r0 <- r7"), LookupError);
  EXPECT_THROW(parse_rule(kg, "r0(X, zz) <- r1(X, a)"), LookupError);
}

TEST(Miner, RulesRespectThresholdsAndOrder) {
  // Planted composition r0 = r1 . r2 over a small population.
  std::vector<Triple> base, test;
  for (int i = 0; i < 40; ++i) {
    const auto x = "x" + std::to_string(i), y = "y" + std::to_string(i % 8),
               z = "z" + std::to_string(i % 4);
    base.push_back({x, "r1", y});
    base.push_back({y, "r2", z});
    (i == 0 ? test : base).push_back({x, "r0", z});
  }
  const auto kg = KnowledgeGraph::build(base, {}, test);
  ModelConfig c;
  c.dimension = 16;
  c.epochs = 60;
  const auto model = train(kg, c);
  MiningOptions opt;
  const auto set = mine(kg, model, kg.facts(Split::test)[0], opt);
  EXPECT_GT(set.grounded_paths, 0u);
  EXPECT_LE(set.relation_paths, set.grounded_paths);
  EXPECT_LE(set.relevant_paths, set.relation_paths);
  for (std::size_t i = 0; i < set.rules.size(); ++i) {
    const auto& m = set.rules[i].metrics;
    EXPECT_GE(m.sc, opt.thresholds.min_sc);
    EXPECT_GE(m.hc, opt.thresholds.min_hc);
    EXPECT_EQ(parse_rule(kg, set.rules[i].text), set.rules[i].rule);
    if (i > 0) EXPECT_GE(set.rules[i - 1].metrics.conf, m.conf);
    if (set.rules[i].rule.is_cp()) {
      ASSERT_TRUE(set.rules[i].group);
      EXPECT_GT(set.rules[i].relevance.rel_h, 0.0);
      EXPECT_GT(set.rules[i].relevance.rel_t, 0.0);
    } else {
      EXPECT_TRUE(kg.contains(Split::train, set.rules[i].pt_body_fact));
    }
  }
}

TEST(RuleText, AcceptsPathLikeLabels) {
  const auto kg = KnowledgeGraph::build(
      {{"/m/a", "/film/film/sequel", "/m/b"}, {"/m/c", "/film/actor/film./film/performance/film", "/m/b"},
       {"/m/a", "/film/film/country", "/m/03_3d"}, {"/m/a", "/film/film/language", "/m/03_9r"}},
      {}, {});
  const auto cp = parse_rule(kg, "/film/film/country <- /film/film/sequel, /film/actor/film./film/performance/film'");
  EXPECT_EQ(cp.body.size(), 2u);
  EXPECT_TRUE(cp.body[1].inverse);
  const auto pt = parse_rule(kg, "/film/film/country(X, /m/03_3d) <- /film/film/language(X, /m/03_9r)");
  EXPECT_EQ(pt.kind, RuleKind::pt_head);
  EXPECT_DOUBLE_EQ(evaluate(kg, pt).sc, 1.0);
}
