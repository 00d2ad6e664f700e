#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "expath/expath.h"

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { expath_string_free(p); }
  nlohmann::json json() const { return nlohmann::json::parse(p); }
};

const std::filesystem::path kScratch = EXPATH_TEST_SCRATCH;

class CApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::filesystem::remove_all(kScratch);
    Owned out;
    const char* spec = R"({"entities": 300, "seed": 5})";
    ASSERT_EQ(expath_synth(spec, (kScratch / "data").c_str(), &out.p), EXPATH_OK) << expath_last_error();
  }
  void SetUp() override {
    ASSERT_EQ(expath_graph_load((kScratch / "data").c_str(), &graph_), EXPATH_OK) << expath_last_error();
  }
  void TearDown() override { expath_graph_free(graph_); }
  expath_graph* graph_ = nullptr;
};

}  // namespace

TEST_F(CApi, StatsAndStatusNames) {
  Owned s;
  ASSERT_EQ(expath_graph_stats(graph_, &s.p), EXPATH_OK);
  EXPECT_GT(s.json()["train"].get<int>(), 0);
  EXPECT_STREQ(expath_status_name(EXPATH_ERR_PARSE), "parse error");
  EXPECT_STRNE(expath_version(), "");
}

TEST_F(CApi, ErrorsMapToStatusCodes) {
  expath_graph* g = nullptr;
  EXPECT_EQ(expath_graph_load("/nonexistent/dir", &g), EXPATH_ERR_IO);
  EXPECT_NE(std::string(expath_last_error()).find("not found"), std::string::npos);
  EXPECT_EQ(expath_graph_load(nullptr, &g), EXPATH_ERR_INVALID_ARGUMENT);

  expath_model* m = nullptr;
  EXPECT_EQ(expath_model_train(graph_, "{bad json", &m), EXPATH_ERR_PARSE);
  EXPECT_EQ(expath_model_train(graph_, R"({"dim": 0})", &m), EXPATH_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m, nullptr);

  Owned out;
  EXPECT_EQ(expath_rules_evaluate(graph_, R"({"rules": ["r0 <- r1 r2"]})", &out.p), EXPATH_ERR_PARSE);
  EXPECT_EQ(expath_rules_evaluate(graph_, R"({"rules": ["r0 <- nope"]})", &out.p), EXPATH_ERR_LOOKUP);
  EXPECT_EQ(expath_model_load((kScratch / "missing").c_str(), &m), EXPATH_ERR_IO);
}

TEST_F(CApi, TrainSaveLoadExplain) {
  expath_model* m = nullptr;
  ASSERT_EQ(expath_model_train(graph_, R"({"dim": 16, "epochs": 40})", &m), EXPATH_OK) << expath_last_error();
  const auto prefix = (kScratch / "model").string();
  ASSERT_EQ(expath_model_save(m, prefix.c_str()), EXPATH_OK);
  expath_model* loaded = nullptr;
  ASSERT_EQ(expath_model_load(prefix.c_str(), &loaded), EXPATH_OK);

  Owned a, b;
  ASSERT_EQ(expath_model_evaluate(m, graph_, &a.p), EXPATH_OK);
  ASSERT_EQ(expath_model_evaluate(loaded, graph_, &b.p), EXPATH_OK);
  EXPECT_EQ(a.json(), b.json());

  Owned ex;
  ASSERT_EQ(expath_explain(graph_, loaded, R"({"targets": 2, "dot": true, "jobs": 1})", &ex.p), EXPATH_OK)
      << expath_last_error();
  const auto j = ex.json();
  EXPECT_EQ(j["explanations"].size(), j["dot"].size());

  Owned bad;
  EXPECT_EQ(expath_explain(graph_, loaded, R"({"predictions": [{"h": "zzz", "r": "r0", "t": "e0001"}]})",
                           &bad.p),
            EXPATH_ERR_LOOKUP);
  expath_model_free(m);
  expath_model_free(loaded);
}

TEST_F(CApi, RulesFuseReport) {
  Owned rules;
  ASSERT_EQ(expath_rules_evaluate(graph_, R"({"rules": ["r0 <- r1, r2"], "thresholds": {"min_supp": 5}})",
                                  &rules.p),
            EXPATH_OK)
      << expath_last_error();
  EXPECT_GT(rules.json()["rules"][0]["sc"].get<double>(), 0.5);

  const char* report = R"({"method": "m", "k": 1, "seed": 1, "per_target": false, "removed": [],
    "targets": [{"prediction": {"h": "a", "r": "r", "t": "b"}, "rr_before": 1.0, "rr_after": 0.5,
              "h1_before": 1.0, "h1_after": 0.0, "head_rank_before": 1, "tail_rank_before": 1,
              "head_rank_after": 2, "tail_rank_after": 2, "explanation": []}]})";
  Owned fused;
  ASSERT_EQ(expath_fuse(report, report, &fused.p), EXPATH_OK) << expath_last_error();
  EXPECT_DOUBLE_EQ(fused.json()["delta_mrr"].get<double>(), 0.5);

  const std::string list = std::string("[") + report + "]";
  Owned summary, table;
  ASSERT_EQ(expath_report(list.c_str(), &summary.p, &table.p), EXPATH_OK) << expath_last_error();
  EXPECT_NE(std::string(table.p).find("| m | 1 |"), std::string::npos);
  EXPECT_EQ(expath_report("{}", &summary.p, nullptr), EXPATH_ERR_INVALID_ARGUMENT);
}
