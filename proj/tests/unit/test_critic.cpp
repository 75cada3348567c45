#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace shapnarr;

TEST(Critic, Figure4Golden) {
  const auto t = testutil::student_table();
  const auto rep = compare(testutil::figure2_extraction(), t, 4);
  const auto c = rule_critic(rep, t, 4);
  EXPECT_EQ(c.body, testutil::slurp("golden/critic_figure4.txt"));
  EXPECT_EQ(c.instruction_count, 4);
  EXPECT_EQ(c.variant, CriticVariant::rule);
}

TEST(Critic, FaithfulPassesThrough) {
  const auto t = testutil::student_table();
  const auto c = rule_critic(compare(testutil::truth_extraction(t, 4), t, 4), t, 4);
  EXPECT_EQ(c.body, std::string(kFaithfulSentence));
  EXPECT_EQ(c.instruction_count, 0);
}

TEST(Critic, MissingUnknownExtra) {
  const auto t = testutil::student_table();
  auto rec = testutil::truth_extraction(t, 4);
  rec.entries.erase(rec.entries.begin() + 1);  // goout
  rec.entries.push_back({"age2", 3, 1, 1.0, {}});
  rec.entries.push_back({"famsup", 4, -1, 1.0, {}});
  const auto c = rule_critic(compare(rec, t, 4), t, 4);
  EXPECT_EQ(c.body,
            "Add a description of feature 'goout' (rank 1, negative influence, value 4).\n"
            "Remove the description of feature 'age2'; it is not in the SHAP table.\n"
            "Remove the description of feature 'famsup'; it is not among the 4 most important features in the SHAP "
            "table.");
}

TEST(Critic, TableMismatch) {
  const auto t = testutil::student_table();
  const auto rep = compare(testutil::figure2_extraction(), t, 4);
  try {
    rule_critic(rep, t, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TableMismatch);
  }
  auto other = t;
  std::swap(other.rows[0].feature_name, other.rows[1].feature_name);
  EXPECT_THROW(rule_critic(rep, other, 4), Error);
}

namespace {

struct CriticFixture {
  ShapTable t = testutil::student_table();
  FaithfulnessReport rep = compare(testutil::figure2_extraction(), t, 4);
  Gateway g;
  AgentBinding b{"cr", "r", "i"};
};

}  // namespace

TEST(Critic, LlmSummaryAccepted) {
  CriticFixture f;
  const std::string summary = "Fix goout (rank, value), Walc (sign) and failures (rank).";
  f.g.register_model("cr", make_scripted_provider({{PromptRole::critic_summary, "i", {summary}}}));
  const auto c = llm_critic(f.rep, f.t, 4, f.g, f.b);
  EXPECT_EQ(c.body, summary);
  EXPECT_EQ(c.variant, CriticVariant::llm_summarized);
  EXPECT_TRUE(c.warnings.empty());
}

TEST(Critic, LlmSummaryDroppingFeatureFallsBack) {
  CriticFixture f;
  f.g.register_model("cr", make_scripted_provider({{PromptRole::critic_summary, "i", {"Fix goout and Walc."}}}));
  const auto c = llm_critic(f.rep, f.t, 4, f.g, f.b);
  EXPECT_EQ(c.body, testutil::slurp("golden/critic_figure4.txt"));
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_EQ(c.warnings[0].code, "CriticFallback");
}

TEST(Critic, LlmEmptyFallsBack) {
  CriticFixture f;
  f.g.register_model("cr", std::make_shared<FunctionProvider>("f", [](const ChatRequest&) { return std::string(); }));
  const auto c = llm_critic(f.rep, f.t, 4, f.g, f.b);
  EXPECT_EQ(c.variant, CriticVariant::rule);
  EXPECT_EQ(c.warnings.at(0).code, "CriticFallback");
}

TEST(Critic, FaithfulSkipsCall) {
  CriticFixture f;
  f.g.register_model("cr", make_scripted_provider({}));
  const auto rep = compare(testutil::truth_extraction(f.t, 4), f.t, 4);
  EXPECT_EQ(llm_critic(rep, f.t, 4, f.g, f.b).body, std::string(kFaithfulSentence));
  EXPECT_EQ(f.g.ledger().total_usage().calls, 0);
}

TEST(Critic, JsonRoundTrip) {
  CriticFixture f;
  auto c = rule_critic(f.rep, f.t, 4);
  c.warnings.push_back({"CriticFallback", "x"});
  EXPECT_EQ(critic_feedback_from_json(to_json(c)), c);
}
