#include <gtest/gtest.h>

#include <random>

#include "sim_util.hpp"

using namespace shapnarr;

namespace {

FaithfulnessReport check(const std::string& narrative, const ShapTable& t, int n = 4) {
  return compare(oracle_extract(narrative), t, n);
}

std::string revise(const std::string& narrative, const std::string& feedback, ReviserPolicy p, const ShapTable* truth,
                   std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  return mock_reviser(narrative, feedback, p, rng, truth).narrative;
}

}  // namespace

TEST(Simlab, CleanNarrativeIsFaithful) {
  const auto t = testutil::student_table();
  const auto text = render_templated_narrative(t, 4);
  EXPECT_EQ(oracle_extract(text), testutil::truth_extraction(t, 4));
  EXPECT_TRUE(check(text, t).is_faithful());
  EXPECT_NE(text.find("The second most important feature is \"goout\", with a value of 4, which decreases"),
            std::string::npos);
}

TEST(Simlab, PlanInjectsExactlyTheFaults) {
  const auto t = testutil::student_table();
  FaultPlan p;
  p.rank_swaps = {{1, 3}};
  p.sign_flips = {"Walc"};
  p.value_perturbations = {{"goout", 1.0}};
  const auto rep = check(render_templated_narrative(t, 4, p), t);
  EXPECT_EQ(rep.feedback_text, testutil::slurp("golden/feedback_figure2.txt"));
}

TEST(Simlab, PlanErrors) {
  const auto t = testutil::student_table();
  auto code_of = [&](const FaultPlan& p) {
    try {
      render_templated_narrative(t, 4, p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  FaultPlan a;
  a.sign_flips = {"nope"};
  EXPECT_EQ(code_of(a), ErrorCode::UnknownFeature);
  FaultPlan b;
  b.sign_flips = {"famsup"};
  EXPECT_EQ(code_of(b), ErrorCode::InvalidPlan);
  FaultPlan c;
  c.rank_swaps = {{2, 2}};
  EXPECT_EQ(code_of(c), ErrorCode::InvalidPlan);
  FaultPlan d;
  d.value_perturbations = {{"goout", 0.0}};
  EXPECT_EQ(code_of(d), ErrorCode::InvalidPlan);
  EXPECT_THROW(fault_plan_from_json(nlohmann::json::parse(R"({"instance_id":"x","rank_swaps":[[1]]})")), Error);
}

TEST(Simlab, PlanJsonRoundTrip) {
  FaultPlan p;
  p.instance_id = "x";
  p.rank_swaps = {{0, 2}};
  p.sign_flips = {"a"};
  p.value_perturbations = {{"b", -1.5}};
  p.seed = 9;
  EXPECT_EQ(fault_plan_from_json(to_json(p)), p);
}

TEST(Simlab, OrdinalsRoundTrip) {
  for (int i = 0; i < 30; ++i) EXPECT_EQ(ordinal_position(ordinal_phrase(i)), i);
  EXPECT_FALSE(ordinal_position("3th most important"));
}

TEST(Simlab, NotTemplated) {
  try {
    oracle_extract("A free-form story about the student.");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotTemplated);
  }
}

TEST(Simlab, CompliantReviserClosesRuleCriticFeedback) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto t = synthetic_table("synth", "x", 8, rng);
    const auto plan = random_fault_plan(t, 4, rng());
    const auto text = render_templated_narrative(t, 4, plan);
    const auto rep = check(text, t);
    ASSERT_FALSE(rep.is_faithful()) << i;
    const auto critic = rule_critic(rep, t, 4);
    EXPECT_TRUE(check(revise(text, critic.body, ReviserPolicy::compliant(), nullptr), t).is_faithful()) << i;
    // the evaluator's own lines suffice when the reviser can see the table
    EXPECT_TRUE(check(revise(text, rep.feedback_text, ReviserPolicy::compliant(), &t), t).is_faithful()) << i;
  }
}

TEST(Simlab, ReviserAddsAndRemoves) {
  const auto t = testutil::student_table();
  auto tn = parse_templated(render_templated_narrative(t, 4));
  tn.claims.erase(tn.claims.begin() + 1);                  // drop goout
  tn.claims.push_back({"famsup", -1, 1.0});                // extra
  tn.claims.insert(tn.claims.begin(), Claim{"age2", 1, 3});  // unknown
  const auto text = render(tn);
  const auto rep = check(text, t);
  EXPECT_EQ(rep.missing_features, std::vector<std::string>{"goout"});
  EXPECT_EQ(rep.unknown_features, std::vector<std::string>{"age2"});
  EXPECT_EQ(rep.extra_features, std::vector<std::string>{"famsup"});
  EXPECT_TRUE(check(revise(text, rule_critic(rep, t, 4).body, ReviserPolicy::compliant(), nullptr), t).is_faithful());
  EXPECT_TRUE(check(revise(text, rep.feedback_text, ReviserPolicy::compliant(), &t), t).is_faithful());
}

TEST(Simlab, StubbornAndPartialExtremes) {
  const auto t = testutil::student_table();
  FaultPlan p;
  p.rank_swaps = {{0, 3}};
  p.sign_flips = {"goout"};
  const auto text = render_templated_narrative(t, 4, p);
  const auto fb = rule_critic(check(text, t), t, 4).body;
  EXPECT_EQ(revise(text, fb, ReviserPolicy::stubborn(), nullptr), text);
  EXPECT_EQ(revise(text, fb, ReviserPolicy::partial(0.0), nullptr), text);
  EXPECT_EQ(revise(text, fb, ReviserPolicy::partial(1.0), nullptr), revise(text, fb, ReviserPolicy::compliant(), nullptr));
  EXPECT_THROW(ReviserPolicy::partial(1.5), Error);
}

TEST(Simlab, PartialNeverAddsErrors) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const auto t = synthetic_table("synth", "x", 8, rng);
    const auto text = render_templated_narrative(t, 4, random_fault_plan(t, 4, rng()));
    const auto rep = check(text, t);
    const auto after = check(revise(text, rule_critic(rep, t, 4).body, ReviserPolicy::partial(0.5), nullptr, rng()), t);
    std::vector<FaithfulnessReport> a{rep}, b{after};
    EXPECT_LE(accuracy(a, Field::sign, 4), accuracy(b, Field::sign, 4));
    EXPECT_LE(accuracy(a, Field::value, 4), accuracy(b, Field::value, 4));
  }
}

TEST(Simlab, UnparseableInstructionWarns) {
  const auto parsed = parse_instructions("Please rewrite everything.");
  EXPECT_TRUE(parsed.instructions.empty());
  ASSERT_EQ(parsed.warnings.size(), 1u);
  EXPECT_EQ(parsed.warnings[0].code, "UnparseableInstruction");
}

TEST(Simlab, ProviderPlaysEveryRole) {
  const auto t = testutil::student_table();
  const auto info = testutil::student_info();
  auto g = simutil::simlab_gateway(ReviserPolicy::compliant());
  AgentBinding b{"sim", "r", t.instance_id};
  const auto base = build_base_prompt(t, info, default_generation_rules(4));
  const auto generated = g->complete(b.request(PromptRole::narrator, base.body)).body;
  EXPECT_TRUE(check(generated, t).is_faithful());

  FaultPlan p;
  p.rank_swaps = {{1, 3}};
  const auto faulty = render_templated_narrative(t, 4, p);
  const auto ev = evaluate(faulty, t, info, *g, b, 4);
  ASSERT_TRUE(ev.report);
  EXPECT_FALSE(ev.report->is_faithful());
  const auto revised = g->complete(b.request(PromptRole::narrator, build_revision_prompt(base, faulty, ev.report->feedback_text).body)).body;
  EXPECT_TRUE(check(revised, t).is_faithful());
  EXPECT_EQ(critique(faulty, *g, b).feedback->verdict, CoherenceVerdict::no_issue);
  const auto summary = llm_critic(*ev.report, t, 4, *g, b);
  EXPECT_EQ(summary.variant, CriticVariant::llm_summarized);
  EXPECT_EQ(summary.body, rule_critic(*ev.report, t, 4).body);
}

TEST(Simlab, SyntheticCorpusShape) {
  const auto a = synthetic_corpus(100, 30, 8, 4, 42);
  const auto b = synthetic_corpus(100, 30, 8, 4, 42);
  ASSERT_EQ(a.tables.size(), 100u);
  int faulty = 0;
  for (std::size_t i = 0; i < a.tables.size(); ++i) {
    faulty += !a.plans[i].empty();
    EXPECT_EQ(a.tables[i], b.tables[i]);
    EXPECT_EQ(a.plans[i], b.plans[i]);
    EXPECT_NO_THROW(validate_rows(a.tables[i]));
    EXPECT_TRUE(rows_sorted(a.tables[i]));
    EXPECT_EQ(check(render_templated_narrative(a.tables[i], 4, a.plans[i]), a.tables[i]).is_faithful(), a.plans[i].empty());
  }
  EXPECT_EQ(faulty, 30);
  EXPECT_EQ(a.tables[7].instance_id, "synth-0007");
  EXPECT_THROW(synthetic_corpus(10, 11, 8, 4, 1), Error);
}
