#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace shapnarr;

namespace {

ExtractionRecord unknown_case() {
  return {{{"absences", 0, 1, 2.0, std::nullopt},
           {"age2", 1, 1, 17.0, std::nullopt},
           {"Walc", 2, -1, 3.0, std::nullopt},
           {"failures", 3, 1, 0.0, std::nullopt},
           {"goout", 4, 1, 7.0, std::nullopt}}};
}

bool has_warning(const Warnings& ws, const std::string& code) {
  for (const auto& w : ws)
    if (w.code == code) return true;
  return false;
}

}  // namespace

TEST(Evaluator, FaithfulGolden) {
  const auto t = testutil::student_table();
  const auto rep = compare(testutil::truth_extraction(t, 4), t, 4);
  EXPECT_TRUE(rep.is_faithful());
  EXPECT_EQ(rep.feedback_text, testutil::slurp("golden/feedback_faithful.txt"));
}

TEST(Evaluator, Figure2Golden) {
  const auto rep = compare(testutil::figure2_extraction(), testutil::student_table(), 4);
  EXPECT_FALSE(rep.is_faithful());
  EXPECT_EQ(rep.feedback_text, testutil::slurp("golden/feedback_figure2.txt"));
  EXPECT_EQ(rep.error_flag_count(), 4);
}

TEST(Evaluator, UnknownFeatureGolden) {
  const auto rep = compare(unknown_case(), testutil::student_table(), 4);
  EXPECT_EQ(rep.unknown_features, std::vector<std::string>{"age2"});
  EXPECT_EQ(rep.feedback_text, testutil::slurp("golden/feedback_unknown.txt"));
}

TEST(Evaluator, ExtraFeatureLine) {
  auto rec = testutil::truth_extraction(testutil::student_table(), 4);
  rec.entries.push_back({"famsup", 4, -1, 1.0, std::nullopt});
  const auto rep = compare(rec, testutil::student_table(), 4);
  EXPECT_EQ(rep.extra_features, std::vector<std::string>{"famsup"});
  EXPECT_EQ(rep.feedback_text, "Feature famsup is not among the 4 most important features in the SHAP table.");
  EXPECT_FALSE(rep.is_faithful());
}

TEST(Evaluator, MissingFeatureCountsRankSignWrongValueRight) {
  auto rec = testutil::truth_extraction(testutil::student_table(), 4);
  rec.entries.pop_back();
  const auto rep = compare(rec, testutil::student_table(), 4);
  ASSERT_TRUE(rep.features[3].missing());
  EXPECT_TRUE(rep.features[3].rank_error);
  EXPECT_TRUE(rep.features[3].sign_error);
  EXPECT_FALSE(rep.features[3].value_error);
  EXPECT_EQ(rep.missing_features, std::vector<std::string>{"failures"});
}

TEST(Evaluator, NullValueIsNotAnError) {
  auto rec = testutil::truth_extraction(testutil::student_table(), 4);
  rec.entries[1].value.reset();
  EXPECT_TRUE(compare(rec, testutil::student_table(), 4).is_faithful());
}

TEST(Evaluator, ValueTolerance) {
  auto rec = testutil::truth_extraction(testutil::student_table(), 4);
  *rec.entries[0].value += 0.01;
  EXPECT_FALSE(compare(rec, testutil::student_table(), 4).is_faithful());
  EXPECT_TRUE(compare(rec, testutil::student_table(), 4, 0.05).is_faithful());
}

TEST(Evaluator, ParsesFigure3Answer) {
  const auto parsed = parse_extraction(testutil::slurp("student/figure3_answer.txt"), testutil::student_info());
  EXPECT_TRUE(parsed.warnings.empty());
  ASSERT_EQ(parsed.record.entries.size(), 4u);
  auto rec = parsed.record;
  for (auto& e : rec.entries) e.assumption.reset();
  EXPECT_EQ(rec, testutil::figure2_extraction());
  EXPECT_EQ(parsed.record.entries[1].assumption, "Having no past failures means the student's record is strong.");
}

TEST(Evaluator, ParseCoercions) {
  const auto info = testutil::student_info();
  const auto p = parse_extraction(
      "{'goout': {'Rank:': '1', 'sign': '-1', 'value': 'N/A'}, 'absences': {'rank': 0.0, 'sign': 1.0, 'value': '2'}}",
      info);
  EXPECT_EQ(p.record.entries[0].feature_name, "goout");
  EXPECT_EQ(p.record.entries[0].rank, 1);
  EXPECT_FALSE(p.record.entries[0].value);
  EXPECT_EQ(p.record.entries[1].value, 2.0);
  auto code_of = [&](const std::string& s) {
    try {
      parse_extraction(s, info);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code_of("{'goout': {'rank': 1, 'sign': 0, 'value': 1}}"), ErrorCode::SignDomainError);
  EXPECT_EQ(code_of("{'goout': {'rank': 1.5, 'sign': 1, 'value': 1}}"), ErrorCode::ParseError);
  EXPECT_EQ(code_of("{'goout': {'rank': 1, 'sign': 1, 'value': 'many'}}"), ErrorCode::NonNumericValue);
  EXPECT_EQ(code_of("I cannot help with that."), ErrorCode::ParseError);
  EXPECT_EQ(code_of(""), ErrorCode::ParseError);
}

TEST(Evaluator, ParseWarnings) {
  const auto info = testutil::student_info();
  const auto p = parse_extraction(
      "{' goout ': {'rank': 0, 'sign': -1}, 'ghost': {'rank': 2, 'sign': 1, 'value': 1}, "
      "'Walc': {'rank': 3, 'sign': -1, 'value': 3}, 'ghost': {'rank': 9, 'sign': 1, 'value': 1}}",
      info);
  EXPECT_TRUE(has_warning(p.warnings, "NameTrimmed"));
  EXPECT_TRUE(has_warning(p.warnings, "UnknownFeatureName"));
  EXPECT_TRUE(has_warning(p.warnings, "MissingValueKey"));
  EXPECT_TRUE(has_warning(p.warnings, "DuplicateFeature"));
  EXPECT_TRUE(has_warning(p.warnings, "RankRepaired"));
  EXPECT_TRUE(ranks_are_sequential(p.record));
  EXPECT_EQ(p.record.entries[1].feature_name, "ghost");
  EXPECT_EQ(p.record.entries[2].rank, 2);
}

TEST(Evaluator, RankRepairKeepsListedOrder) {
  ExtractionRecord r{{{"a", 0, 1, {}, {}}, {"b", 2, 1, {}, {}}, {"c", 3, 1, {}, {}}, {"d", 4, 1, {}, {}}}};
  EXPECT_TRUE(reindex_ranks(r));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(r.entries[i].rank, i);
  EXPECT_EQ(r.entries[3].feature_name, "d");
  EXPECT_FALSE(reindex_ranks(r));
}

TEST(Evaluator, PythonLiteralRoundTrip) {
  auto rec = testutil::figure2_extraction();
  rec.entries[0].assumption = "it's fine";
  rec.entries[2].value.reset();
  EXPECT_EQ(parse_extraction(to_python_literal(rec), testutil::student_info()).record, rec);
}

TEST(Evaluator, JsonRoundTrip) {
  const auto rep = compare(unknown_case(), testutil::student_table(), 4);
  EXPECT_EQ(faithfulness_report_from_json(to_json(rep)), rep);
  const auto rec = unknown_case();
  EXPECT_EQ(extraction_record_from_json(to_json(rec)), rec);
}

TEST(Evaluator, ReasksOnceThenFails) {
  Gateway g;
  g.register_model("ev", make_scripted_provider({{PromptRole::evaluator, "i", {"garbage", "more garbage"}}}));
  AgentBinding b{"ev", "r", "i"};
  const auto a = extract("narrative", testutil::student_info(), g, b);
  EXPECT_FALSE(a.record);
  ASSERT_TRUE(a.failure);
  EXPECT_EQ(a.failure->rfind("EvaluatorFailure: ", 0), 0u);
  EXPECT_EQ(a.raw_answers.size(), 2u);
  EXPECT_EQ(a.usage.calls, 2);
}

TEST(Evaluator, ReaskRecovers) {
  Gateway g;
  g.register_model("ev", make_scripted_provider({{PromptRole::evaluator, "i",
                                                  {"garbage", to_python_literal(testutil::figure2_extraction())}}}));
  const auto ev = evaluate("narrative", testutil::student_table(), testutil::student_info(), g, {"ev", "r", "i"}, 4);
  ASSERT_TRUE(ev.report);
  EXPECT_EQ(ev.report->feedback_text, testutil::slurp("golden/feedback_figure2.txt"));
  EXPECT_TRUE(has_warning(ev.attempt.warnings, "EvaluatorReask"));
}
