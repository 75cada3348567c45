#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/numfmt.hpp"
#include "shapnarr/prompt_forge.hpp"

namespace shapnarr {

enum class CriticVariant { rule, llm_summarized };

inline std::string_view to_string(CriticVariant v) { return v == CriticVariant::rule ? "rule" : "llm_summarized"; }

inline CriticVariant critic_variant_from(std::string_view s) {
  if (s == "rule") return CriticVariant::rule;
  if (s == "llm_summarized") return CriticVariant::llm_summarized;
  throw Error(ErrorCode::SchemaError, "unknown critic variant '" + std::string(s) + "'");
}

struct CriticFeedback {
  std::string body;
  CriticVariant variant = CriticVariant::rule;
  int instruction_count = 0;
  Warnings warnings;

  bool operator==(const CriticFeedback&) const = default;
};

// The instruction templates are frozen: the simlab reviser parses them back.
namespace critic_templates {

inline std::string sign_word(int sign) { return sign >= 0 ? "positive" : "negative"; }

inline std::string rank(std::string_view f, int k) {
  return "Move the description of feature '" + std::string(f) + "' so it is presented as the " + std::to_string(k + 1) +
         "-th most important feature (rank " + std::to_string(k) + " in the SHAP table).";
}

inline std::string sign(std::string_view f, int from, int to) {
  return "Change the stated influence of feature '" + std::string(f) + "' from " + sign_word(from) + " to " +
         sign_word(to) + ".";
}

inline std::string value(std::string_view f, double v) {
  return "Change the stated value of feature '" + std::string(f) + "' to " + format_number(v) + ".";
}

inline std::string missing(std::string_view f, int k, int sign, double v) {
  return "Add a description of feature '" + std::string(f) + "' (rank " + std::to_string(k) + ", " + sign_word(sign) +
         " influence, value " + format_number(v) + ").";
}

inline std::string unknown(std::string_view f) {
  return "Remove the description of feature '" + std::string(f) + "'; it is not in the SHAP table.";
}

inline std::string extra(std::string_view f, int n) {
  return "Remove the description of feature '" + std::string(f) + "'; it is not among the " + std::to_string(n) +
         " most important features in the SHAP table.";
}

}  // namespace critic_templates

inline CriticFeedback rule_critic(const FaithfulnessReport& report, const ShapTable& table, int n) {
  if (report.n != n)
    throw Error(ErrorCode::TableMismatch,
                "report built for n=" + std::to_string(report.n) + ", critic asked for n=" + std::to_string(n));
  const auto truth = ground_truth(table, n);
  if (report.features.size() != truth.size())
    throw Error(ErrorCode::TableMismatch, "report covers " + std::to_string(report.features.size()) +
                                              " features, table top-n has " + std::to_string(truth.size()));
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (report.features[i].feature_name != truth[i].feature_name)
      throw Error(ErrorCode::TableMismatch, "report feature '" + report.features[i].feature_name +
                                                "' does not match table rank " + std::to_string(i));
  for (const auto& x : report.extra_features)
    if (!table.find(x)) throw Error(ErrorCode::TableMismatch, "feature '" + x + "' is not in the table");

  CriticFeedback out;
  if (report.is_faithful()) {
    out.body = std::string(kFaithfulSentence);
    return out;
  }
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& f = report.features[i];
    const auto& t = truth[i];
    if (f.missing()) {
      lines.push_back(critic_templates::missing(t.feature_name, t.rank, t.sign, t.value));
      continue;
    }
    if (f.rank_error) lines.push_back(critic_templates::rank(t.feature_name, t.rank));
    if (f.sign_error) lines.push_back(critic_templates::sign(t.feature_name, f.extracted->sign, t.sign));
    if (f.value_error) lines.push_back(critic_templates::value(t.feature_name, t.value));
  }
  for (const auto& u : report.unknown_features) lines.push_back(critic_templates::unknown(u));
  for (const auto& x : report.extra_features) lines.push_back(critic_templates::extra(x, n));

  for (const auto& l : lines) out.body += (out.body.empty() ? "" : "\n") + l;
  out.instruction_count = static_cast<int>(lines.size());
  return out;
}

// Every feature the summary must still name.
inline std::vector<std::string> flagged_features(const FaithfulnessReport& report) {
  std::vector<std::string> out;
  for (const auto& f : report.features)
    if (f.any_error()) out.push_back(f.feature_name);
  out.insert(out.end(), report.unknown_features.begin(), report.unknown_features.end());
  out.insert(out.end(), report.extra_features.begin(), report.extra_features.end());
  return out;
}

inline CriticFeedback llm_critic(const FaithfulnessReport& report, const ShapTable& table, int n, Gateway& gateway,
                                 const AgentBinding& binding) {
  auto rule = rule_critic(report, table, n);
  if (report.is_faithful()) return rule;  // no call needed

  const auto prompt = build_critic_summary_prompt(rule.body);
  std::string summary;
  try {
    summary = gateway.complete(binding.request(PromptRole::critic_summary, prompt.body)).body;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyResponse) throw;
    rule.warnings.push_back({"CriticFallback", "summarizer returned nothing; using rule instructions"});
    return rule;
  }
  for (const auto& name : flagged_features(report)) {
    if (summary.find(name) == std::string::npos) {
      rule.warnings.push_back({"CriticFallback", "summary dropped feature '" + name + "'; using rule instructions"});
      return rule;
    }
  }
  CriticFeedback out;
  out.body = std::move(summary);
  out.variant = CriticVariant::llm_summarized;
  out.instruction_count = rule.instruction_count;
  return out;
}

inline nlohmann::json to_json(const CriticFeedback& c) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : c.warnings) w.push_back({{"code", x.code}, {"message", x.message}});
  return {{"body", c.body},
          {"variant", to_string(c.variant)},
          {"instruction_count", c.instruction_count},
          {"warnings", std::move(w)}};
}

inline CriticFeedback critic_feedback_from_json(const nlohmann::json& j) {
  CriticFeedback c;
  c.body = j.at("body").get<std::string>();
  c.variant = critic_variant_from(j.at("variant").get<std::string>());
  c.instruction_count = j.at("instruction_count").get<int>();
  if (j.contains("warnings"))
    for (const auto& w : j.at("warnings")) c.warnings.push_back({w.at("code"), w.at("message")});
  return c;
}

}  // namespace shapnarr
