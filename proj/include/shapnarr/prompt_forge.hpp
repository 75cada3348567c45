#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shapnarr/core_model.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/numfmt.hpp"

namespace shapnarr {

enum class PromptRole { narrator, evaluator, critic_summary, coherence };

inline std::string_view to_string(PromptRole r) {
  switch (r) {
    case PromptRole::narrator: return "narrator";
    case PromptRole::evaluator: return "evaluator";
    case PromptRole::critic_summary: return "critic_summary";
    case PromptRole::coherence: return "coherence";
  }
  return "?";
}

inline PromptRole prompt_role_from(std::string_view s) {
  if (s == "narrator") return PromptRole::narrator;
  if (s == "evaluator") return PromptRole::evaluator;
  if (s == "critic_summary" || s == "critic") return PromptRole::critic_summary;
  if (s == "coherence") return PromptRole::coherence;
  throw Error(ErrorCode::ConfigError, "unknown role '" + std::string(s) + "'");
}

struct PromptText {
  PromptRole role_tag = PromptRole::narrator;
  std::string body;
  Warnings warnings;
};

struct GenerationRules {
  int max_sentences = 10;
  int n_features = 4;
  int shap_precision = 3;
  std::vector<std::string> format_rules;
  std::vector<std::string> content_rules;
};

inline GenerationRules default_generation_rules(int n_features = 4, int max_sentences = 10) {
  GenerationRules r;
  r.n_features = n_features;
  r.max_sentences = std::max(max_sentences, n_features + 2);
  r.format_rules = {
      "The narrative must contain at most " + std::to_string(r.max_sentences) + " sentences.",
      "Start the narrative with one sentence that clearly states the prediction and its probability.",
      "Then explain the " + std::to_string(n_features) +
          " most important features one at a time, in the order in which they appear in the SHAP table.",
      "End the narrative with a one-sentence summary.",
      "Write plain prose: no headers, no bullet points, no tables.",
  };
  r.content_rules = {
      "Use the exact feature names as they appear in the SHAP table.",
      "State the value of each discussed feature exactly as given in the SHAP table.",
      "For each feature, say whether it increases or decreases the predicted probability of class 1, "
      "following the sign of its SHAP value.",
      "Make the importance order explicit, for example 'the most important', 'the second most important'.",
      "Do not mention the SHAP values themselves.",
  };
  return r;
}

inline void validate(const GenerationRules& r) {
  if (r.max_sentences < 3) throw Error(ErrorCode::InvalidPrompt, "max_sentences must be at least 3");
  if (r.n_features < 1) throw Error(ErrorCode::InvalidPrompt, "n_features must be at least 1");
  if (r.shap_precision < 0 || r.shap_precision > 12)
    throw Error(ErrorCode::InvalidPrompt, "shap_precision out of range");
}

namespace templates {

inline constexpr std::string_view kVersion = "shapnarr-prompts/1";
inline constexpr std::string_view kDelimiter = "====================";

inline constexpr std::string_view kBase =
    R"(Explanation goal:
{goal}

Summary SHAP methodology:
{shap_summary}

Dataset context:
Dataset description: {dataset_description}
Target description: {target_description}
Task description: {task_description}

SHAP table:
{shap_table}

Result string:
{result_string}

Format related rules:
{format_rules}

Content related rules:
{content_rules})";

inline constexpr std::string_view kGoal =
    "You write a short narrative that explains to a non-expert why a machine learning classifier made its "
    "prediction for one particular instance. The explanation must be based on the SHAP table below.";

inline constexpr std::string_view kShapSummary =
    "SHAP (SHapley Additive exPlanations) assigns every feature a contribution to this single prediction. "
    "A positive SHAP value pushes the prediction towards class 1 and a negative value pushes it away from "
    "class 1. The absolute SHAP value measures how important the feature was: the table is sorted by "
    "absolute SHAP value, so the first row is the most important feature. The table also lists the "
    "feature value of this instance and the average value of the feature over the dataset.";

inline constexpr std::string_view kResultString = "The model predicts class 1 with a probability of {probability}.";

inline constexpr std::string_view kRevision =
    R"(Context:
You are a helpful agent who writes model explanations (narratives) based on SHAP values.
Revise your previous narrative strictly according to the initial task and all given feedback.
This is your initial task: {initial_prompt}.

Input text:
The following is the feedback.
====================
This is your previous answer:{last_narrative}.
This is the faithfulness-issue feedback:{faithful_feedback}.
{coherence_section}====================

Output Structure:
The narrative MUST comply with all format related rules and content related rules from the initial task.

Guidelines:
1) Do not modify the part of the narrative that isn't mentioned in the feedback.
2) You MUST return the narrative only. DO NOT chitchat.)";

inline constexpr std::string_view kCoherenceSection = "This is the coherence-issue feedback:{coherence_feedback}.\n";

inline constexpr std::string_view kExtraction =
    R"(Context:
An LLM was used to create a narrative to explain and interpret a prediction made by another smaller classifier model.
The LLM was given an explanation of the classifier task, the training data, and provided with the exact names of all the features and their meaning.
Most importantly, the LLM was provided with a table that contains the feature values of that particular instance, the average feature values and their SHAP values which are a numeric measure of their importance.

You are an helpful agent tasked with improving the narrative.
To do so, you should extract some information about all the features that were mentioned in the narrative that will be given below.

Here is some general info for you:
Dataset description: {dataset_description}.
Target description: {target_description}.
Task description: {task_description}.
Feature descriptions: {feature_descriptions}.

Input text:
The following is the given narrative.
====================
{narrative}
====================

Output Structure:
Provide your answer as a python dictionary with the keys as the feature names.
The values corresponding to the feature name keys are dictionaries themselves that contain the following inner keys:
1) "rank:" indicating the order of absolute importance of the feature starting from 0.
2) "sign": the sign of whether the feature contributed towards target value 1 or against it (either +1 or -1 for sign value).
3) "value": if the value of the feature is mentioned in a way that you can put an exact number on, add it. Only return numeric values here.
If the description of the value is qualitative such as "many" or "often" and not mentioning an exact value, return "None" for its value.
4) "assumption": give a short but complete 1 sentence summary of what the assumption is in the story for this feature.
Provide this assumption as a general statement that could be fact checked later and that does not require this narrative as context.
If no reason or suggestion is made in the story do not make something up and just return string 'None'.

Guidelines:
1) Make sure that both the "rank", "sign", "value" and "assumption" keys and their values are always present in the inner dictionaries.
2) Make sure that the "rank" key is sorted from 0 to an increasing value in the dictionary. The first element cannot have any other rank than 0.
3) Make sure to use the exact names of the features as provided in the Feature descriptions, including capitalization.
4) Just provide the python dictionary as a string and add nothing else to the answer.)";

inline constexpr std::string_view kCriticSummary =
    R"(Context:
You are a critic tasked with providing instructions on how to improve a narrative.
To do so, you are given feedback on the narrative, and you should summarize it clearly and concisely.

Input text:
The following is the feedback.
====================
{combined_feedback}
====================

Output Structure:
Free format (no strict structure required).

Guidelines:
When you summarize, make sure to include all feedback; do not lose any information from the feedback provided.)";

inline constexpr std::string_view kCoherence =
    R"(Context:
You are a critic tasked with providing revision instructions to improve the coherence quality of the given narrative.
You should first examine if coherence-related issues exist in the given narrative and then output revision instructions.

Definition of coherence:
Coherence refers to the overall quality of how sentences work together in a text. A coherent text is well-structured, logically organized, and builds a unified body of information on its topic.
It should present information that flows smoothly, avoiding abrupt transitions or disjoint statements.

Input text:
The following is the given narrative.
====================
{narrative}
====================

Output Structure:
Your output MUST include:
1) Explicit revision commands written in a clear, standardized format, such as: "Change ___ to ___", "Insert ___ before ___", "Delete ___", "Reorder ___ after ___", etc.
2) A concise explanation following each command that briefly justifies the change.

Guidelines:
1) If there are no coherence issues, reply only: no coherence issue.
2) Focus on meaningful coherence improvements. Avoid nitpicking or unnecessary edits.)";

}  // namespace templates

using TemplateValues = std::vector<std::pair<std::string_view, std::string>>;

// Single pass over the template: substituted text is never rescanned, so braces
// inside values are inert. Unknown placeholders are a programming error.
inline std::string render_template(std::string_view tpl, const TemplateValues& values) {
  std::string out;
  out.reserve(tpl.size() * 2);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tpl.substr(i + 1, close - i - 1);
        const bool identifier = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || c == '_';
        });
        if (identifier) {
          auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
          if (it == values.end())
            throw Error(ErrorCode::InvalidPrompt, "no value for placeholder {" + std::string(name) + "}");
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

// User content must not forge the "====" section delimiters.
inline std::string normalize_delimiters(std::string_view text) {
  static constexpr std::string_view kRun = "====";
  static constexpr std::string_view kReplacement = "\xE2\x89\xA1\xE2\x89\xA1\xE2\x89\xA1\xE2\x89\xA1";  // ≡≡≡≡
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kRun.size(), kRun) == 0) {
      out += kReplacement;
      i += kRun.size();
    } else {
      out += text[i++];
    }
  }
  return out;
}

namespace detail {

inline std::string table_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|')
      out += "\xC2\xA6";  // ¦
    else if (c == '\n' || c == '\r')
      out += ' ';
    else
      out += c;
  }
  return normalize_delimiters(out);
}

inline std::string bullet_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += "- " + normalize_delimiters(items[i]);
  }
  return out;
}

}  // namespace detail

inline constexpr std::string_view kTableHeader = "Feature | SHAP | Feat.val. | Feat.avg. | Feat.desc.";

// Top-`rows` lines of the SHAP table as a pipe grid.
inline std::string render_shap_table(const ShapTable& table, const DatasetInfo& info, int rows, int shap_precision) {
  std::string out(kTableHeader);
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(rows), table.rows.size());
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = table.rows[i];
    const auto* desc = info.description_of(r.feature_name);
    out += '\n';
    out += detail::table_cell(r.feature_name) + " | " + format_fixed(r.shap_value, shap_precision) + " | " +
           format_number(r.feature_value) + " | " + format_number(r.feature_average) + " | " +
           detail::table_cell(desc ? *desc : r.feature_description);
  }
  return out;
}

inline PromptText build_base_prompt(const ShapTable& table, const DatasetInfo& info, const GenerationRules& rules) {
  validate(rules);
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(rules.n_features), table.rows.size());
  for (std::size_t i = 0; i < count; ++i)
    if (!info.description_of(table.rows[i].feature_name))
      throw Error(ErrorCode::MissingDescription,
                  "feature '" + table.rows[i].feature_name + "' has no description in the dataset info");
  PromptText p;
  p.role_tag = PromptRole::narrator;
  if (static_cast<std::size_t>(rules.n_features) > table.rows.size())
    p.warnings.push_back({"FewerRowsThanFeatures", "table has fewer rows than n_features"});
  p.body = render_template(
      templates::kBase,
      {{"goal", std::string(templates::kGoal)},
       {"shap_summary", std::string(templates::kShapSummary)},
       {"dataset_description", normalize_delimiters(info.dataset_description)},
       {"target_description", normalize_delimiters(info.target_description)},
       {"task_description", normalize_delimiters(info.task_description)},
       {"shap_table", render_shap_table(table, info, rules.n_features, rules.shap_precision)},
       {"result_string",
        render_template(templates::kResultString, {{"probability", format_number(table.probability_class1)}})},
       {"format_rules", detail::bullet_list(rules.format_rules)},
       {"content_rules", detail::bullet_list(rules.content_rules)}});
  return p;
}

inline PromptText build_revision_prompt(const PromptText& base, std::string_view last_narrative,
                                        std::string_view faithful_feedback,
                                        const std::optional<std::string>& coherence_feedback = std::nullopt) {
  if (base.role_tag != PromptRole::narrator)
    throw Error(ErrorCode::InvalidPrompt, "revision prompt requires a narrator base prompt");
  std::string coherence_section;
  if (coherence_feedback)
    coherence_section =
        render_template(templates::kCoherenceSection, {{"coherence_feedback", normalize_delimiters(*coherence_feedback)}});
  PromptText p;
  p.role_tag = PromptRole::narrator;
  p.body = render_template(templates::kRevision, {{"initial_prompt", base.body},
                                                  {"last_narrative", normalize_delimiters(last_narrative)},
                                                  {"faithful_feedback", normalize_delimiters(faithful_feedback)},
                                                  {"coherence_section", std::move(coherence_section)}});
  return p;
}

// pandas-like two-column rendering of the feature descriptions.
inline std::string render_feature_descriptions(const DatasetInfo& info) {
  if (info.feature_descriptions.empty()) return {};
  std::size_t width = std::string_view("feature_name").size();
  for (const auto& [n, d] : info.feature_descriptions) width = std::max(width, n.size());
  auto pad = [&](std::string_view s) { return std::string(s) + std::string(width - s.size() + 2, ' '); };
  std::string out = pad("feature_name") + "feature_desc";
  for (const auto& [n, d] : info.feature_descriptions) out += "\n" + pad(n) + d;
  return normalize_delimiters(out);
}

inline PromptText build_extraction_prompt(std::string_view narrative, const DatasetInfo& info) {
  if (trim(narrative).empty()) throw Error(ErrorCode::EmptyNarrative, "cannot build an extraction prompt for an empty narrative");
  PromptText p;
  p.role_tag = PromptRole::evaluator;
  if (info.feature_descriptions.empty())
    p.warnings.push_back({"EmptyFeatureDescriptions", "dataset info has no feature descriptions"});
  p.body = render_template(templates::kExtraction,
                           {{"dataset_description", normalize_delimiters(info.dataset_description)},
                            {"target_description", normalize_delimiters(info.target_description)},
                            {"task_description", normalize_delimiters(info.task_description)},
                            {"feature_descriptions", render_feature_descriptions(info)},
                            {"narrative", normalize_delimiters(narrative)}});
  return p;
}

inline PromptText build_critic_summary_prompt(std::string_view combined_feedback) {
  if (trim(combined_feedback).empty()) throw Error(ErrorCode::EmptyFeedback, "nothing to summarize");
  PromptText p;
  p.role_tag = PromptRole::critic_summary;
  p.body = render_template(templates::kCriticSummary, {{"combined_feedback", normalize_delimiters(combined_feedback)}});
  return p;
}

inline PromptText build_coherence_prompt(std::string_view narrative) {
  if (trim(narrative).empty()) throw Error(ErrorCode::EmptyNarrative, "cannot critique an empty narrative");
  PromptText p;
  p.role_tag = PromptRole::coherence;
  p.body = render_template(templates::kCoherence, {{"narrative", normalize_delimiters(narrative)}});
  return p;
}

inline const std::vector<std::string_view>& mandatory_sections(PromptRole role) {
  static const std::vector<std::string_view> narrator = {
      "Explanation goal:", "Summary SHAP methodology:", "Dataset context:",       "SHAP table:",
      "Result string:",    "Format related rules:",     "Content related rules:"};
  static const std::vector<std::string_view> evaluator = {"Context:",          "Dataset description:",
                                                          "Feature descriptions:", "Input text:",
                                                          "Output Structure:", "Guidelines:"};
  static const std::vector<std::string_view> critic = {"Context:", "Input text:", "Output Structure:", "Guidelines:"};
  static const std::vector<std::string_view> coherence = {"Context:", "Definition of coherence:", "Input text:",
                                                          "Output Structure:", "Guidelines:"};
  switch (role) {
    case PromptRole::narrator: return narrator;
    case PromptRole::evaluator: return evaluator;
    case PromptRole::critic_summary: return critic;
    case PromptRole::coherence: return coherence;
  }
  return narrator;
}

inline bool has_mandatory_sections(const PromptText& p) {
  std::size_t from = 0;
  for (auto marker : mandatory_sections(p.role_tag)) {
    const auto at = p.body.find(marker, from);
    if (at == std::string::npos) return false;
    from = at + marker.size();
  }
  return true;
}

// ---- readers: recover structured content from rendered prompts ----

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

inline std::vector<std::string> split_cells(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto bar = line.find(" | ", start);
    if (bar == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, bar - start));
    start = bar + 3;
  }
  return cells;
}

}  // namespace detail

// Inverse of render_shap_table. Numbers come back at printed precision.
inline std::vector<FeatureRow> parse_rendered_table(std::string_view text) {
  const auto head = text.find(kTableHeader);
  if (head == std::string_view::npos) throw Error(ErrorCode::InvalidPrompt, "no SHAP table header found");
  std::vector<FeatureRow> rows;
  auto lines = detail::split_lines(text.substr(head + kTableHeader.size()));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) break;
    auto cells = detail::split_cells(lines[i]);
    if (cells.size() != 5) break;
    auto shap = parse_number(cells[1]);
    auto val = parse_number(cells[2]);
    auto avg = parse_number(cells[3]);
    if (!shap || !val || !avg) throw Error(ErrorCode::InvalidPrompt, "malformed SHAP table row: " + std::string(lines[i]));
    rows.push_back({cells[0], *shap, *val, *avg, cells[4]});
  }
  return rows;
}

inline std::optional<double> parse_result_probability(std::string_view text) {
  static constexpr std::string_view kLead = "The model predicts class 1 with a probability of ";
  const auto at = text.find(kLead);
  if (at == std::string_view::npos) return std::nullopt;
  auto rest = text.substr(at + kLead.size());
  const auto nl = rest.find('\n');
  rest = rest.substr(0, nl);
  if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
  return parse_number(rest);
}

struct RevisionParts {
  std::string initial_prompt;
  std::string last_narrative;
  std::string faithful_feedback;
  std::optional<std::string> coherence_feedback;
};

// Inverse of build_revision_prompt (for mock narrators and audits).
inline std::optional<RevisionParts> split_revision_prompt(std::string_view body) {
  static constexpr std::string_view kTask = "This is your initial task: ";
  static constexpr std::string_view kPrev = "This is your previous answer:";
  static constexpr std::string_view kFaith = ".\nThis is the faithfulness-issue feedback:";
  static constexpr std::string_view kCoh = ".\nThis is the coherence-issue feedback:";
  static constexpr std::string_view kInput = ".\n\nInput text:\nThe following is the feedback.\n====================\n";
  static constexpr std::string_view kClose = ".\n====================\n\nOutput Structure:";

  const auto task = body.find(kTask);
  const auto input = body.rfind(kInput);
  if (task == std::string_view::npos || input == std::string_view::npos || input < task) return std::nullopt;
  RevisionParts parts;
  parts.initial_prompt = std::string(body.substr(task + kTask.size(), input - task - kTask.size()));

  const auto block_start = input + kInput.size();
  const auto close = body.rfind(kClose);
  if (close == std::string_view::npos || close < block_start) return std::nullopt;
  auto block = body.substr(block_start, close - block_start);
  if (block.substr(0, kPrev.size()) != kPrev) return std::nullopt;
  block.remove_prefix(kPrev.size());
  const auto faith = block.find(kFaith);
  if (faith == std::string_view::npos) return std::nullopt;
  parts.last_narrative = std::string(block.substr(0, faith));
  auto rest = block.substr(faith + kFaith.size());
  const auto coh = rest.rfind(kCoh);
  if (coh != std::string_view::npos) {
    parts.faithful_feedback = std::string(rest.substr(0, coh));
    parts.coherence_feedback = std::string(rest.substr(coh + kCoh.size()));
  } else {
    parts.faithful_feedback = std::string(rest);
  }
  return parts;
}

// Narrative between the delimiter lines of an extraction or coherence prompt.
inline std::optional<std::string> delimited_payload(std::string_view body) {
  const std::string open = std::string(templates::kDelimiter) + "\n";
  const std::string close = "\n" + std::string(templates::kDelimiter);
  const auto a = body.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const auto start = a + open.size();
  const auto b = body.find(close, start);
  if (b == std::string_view::npos) return std::nullopt;
  return std::string(body.substr(start, b - start));
}

}  // namespace shapnarr
