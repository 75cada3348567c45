#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/numfmt.hpp"
#include "shapnarr/prompt_forge.hpp"
#include "shapnarr/pyliteral.hpp"

namespace shapnarr {

inline constexpr std::string_view kFaithfulSentence = "After checking, the narrative is 100% faithful to the SHAP table.";

struct ExtractionEntry {
  std::string feature_name;
  int rank = 0;
  int sign = 1;
  std::optional<double> value;  // nullopt: the narrative gives no exact number
  std::optional<std::string> assumption;

  bool operator==(const ExtractionEntry&) const = default;
};

struct ExtractionRecord {
  std::vector<ExtractionEntry> entries;

  bool operator==(const ExtractionRecord&) const = default;

  const ExtractionEntry* find(std::string_view name) const {
    for (const auto& e : entries)
      if (e.feature_name == name) return &e;
    return nullptr;
  }
};

// Stable-sorts by rank and renumbers 0..k-1. Returns true if anything changed.
inline bool reindex_ranks(ExtractionRecord& rec) {
  bool changed = false;
  std::stable_sort(rec.entries.begin(), rec.entries.end(),
                   [](const ExtractionEntry& a, const ExtractionEntry& b) { return a.rank < b.rank; });
  for (std::size_t i = 0; i < rec.entries.size(); ++i) {
    if (rec.entries[i].rank != static_cast<int>(i)) changed = true;
    rec.entries[i].rank = static_cast<int>(i);
  }
  return changed;
}

// True when the ranks are a permutation of 0..k-1 (listing order is irrelevant).
inline bool ranks_are_sequential(const ExtractionRecord& rec) {
  std::vector<int> ranks;
  for (const auto& e : rec.entries) ranks.push_back(e.rank);
  std::sort(ranks.begin(), ranks.end());
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (ranks[i] != static_cast<int>(i)) return false;
  return true;
}

struct ParsedExtraction {
  ExtractionRecord record;
  Warnings warnings;
};

namespace detail {

inline const nlohmann::ordered_json* inner_field(const nlohmann::ordered_json& inner, std::string_view key) {
  // The prompt itself spells one key as "rank:", so accept a trailing colon and any case.
  for (auto it = inner.begin(); it != inner.end(); ++it) {
    std::string k(trim(it.key()));
    if (!k.empty() && k.back() == ':') k.pop_back();
    for (auto& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (k == key) return &it.value();
  }
  return nullptr;
}

inline bool is_null_word(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "None" || s == "none" || s == "null" || s == "NULL" || s == "nan" || s == "NaN" ||
         s == "N/A" || s == "n/a";
}

inline int coerce_rank(const nlohmann::ordered_json& v, const std::string& feature) {
  std::optional<double> d;
  if (v.is_number()) d = v.get<double>();
  if (v.is_string()) d = parse_number(v.get<std::string>());
  if (!d || std::floor(*d) != *d)
    throw Error(ErrorCode::ParseError, "rank of '" + feature + "' is not an integer: " + v.dump());
  return static_cast<int>(*d);
}

inline int coerce_sign(const nlohmann::ordered_json& v, const std::string& feature) {
  std::optional<double> d;
  if (v.is_number()) d = v.get<double>();
  if (v.is_string()) d = parse_number(v.get<std::string>());
  if (d && *d == 1.0) return 1;
  if (d && *d == -1.0) return -1;
  throw Error(ErrorCode::SignDomainError, "sign of '" + feature + "' must be +1 or -1, got " + v.dump());
}

inline std::optional<double> coerce_value(const nlohmann::ordered_json& v, const std::string& feature) {
  if (v.is_null()) return std::nullopt;
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d)) return std::nullopt;
    return d;
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (is_null_word(s)) return std::nullopt;
    if (auto d = parse_number(s)) return d;
  }
  throw Error(ErrorCode::NonNumericValue, "value of '" + feature + "' is not numeric: " + v.dump());
}

}  // namespace detail

// Tolerant parse of an evaluator answer into an ExtractionRecord.
inline ParsedExtraction parse_extraction(std::string_view answer, const DatasetInfo& info) {
  if (trim(answer).empty()) throw Error(ErrorCode::ParseError, "empty evaluator answer");

  std::optional<nlohmann::ordered_json> mapping;
  std::vector<std::string> duplicates;
  std::string last_error = "no mapping literal found";
  for (const auto& cand : mapping_candidates(answer)) {
    try {
      PyLiteralParser p(cand);
      auto v = p.parse();
      if (!v.is_object() || v.empty()) continue;
      if (!std::all_of(v.begin(), v.end(), [](const auto& inner) { return inner.is_object(); })) continue;
      mapping = std::move(v);
      duplicates = p.duplicate_keys();
      break;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!mapping) throw Error(ErrorCode::ParseError, "no feature mapping in evaluator answer (" + last_error + ")");

  ParsedExtraction out;
  for (const auto& d : duplicates)
    out.warnings.push_back({"DuplicateFeature", "feature '" + d + "' listed twice; first entry kept"});

  for (auto it = mapping->begin(); it != mapping->end(); ++it) {
    std::string name = it.key();
    if (!info.feature_descriptions.empty() && !info.description_of(name)) {
      const std::string trimmed(trim(name));
      if (info.description_of(trimmed)) {
        out.warnings.push_back({"NameTrimmed", "feature '" + name + "' matched after trimming whitespace"});
      } else {
        out.warnings.push_back({"UnknownFeatureName", "feature '" + trimmed + "' is not in the dataset"});
      }
      name = trimmed;
    } else if (info.feature_descriptions.empty()) {
      name = std::string(trim(name));
    }
    const auto& inner = it.value();
    ExtractionEntry e;
    e.feature_name = name;
    const auto* rank = detail::inner_field(inner, "rank");
    const auto* sign = detail::inner_field(inner, "sign");
    const auto* value = detail::inner_field(inner, "value");
    const auto* assumption = detail::inner_field(inner, "assumption");
    if (!rank) throw Error(ErrorCode::ParseError, "feature '" + name + "' has no rank");
    if (!sign) throw Error(ErrorCode::ParseError, "feature '" + name + "' has no sign");
    e.rank = detail::coerce_rank(*rank, name);
    e.sign = detail::coerce_sign(*sign, name);
    if (value) {
      e.value = detail::coerce_value(*value, name);
    } else {
      out.warnings.push_back({"MissingValueKey", "feature '" + name + "' has no value key; treated as None"});
    }
    if (assumption && assumption->is_string() && !detail::is_null_word(assumption->get<std::string>()))
      e.assumption = assumption->get<std::string>();
    out.record.entries.push_back(std::move(e));
  }

  if (!ranks_are_sequential(out.record)) {
    std::string listed;
    for (const auto& e : out.record.entries) listed += (listed.empty() ? "" : ",") + std::to_string(e.rank);
    reindex_ranks(out.record);
    out.warnings.push_back({"RankRepaired", "ranks (" + listed + ") re-indexed to 0..k-1"});
  }
  return out;
}

// ---------------- comparison ----------------

struct FeatureCheck {
  std::string feature_name;
  int truth_rank = 0;
  int truth_sign = 1;
  double truth_value = 0.0;
  std::optional<ExtractionEntry> extracted;  // nullopt: narrative never mentions it
  bool rank_error = false;
  bool sign_error = false;
  bool value_error = false;

  bool missing() const { return !extracted.has_value(); }
  bool any_error() const { return rank_error || sign_error || value_error; }
  bool operator==(const FeatureCheck&) const = default;
};

struct FaithfulnessReport {
  int n = 0;
  std::vector<FeatureCheck> features;          // one per expected feature, truth-rank order
  std::vector<std::string> unknown_features;   // extracted, absent from the table
  std::vector<std::string> extra_features;     // extracted, in the table but outside the top n
  std::vector<std::string> missing_features;   // expected, not extracted
  std::string feedback_text;

  bool is_faithful() const {
    return unknown_features.empty() && extra_features.empty() && missing_features.empty() &&
           std::none_of(features.begin(), features.end(), [](const FeatureCheck& f) { return f.any_error(); });
  }
  int error_flag_count() const {
    int c = 0;
    for (const auto& f : features) c += int(f.rank_error) + int(f.sign_error) + int(f.value_error);
    return c;
  }
  bool operator==(const FaithfulnessReport&) const = default;
};

inline std::string error_list(const FeatureCheck& f) {
  std::vector<std::string_view> kinds;
  if (f.rank_error) kinds.push_back("'rank'");
  if (f.sign_error) kinds.push_back("'sign'");
  if (f.value_error) kinds.push_back("'value'");
  std::string out = "[";
  for (std::size_t i = 0; i < kinds.size(); ++i) out += std::string(i ? ", " : "") + std::string(kinds[i]);
  return out + "]";
}

inline std::string format_feedback(const FaithfulnessReport& report) {
  if (report.is_faithful()) return std::string(kFaithfulSentence);
  std::string out;
  auto line = [&](const std::string& s) {
    if (!out.empty()) out += '\n';
    out += s;
  };
  for (const auto& f : report.features)
    if (f.any_error()) line("Feature " + f.feature_name + " contains (an) errors in " + error_list(f) + " value.");
  for (const auto& u : report.unknown_features) line("Feature " + u + " does not exist in the SHAP table.");
  for (const auto& x : report.extra_features)
    line("Feature " + x + " is not among the " + std::to_string(report.n) +
         " most important features in the SHAP table.");
  return out;
}

inline FaithfulnessReport compare(const ExtractionRecord& extraction, const ShapTable& table, int n,
                                  double value_tolerance = 1e-6, SignRule sign_rule = {}) {
  const auto truth = ground_truth(table, n, sign_rule);
  FaithfulnessReport rep;
  rep.n = n;
  for (const auto& t : truth) {
    FeatureCheck f;
    f.feature_name = t.feature_name;
    f.truth_rank = t.rank;
    f.truth_sign = t.sign;
    f.truth_value = t.value;
    if (const auto* e = extraction.find(t.feature_name)) {
      f.extracted = *e;
      f.rank_error = e->rank != t.rank;
      f.sign_error = e->sign != t.sign;
      f.value_error = e->value.has_value() && std::fabs(*e->value - t.value) > value_tolerance;
    } else {
      // unmentioned: rank and sign count wrong, value is null-correct
      f.rank_error = true;
      f.sign_error = true;
      rep.missing_features.push_back(t.feature_name);
    }
    rep.features.push_back(std::move(f));
  }

  std::vector<const ExtractionEntry*> others;
  for (const auto& e : extraction.entries) {
    const bool expected = std::any_of(truth.begin(), truth.end(),
                                      [&](const GroundTruthEntry& t) { return t.feature_name == e.feature_name; });
    if (!expected) others.push_back(&e);
  }
  std::sort(others.begin(), others.end(), [](const ExtractionEntry* a, const ExtractionEntry* b) {
    return std::tie(a->rank, a->feature_name) < std::tie(b->rank, b->feature_name);
  });
  for (const auto* e : others) {
    if (table.find(e->feature_name))
      rep.extra_features.push_back(e->feature_name);
    else
      rep.unknown_features.push_back(e->feature_name);
  }
  rep.feedback_text = format_feedback(rep);
  return rep;
}

// ---------------- gateway-backed evaluation ----------------

struct AgentBinding {
  std::string model_id;
  std::string run_id;
  std::string context_key;
  double temperature = 0.0;
  int max_output_tokens = 2048;

  ChatRequest request(PromptRole role, std::string body) const {
    return {role, std::move(body), temperature, model_id, max_output_tokens, run_id, context_key};
  }
};

struct ExtractionAttempt {
  std::string model_id;
  std::vector<std::string> raw_answers;
  std::optional<ExtractionRecord> record;
  Warnings warnings;
  std::optional<std::string> failure;  // set when both asks failed to parse
  Usage usage;
};

inline bool is_parse_stage_error(ErrorCode c) {
  return c == ErrorCode::ParseError || c == ErrorCode::SignDomainError || c == ErrorCode::NonNumericValue ||
         c == ErrorCode::EmptyResponse;
}

// One extraction with a single re-ask when the answer cannot be parsed.
// Gateway failures other than an empty reply propagate.
inline ExtractionAttempt extract(std::string_view narrative, const DatasetInfo& info, Gateway& gateway,
                                 const AgentBinding& binding) {
  ExtractionAttempt out;
  out.model_id = binding.model_id;
  const auto prompt = build_extraction_prompt(narrative, info);
  out.warnings = prompt.warnings;
  for (int ask = 0; ask < 2; ++ask) {
    try {
      auto resp = gateway.complete(binding.request(PromptRole::evaluator, prompt.body));
      out.usage += Usage{1, resp.input_tokens, resp.output_tokens};
      out.raw_answers.push_back(resp.body);
      auto parsed = parse_extraction(resp.body, info);
      out.record = std::move(parsed.record);
      out.warnings.insert(out.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
      out.failure.reset();
      return out;
    } catch (const Error& e) {
      if (!is_parse_stage_error(e.code())) throw;
      out.failure = e.what();
      out.warnings.push_back({"EvaluatorReask", e.what()});
    }
  }
  out.failure = "EvaluatorFailure: " + out.failure.value_or("unparseable answer");
  return out;
}

struct Evaluation {
  ExtractionAttempt attempt;
  std::optional<FaithfulnessReport> report;
};

inline Evaluation evaluate(std::string_view narrative, const ShapTable& table, const DatasetInfo& info,
                           Gateway& gateway, const AgentBinding& binding, int n, double value_tolerance = 1e-6,
                           SignRule sign_rule = {}) {
  Evaluation ev;
  ev.attempt = extract(narrative, info, gateway, binding);
  if (ev.attempt.record) ev.report = compare(*ev.attempt.record, table, n, value_tolerance, sign_rule);
  return ev;
}

// ---------------- serialization ----------------

inline nlohmann::json to_json(const ExtractionEntry& e) {
  return {{"feature_name", e.feature_name},
          {"rank", e.rank},
          {"sign", e.sign},
          {"value", e.value ? nlohmann::json(*e.value) : nlohmann::json(nullptr)},
          {"assumption", e.assumption ? nlohmann::json(*e.assumption) : nlohmann::json(nullptr)}};
}

inline ExtractionEntry extraction_entry_from_json(const nlohmann::json& j) {
  ExtractionEntry e;
  e.feature_name = j.at("feature_name").get<std::string>();
  e.rank = j.at("rank").get<int>();
  e.sign = j.at("sign").get<int>();
  if (!j.at("value").is_null()) e.value = j.at("value").get<double>();
  if (j.contains("assumption") && !j.at("assumption").is_null()) e.assumption = j.at("assumption").get<std::string>();
  return e;
}

inline nlohmann::json to_json(const ExtractionRecord& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : r.entries) arr.push_back(to_json(e));
  return arr;
}

inline ExtractionRecord extraction_record_from_json(const nlohmann::json& j) {
  ExtractionRecord r;
  for (const auto& e : j) r.entries.push_back(extraction_entry_from_json(e));
  return r;
}

inline nlohmann::json to_json(const FaithfulnessReport& r) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : r.features)
    feats.push_back({{"feature_name", f.feature_name},
                     {"truth_rank", f.truth_rank},
                     {"truth_sign", f.truth_sign},
                     {"truth_value", f.truth_value},
                     {"extracted", f.extracted ? to_json(*f.extracted) : nlohmann::json(nullptr)},
                     {"rank_error", f.rank_error},
                     {"sign_error", f.sign_error},
                     {"value_error", f.value_error}});
  return {{"n", r.n},
          {"features", std::move(feats)},
          {"unknown_features", r.unknown_features},
          {"extra_features", r.extra_features},
          {"missing_features", r.missing_features},
          {"feedback_text", r.feedback_text},
          {"faithful", r.is_faithful()}};
}

inline FaithfulnessReport faithfulness_report_from_json(const nlohmann::json& j) {
  FaithfulnessReport r;
  r.n = j.at("n").get<int>();
  for (const auto& f : j.at("features")) {
    FeatureCheck c;
    c.feature_name = f.at("feature_name").get<std::string>();
    c.truth_rank = f.at("truth_rank").get<int>();
    c.truth_sign = f.at("truth_sign").get<int>();
    c.truth_value = f.at("truth_value").get<double>();
    if (!f.at("extracted").is_null()) c.extracted = extraction_entry_from_json(f.at("extracted"));
    c.rank_error = f.at("rank_error").get<bool>();
    c.sign_error = f.at("sign_error").get<bool>();
    c.value_error = f.at("value_error").get<bool>();
    r.features.push_back(std::move(c));
  }
  r.unknown_features = j.at("unknown_features").get<std::vector<std::string>>();
  r.extra_features = j.at("extra_features").get<std::vector<std::string>>();
  r.missing_features = j.at("missing_features").get<std::vector<std::string>>();
  r.feedback_text = j.at("feedback_text").get<std::string>();
  return r;
}

// Python-dict rendering of a record, as an evaluator model would answer.
inline std::string to_python_literal(const ExtractionRecord& r) {
  auto quote = [](std::string_view s) {
    std::string out = "'";
    for (char c : s) {
      if (c == '\\' || c == '\'') out += '\\';
      out += c;
    }
    return out + "'";
  };
  std::string out = "{";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    if (i) out += ", ";
    out += quote(e.feature_name) + ": {'rank': " + std::to_string(e.rank) + ", 'sign': " + (e.sign > 0 ? "1" : "-1") +
           ", 'value': " + (e.value ? format_number(*e.value) : std::string("None")) +
           ", 'assumption': " + (e.assumption ? quote(*e.assumption) : std::string("'None'")) + "}";
  }
  return out + "}";
}

}  // namespace shapnarr
