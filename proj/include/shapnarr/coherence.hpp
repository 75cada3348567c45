#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/numfmt.hpp"
#include "shapnarr/prompt_forge.hpp"

namespace shapnarr {

enum class CoherenceVerdict { no_issue, suggestions };
enum class CommandKind { change, insert, del, reorder };

inline std::string_view to_string(CoherenceVerdict v) { return v == CoherenceVerdict::no_issue ? "no_issue" : "suggestions"; }

inline std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::change: return "change";
    case CommandKind::insert: return "insert";
    case CommandKind::del: return "delete";
    case CommandKind::reorder: return "reorder";
  }
  return "change";
}

inline CommandKind command_kind_from(std::string_view s) {
  if (s == "change") return CommandKind::change;
  if (s == "insert") return CommandKind::insert;
  if (s == "delete") return CommandKind::del;
  if (s == "reorder") return CommandKind::reorder;
  throw Error(ErrorCode::SchemaError, "unknown coherence command kind '" + std::string(s) + "'");
}

struct CoherenceCommand {
  CommandKind kind = CommandKind::change;
  std::string payload;
  std::string justification;

  bool operator==(const CoherenceCommand&) const = default;
};

struct CoherenceFeedback {
  std::string body;  // forwarded to the narrator verbatim
  CoherenceVerdict verdict = CoherenceVerdict::no_issue;
  std::vector<CoherenceCommand> commands;

  bool operator==(const CoherenceFeedback&) const = default;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Drops list numbering ("1.", "2)", "-", "*") and markdown emphasis from the front.
inline std::string_view strip_line_decoration(std::string_view s) {
  s = trim(s);
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) s.remove_prefix(i + 1);
  s = trim(s);
  if (!s.empty() && (s[0] == '-' || s[0] == '*') && s.substr(0, 2) != "**") s = trim(s.substr(1));
  while (s.substr(0, 2) == "**" || s.substr(0, 2) == "__") s = trim(s.substr(2));
  return s;
}

inline std::optional<CommandKind> command_keyword(std::string_view line) {
  static const std::pair<std::string_view, CommandKind> kKeys[] = {{"change", CommandKind::change},
                                                                   {"insert", CommandKind::insert},
                                                                   {"delete", CommandKind::del},
                                                                   {"reorder", CommandKind::reorder}};
  const auto l = lower(line.substr(0, 8));
  for (const auto& [kw, kind] : kKeys) {
    if (l.compare(0, kw.size(), kw) != 0) continue;
    if (line.size() == kw.size()) return kind;
    const char next = line[kw.size()];
    if (next == ':' || next == ' ' || next == '*' || next == '\t') return kind;
  }
  return std::nullopt;
}

}  // namespace detail

// Lenient classifier. Pure: the same body always yields the same verdict and commands.
inline CoherenceFeedback classify_coherence(std::string_view body) {
  CoherenceFeedback out;
  out.body = std::string(body);
  if (detail::lower(body).find("no coherence issue") != std::string::npos) {
    out.verdict = CoherenceVerdict::no_issue;
    return out;
  }
  out.verdict = CoherenceVerdict::suggestions;
  CoherenceCommand* current = nullptr;
  for (auto raw : detail::split_lines(body)) {
    const auto line = detail::strip_line_decoration(raw);
    if (line.empty() || line == "..." || line == "…") continue;
    if (auto kind = detail::command_keyword(line)) {
      out.commands.push_back({*kind, std::string(line), {}});
      current = &out.commands.back();
      continue;
    }
    if (!current) {
      out.commands.push_back({CommandKind::change, std::string(line), {}});  // payload-only
      continue;
    }
    std::string_view j = line;
    const auto lj = detail::lower(j.substr(0, 16));
    if (lj.rfind("justification", 0) == 0) {
      j.remove_prefix(std::string_view("justification").size());
      while (!j.empty() && (j.front() == ':' || j.front() == '*' || j.front() == ' ')) j.remove_prefix(1);
    }
    if (!current->justification.empty()) current->justification += ' ';
    current->justification += std::string(j);
  }
  return out;
}

struct CoherenceOutcome {
  std::optional<CoherenceFeedback> feedback;  // nullopt: CoherenceFailure
  std::optional<std::string> failure;
};

inline CoherenceOutcome critique(std::string_view narrative, Gateway& gateway, const AgentBinding& binding) {
  const auto prompt = build_coherence_prompt(narrative);
  CoherenceOutcome out;
  try {
    const auto resp = gateway.complete(binding.request(PromptRole::coherence, prompt.body));
    out.feedback = classify_coherence(resp.body);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyResponse) throw;
    out.failure = std::string("CoherenceFailure: ") + e.what();
  }
  return out;
}

inline nlohmann::json to_json(const CoherenceFeedback& c) {
  nlohmann::json cmds = nlohmann::json::array();
  for (const auto& k : c.commands)
    cmds.push_back({{"kind", to_string(k.kind)}, {"payload", k.payload}, {"justification", k.justification}});
  return {{"body", c.body}, {"verdict", to_string(c.verdict)}, {"commands", std::move(cmds)}};
}

inline CoherenceFeedback coherence_feedback_from_json(const nlohmann::json& j) {
  CoherenceFeedback c;
  c.body = j.at("body").get<std::string>();
  c.verdict = j.at("verdict").get<std::string>() == "no_issue" ? CoherenceVerdict::no_issue : CoherenceVerdict::suggestions;
  for (const auto& k : j.at("commands"))
    c.commands.push_back({command_kind_from(k.at("kind").get<std::string>()), k.at("payload"), k.at("justification")});
  return c;
}

}  // namespace shapnarr
