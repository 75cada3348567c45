#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/critic.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/numfmt.hpp"
#include "shapnarr/prompt_forge.hpp"

namespace shapnarr {

// ---------------- fault plans ----------------

struct ValuePerturbation {
  std::string feature_name;
  double delta = 0.0;
  bool operator==(const ValuePerturbation&) const = default;
};

struct FaultPlan {
  std::string instance_id;
  std::vector<std::pair<int, int>> rank_swaps;
  std::vector<std::string> sign_flips;
  std::vector<ValuePerturbation> value_perturbations;
  std::uint64_t seed = 0;

  bool empty() const { return rank_swaps.empty() && sign_flips.empty() && value_perturbations.empty(); }
  bool operator==(const FaultPlan&) const = default;
};

inline nlohmann::json to_json(const FaultPlan& p) {
  nlohmann::json swaps = nlohmann::json::array();
  for (const auto& [i, j] : p.rank_swaps) swaps.push_back({i, j});
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : p.value_perturbations) values.push_back({{"feature", v.feature_name}, {"delta", v.delta}});
  return {{"instance_id", p.instance_id},
          {"rank_swaps", std::move(swaps)},
          {"sign_flips", p.sign_flips},
          {"value_perturbations", std::move(values)},
          {"seed", p.seed}};
}

inline FaultPlan fault_plan_from_json(const nlohmann::json& j) {
  try {
    FaultPlan p;
    p.instance_id = j.at("instance_id").get<std::string>();
    for (const auto& s : j.value("rank_swaps", nlohmann::json::array())) {
      if (!s.is_array() || s.size() != 2) throw Error(ErrorCode::InvalidPlan, "rank_swaps entries must be [i, j]");
      p.rank_swaps.emplace_back(s[0].get<int>(), s[1].get<int>());
    }
    p.sign_flips = j.value("sign_flips", std::vector<std::string>{});
    for (const auto& v : j.value("value_perturbations", nlohmann::json::array()))
      p.value_perturbations.push_back({v.at("feature").get<std::string>(), v.at("delta").get<double>()});
    p.seed = j.value("seed", std::uint64_t{0});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidPlan, std::string("malformed fault plan: ") + e.what());
  }
}

// ---------------- templated narratives ----------------

// What a templated narrative claims about one feature, in sentence order.
struct Claim {
  std::string feature_name;
  int sign = 1;
  double value = 0.0;
  bool operator==(const Claim&) const = default;
};

struct TemplatedNarrative {
  std::string opener;
  std::vector<Claim> claims;
  std::string summary;
};

inline constexpr std::string_view kSummaryLine =
    "Together, these features explain why the model arrived at this prediction.";

inline std::string ordinal_phrase(int position) {
  static const char* kWords[] = {"most important",       "second most important",     "third most important",
                                 "fourth most important", "fifth most important",      "sixth most important",
                                 "seventh most important", "eighth most important",    "ninth most important",
                                 "tenth most important",  "eleventh most important",   "twelfth most important"};
  if (position >= 0 && position < 12) return kWords[position];
  return std::to_string(position + 1) + "th most important";
}

inline std::optional<int> ordinal_position(std::string_view phrase) {
  for (int i = 0; i < 12; ++i)
    if (ordinal_phrase(i) == phrase) return i;
  static const std::regex kNumbered(R"((\d+)th most important)");
  std::cmatch m;
  const std::string s(phrase);
  if (std::regex_match(s.c_str(), m, kNumbered)) {
    const int k = std::stoi(m[1].str()) - 1;
    if (k >= 12) return k;
  }
  return std::nullopt;
}

inline std::string feature_sentence(int position, const Claim& c) {
  return "The " + ordinal_phrase(position) + " feature is \"" + c.feature_name + "\", with a value of " +
         format_number(c.value) + ", which " + (c.sign >= 0 ? "increases" : "decreases") +
         " the predicted probability of class 1.";
}

inline std::string render(const TemplatedNarrative& t) {
  std::string out = t.opener;
  for (std::size_t i = 0; i < t.claims.size(); ++i) out += "\n" + feature_sentence(static_cast<int>(i), t.claims[i]);
  out += "\n" + t.summary;
  return out;
}

inline TemplatedNarrative parse_templated(std::string_view text) {
  static const std::regex kSentence(
      R"re(^The (.+) feature is "(.+)", with a value of (\S+), which (increases|decreases) the predicted probability of class 1\.$)re");
  TemplatedNarrative t;
  auto lines = detail::split_lines(text);
  bool saw_feature = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line(trim(lines[i]));
    std::smatch m;
    if (std::regex_match(line, m, kSentence)) {
      const auto pos = ordinal_position(m[1].str());
      const auto v = parse_number(m[3].str());
      if (!pos || !v) throw Error(ErrorCode::NotTemplated, "malformed feature sentence: " + line);
      if (*pos != static_cast<int>(t.claims.size()))
        throw Error(ErrorCode::NotTemplated, "feature sentences out of ordinal order at: " + line);
      t.claims.push_back({m[2].str(), m[4].str() == "increases" ? 1 : -1, *v});
      saw_feature = true;
    } else if (!saw_feature) {
      t.opener += (t.opener.empty() ? "" : "\n") + line;
    } else {
      t.summary += (t.summary.empty() ? "" : "\n") + line;
    }
  }
  if (!saw_feature) throw Error(ErrorCode::NotTemplated, "no templated feature sentences found");
  return t;
}

inline std::string render_templated_narrative(const ShapTable& table, int n, const FaultPlan& plan = {}) {
  const auto truth = ground_truth(table, n);
  std::vector<Claim> claims;
  for (const auto& t : truth) claims.push_back({t.feature_name, t.sign, t.value});
  auto claim_of = [&](const std::string& name) -> Claim& {
    for (auto& c : claims)
      if (c.feature_name == name) return c;
    if (table.find(name))
      throw Error(ErrorCode::InvalidPlan, "feature '" + name + "' is not among the " + std::to_string(n) +
                                              " narrated features of " + table.instance_id);
    throw Error(ErrorCode::UnknownFeature, "feature '" + name + "' is not in table " + table.instance_id);
  };
  for (const auto& f : plan.sign_flips) claim_of(f).sign *= -1;
  for (const auto& v : plan.value_perturbations) {
    if (!std::isfinite(v.delta) || v.delta == 0.0)
      throw Error(ErrorCode::InvalidPlan, "value perturbation of '" + v.feature_name + "' must be a non-zero delta");
    claim_of(v.feature_name).value += v.delta;
  }
  for (const auto& [i, j] : plan.rank_swaps) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw Error(ErrorCode::InvalidPlan,
                  "rank swap (" + std::to_string(i) + ", " + std::to_string(j) + ") invalid for n=" + std::to_string(n));
    std::swap(claims[static_cast<std::size_t>(i)], claims[static_cast<std::size_t>(j)]);
  }
  TemplatedNarrative t;
  t.opener = render_template(templates::kResultString, {{"probability", format_number(table.probability_class1)}});
  t.claims = std::move(claims);
  t.summary = std::string(kSummaryLine);
  return render(t);
}

// Exact recovery of the claims; the C2-free stand-in for an LLM evaluator.
inline ExtractionRecord oracle_extract(std::string_view narrative) {
  const auto t = parse_templated(narrative);
  ExtractionRecord r;
  for (std::size_t i = 0; i < t.claims.size(); ++i)
    r.entries.push_back({t.claims[i].feature_name, static_cast<int>(i), t.claims[i].sign, t.claims[i].value, std::nullopt});
  return r;
}

// ---------------- reviser mock ----------------

enum class ReviserKind { compliant, partial, stubborn };

struct ReviserPolicy {
  ReviserKind kind = ReviserKind::compliant;
  double p = 1.0;  // partial only

  static ReviserPolicy compliant() { return {ReviserKind::compliant, 1.0}; }
  static ReviserPolicy stubborn() { return {ReviserKind::stubborn, 0.0}; }
  static ReviserPolicy partial(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::ConfigError, "partial reviser probability must be in [0, 1]");
    return {ReviserKind::partial, p};
  }
};

inline ReviserPolicy reviser_policy_from_json(const nlohmann::json& j) {
  const auto kind = j.value("policy", std::string("compliant"));
  if (kind == "compliant") return ReviserPolicy::compliant();
  if (kind == "stubborn") return ReviserPolicy::stubborn();
  if (kind == "partial") return ReviserPolicy::partial(j.value("p", 0.5));
  throw Error(ErrorCode::ConfigError, "unknown reviser policy '" + kind + "'");
}

struct Instruction {
  enum Kind { move, set_sign, set_value, add, remove } kind = move;
  std::string feature_name;
  int rank = 0;
  int sign = 1;
  double value = 0.0;
};

struct ParsedInstructions {
  std::vector<Instruction> instructions;
  Warnings warnings;
};

// Understands the rule-critic templates and, given the truth table, the
// evaluator's coarser "contains (an) errors" lines.
inline ParsedInstructions parse_instructions(std::string_view feedback, const ShapTable* truth = nullptr) {
  static const std::regex kMove(
      R"re(^Move the description of feature '(.+)' so it is presented as the (\d+)-th most important feature \(rank (\d+) in the SHAP table\)\.$)re");
  static const std::regex kSign(R"re(^Change the stated influence of feature '(.+)' from (positive|negative) to (positive|negative)\.$)re");
  static const std::regex kValue(R"re(^Change the stated value of feature '(.+)' to (\S+)\.$)re");
  static const std::regex kAdd(
      R"re(^Add a description of feature '(.+)' \(rank (\d+), (positive|negative) influence, value (\S+)\)\.$)re");
  static const std::regex kRemove(R"re(^Remove the description of feature '(.+)'; it is not .*\.$)re");
  static const std::regex kEvalErrors(R"re(^Feature (.+) contains \(an\) errors in \[(.*)\] value\.$)re");
  static const std::regex kEvalUnknown(R"re(^Feature (.+) (?:does not exist in|is not among the \d+ most important features in) the SHAP table\.$)re");

  ParsedInstructions out;
  for (auto raw : detail::split_lines(feedback)) {
    const std::string line(trim(raw));
    if (line.empty() || line == kFaithfulSentence) continue;
    std::smatch m;
    if (std::regex_match(line, m, kMove)) {
      out.instructions.push_back({Instruction::move, m[1].str(), std::stoi(m[3].str())});
    } else if (std::regex_match(line, m, kSign)) {
      out.instructions.push_back({Instruction::set_sign, m[1].str(), 0, m[3].str() == "positive" ? 1 : -1});
    } else if (std::regex_match(line, m, kValue) && parse_number(m[2].str())) {
      out.instructions.push_back({Instruction::set_value, m[1].str(), 0, 1, *parse_number(m[2].str())});
    } else if (std::regex_match(line, m, kAdd) && parse_number(m[4].str())) {
      out.instructions.push_back({Instruction::add, m[1].str(), std::stoi(m[2].str()), m[3].str() == "positive" ? 1 : -1,
                                  *parse_number(m[4].str())});
    } else if (std::regex_match(line, m, kRemove) || std::regex_match(line, m, kEvalUnknown)) {
      out.instructions.push_back({Instruction::remove, m[1].str()});
    } else if (std::regex_match(line, m, kEvalErrors) && truth) {
      const auto name = m[1].str();
      const auto list = m[2].str();
      const auto rank = truth->rank_of(name);
      if (!rank) {
        out.warnings.push_back({"UnparseableInstruction", "feature not in the table: " + line});
        continue;
      }
      const auto& row = truth->rows[*rank];
      const int sign = SignRule{}.sign_of(row.shap_value);
      const bool r = list.find("'rank'") != std::string::npos;
      const bool s = list.find("'sign'") != std::string::npos;
      const bool v = list.find("'value'") != std::string::npos;
      // Rank and sign flagged together may mean the feature was never mentioned;
      // apply() turns a move of an absent feature into an add.
      if (r) out.instructions.push_back({Instruction::move, name, static_cast<int>(*rank), sign, row.feature_value});
      if (s) out.instructions.push_back({Instruction::set_sign, name, 0, sign});
      if (v) out.instructions.push_back({Instruction::set_value, name, 0, 1, row.feature_value});
    } else {
      out.warnings.push_back({"UnparseableInstruction", line});
    }
  }
  return out;
}

namespace detail {

inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

struct Revision {
  std::string narrative;
  int applied = 0;
  int skipped = 0;
  Warnings warnings;
};

inline Revision mock_reviser(std::string_view last_narrative, std::string_view feedback, const ReviserPolicy& policy,
                             std::mt19937_64& rng, const ShapTable* truth = nullptr) {
  Revision out;
  auto parsed = parse_instructions(feedback, truth);
  out.warnings = std::move(parsed.warnings);
  if (policy.kind == ReviserKind::stubborn) {
    out.narrative = std::string(last_narrative);
    out.skipped = static_cast<int>(parsed.instructions.size());
    return out;
  }
  std::vector<Instruction> chosen;
  for (const auto& ins : parsed.instructions) {
    const bool take = policy.kind == ReviserKind::compliant || detail::unit_draw(rng) < policy.p;
    if (take)
      chosen.push_back(ins);
    else
      ++out.skipped;
  }

  auto t = parse_templated(last_narrative);
  std::map<std::string, std::size_t> original_slot;
  for (std::size_t i = 0; i < t.claims.size(); ++i) original_slot.emplace(t.claims[i].feature_name, i);
  auto find = [&](const std::string& name) -> Claim* {
    for (auto& c : t.claims)
      if (c.feature_name == name) return &c;
    return nullptr;
  };

  std::map<std::string, int> targets;  // feature -> slot
  for (const auto& ins : chosen) {
    if (ins.kind == Instruction::remove) {
      const auto before = t.claims.size();
      t.claims.erase(std::remove_if(t.claims.begin(), t.claims.end(),
                                    [&](const Claim& c) { return c.feature_name == ins.feature_name; }),
                     t.claims.end());
      if (t.claims.size() != before) ++out.applied;
    }
  }
  for (const auto& ins : chosen) {
    const bool adds = ins.kind == Instruction::add || (ins.kind == Instruction::move && !find(ins.feature_name) && truth);
    if (adds && !find(ins.feature_name)) {
      t.claims.push_back({ins.feature_name, ins.sign, ins.value});
      targets[ins.feature_name] = ins.rank;
      ++out.applied;
    }
  }
  for (const auto& ins : chosen) {
    Claim* c = find(ins.feature_name);
    switch (ins.kind) {
      case Instruction::set_sign:
      case Instruction::set_value:
        if (!c) {
          out.warnings.push_back({"UnparseableInstruction", "no sentence for feature '" + ins.feature_name + "'"});
          continue;
        }
        if (ins.kind == Instruction::set_sign)
          c->sign = ins.sign;
        else
          c->value = ins.value;
        ++out.applied;
        break;
      case Instruction::move:
        if (!c) {
          out.warnings.push_back({"UnparseableInstruction", "no sentence for feature '" + ins.feature_name + "'"});
          continue;
        }
        if (!targets.count(ins.feature_name)) {
          targets[ins.feature_name] = ins.rank;
          ++out.applied;
        }
        break;
      default:
        break;
    }
  }

  // Moved features take their target slots; everyone else keeps the slot it
  // had before editing if still free, then the rest fill the gaps in order.
  const std::size_t k = t.claims.size();
  std::vector<std::optional<Claim>> slots(k);
  std::vector<bool> placed(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    auto it = targets.find(t.claims[i].feature_name);
    if (it == targets.end()) continue;
    const auto slot = static_cast<std::size_t>(it->second);
    if (it->second >= 0 && slot < k && !slots[slot]) {
      slots[slot] = t.claims[i];
      placed[i] = true;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    const auto& name = t.claims[i].feature_name;
    if (placed[i] || targets.count(name)) continue;
    const auto it = original_slot.find(name);
    if (it != original_slot.end() && it->second < k && !slots[it->second]) {
      slots[it->second] = t.claims[i];
      placed[i] = true;
    }
  }
  std::size_t free = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (placed[i]) continue;
    while (slots[free]) ++free;
    slots[free] = t.claims[i];
  }
  t.claims.clear();
  for (auto& s : slots) t.claims.push_back(std::move(*s));
  out.narrative = render(t);
  return out;
}

// ---------------- simulated agents ----------------

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Truth table recovered from a rendered base prompt.
inline ShapTable table_from_base_prompt(std::string_view base) {
  ShapTable t;
  t.rows = parse_rendered_table(base);
  if (t.rows.empty()) throw Error(ErrorCode::InvalidPrompt, "base prompt has an empty SHAP table");
  t.probability_class1 = parse_result_probability(base).value_or(0.0);
  return t;
}

struct SimlabOptions {
  ReviserPolicy reviser = ReviserPolicy::compliant();
  std::uint64_t seed = 0;
  std::string coherence_reply = "no coherence issue";
};

// One provider playing every role with deterministic, model-free behaviour.
// Randomness is derived from (seed, instance, prompt) so results do not depend
// on thread scheduling.
inline std::shared_ptr<Provider> make_simlab_provider(SimlabOptions opts, std::string name = "simlab") {
  // Revision calls for one instance are sequential, so a per-instance counter
  // is scheduling-independent; it keeps a reviser that skipped everything from
  // redrawing the same choices on an identical prompt.
  struct Counters {
    std::mutex mu;
    std::map<std::string, std::uint64_t> revisions;
  };
  auto counters = std::make_shared<Counters>();
  return std::make_shared<FunctionProvider>(name, [opts, counters](const ChatRequest& r) -> std::string {
    switch (r.role_tag) {
      case PromptRole::narrator: {
        if (auto parts = split_revision_prompt(r.body)) {
          const auto truth = table_from_base_prompt(parts->initial_prompt);
          std::uint64_t nth = 0;
          {
            std::lock_guard lock(counters->mu);
            nth = counters->revisions[r.context_key]++;
          }
          std::mt19937_64 rng(fnv1a(r.body, fnv1a(r.context_key, opts.seed ^ 0x5eedULL) + nth));
          return mock_reviser(parts->last_narrative, parts->faithful_feedback, opts.reviser, rng, &truth).narrative;
        }
        const auto truth = table_from_base_prompt(r.body);
        return render_templated_narrative(truth, static_cast<int>(truth.rows.size()));
      }
      case PromptRole::evaluator: {
        auto payload = delimited_payload(r.body);
        if (!payload) return "I could not find a narrative.";
        try {
          return to_python_literal(oracle_extract(*payload));
        } catch (const Error&) {
          return "The narrative does not follow a format I can extract.";
        }
      }
      case PromptRole::critic_summary: {
        auto payload = delimited_payload(r.body);
        return payload ? *payload : std::string();
      }
      case PromptRole::coherence:
        return opts.coherence_reply;
    }
    return {};
  });
}

// ---------------- synthetic corpora ----------------

struct SyntheticCorpus {
  std::vector<ShapTable> tables;
  DatasetInfo info;
  std::vector<FaultPlan> plans;  // one per table, empty plans for clean instances
};

inline ShapTable synthetic_table(const std::string& dataset_id, const std::string& instance_id, int rows,
                                 std::mt19937_64& rng) {
  ShapTable t;
  t.dataset_id = dataset_id;
  t.instance_id = instance_id;
  std::uniform_real_distribution<double> mag(0.001, 0.3);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> val(0, 20);
  std::vector<double> shaps;
  for (int i = 0; i < rows; ++i) {
    const double m = std::round(mag(rng) * 1000.0) / 1000.0;  // printable at 3 places
    shaps.push_back(coin(rng) ? m : -m);
  }
  std::stable_sort(shaps.begin(), shaps.end(), [](double a, double b) { return std::fabs(a) > std::fabs(b); });
  double margin = 0.0;
  for (int i = 0; i < rows; ++i) {
    FeatureRow r;
    r.feature_name = "feature_" + std::to_string(i);
    r.shap_value = shaps[static_cast<std::size_t>(i)];
    r.feature_value = static_cast<double>(val(rng));
    r.feature_average = std::round(val(rng) * 100.0 + 50.0) / 100.0;
    r.feature_description = "synthetic feature " + std::to_string(i);
    margin += r.shap_value;
    t.rows.push_back(std::move(r));
  }
  t.probability_class1 = std::round(1000.0 / (1.0 + std::exp(-margin))) / 1000.0;
  t.predicted_class = t.probability_class1 >= 0.5 ? 1 : 0;
  // feature names are shuffled so that name order carries no rank information
  std::vector<std::string> names;
  for (const auto& r : t.rows) names.push_back(r.feature_name);
  std::shuffle(names.begin(), names.end(), rng);
  for (std::size_t i = 0; i < names.size(); ++i) t.rows[i].feature_name = names[i];
  for (auto& r : t.rows) r.feature_description = "synthetic feature " + r.feature_name.substr(8);
  return t;
}

inline DatasetInfo synthetic_info(int rows) {
  DatasetInfo d;
  d.dataset_description = "Synthetic tabular data for the simulation lab.";
  d.target_description = "Binary target; class 1 is the positive outcome.";
  d.task_description = "Predict class 1 versus class 0.";
  for (int i = 0; i < rows; ++i)
    d.feature_descriptions.emplace_back("feature_" + std::to_string(i), "synthetic feature " + std::to_string(i));
  return d;
}

// A random plan with at least one fault among the top n.
inline FaultPlan random_fault_plan(const ShapTable& table, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FaultPlan p;
  p.instance_id = table.instance_id;
  p.seed = seed;
  std::uniform_int_distribution<int> pos(0, n - 1);
  std::uniform_int_distribution<int> kinds(1, 7);  // bitmask over swap/sign/value
  const int mask = kinds(rng);
  if ((mask & 1) && n >= 2) {
    const int i = pos(rng);
    int j = pos(rng);
    while (j == i) j = pos(rng);
    p.rank_swaps.emplace_back(i, j);
  }
  if (mask & 2) p.sign_flips.push_back(table.rows[static_cast<std::size_t>(pos(rng))].feature_name);
  if ((mask & 4) || p.empty()) {
    std::uniform_int_distribution<int> delta(1, 5);
    p.value_perturbations.push_back({table.rows[static_cast<std::size_t>(pos(rng))].feature_name,
                                     static_cast<double>(delta(rng))});
  }
  return p;
}

// `count` instances of which the first `faulty` (after a seeded shuffle) carry faults.
inline SyntheticCorpus synthetic_corpus(int count, int faulty, int rows, int n, std::uint64_t seed,
                                        const std::string& dataset_id = "synth") {
  if (count < 0 || faulty < 0 || faulty > count) throw Error(ErrorCode::ConfigError, "faulty must be within [0, count]");
  if (n < 1 || n > rows) throw Error(ErrorCode::NTooLarge, "n must be within [1, rows]");
  std::mt19937_64 rng(seed);
  SyntheticCorpus c;
  c.info = synthetic_info(rows);
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::set<int> faulty_ids(order.begin(), order.begin() + faulty);
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", dataset_id.c_str(), i);
    c.tables.push_back(synthetic_table(dataset_id, id, rows, rng));
    FaultPlan p;
    p.instance_id = id;
    if (faulty_ids.count(i)) p = random_fault_plan(c.tables.back(), n, rng());
    c.plans.push_back(std::move(p));
  }
  return c;
}

}  // namespace shapnarr
