#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shapnarr/coherence.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/critic.hpp"
#include "shapnarr/ensemble.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/metrics.hpp"
#include "shapnarr/prompt_forge.hpp"

namespace shapnarr {

enum class Design { basic, critic, critic_rule, coherent, coherent_rule };

inline std::string_view to_string(Design d) {
  switch (d) {
    case Design::basic: return "basic";
    case Design::critic: return "critic";
    case Design::critic_rule: return "critic_rule";
    case Design::coherent: return "coherent";
    case Design::coherent_rule: return "coherent_rule";
  }
  return "?";
}

inline Design design_from(std::string_view s) {
  for (auto d : {Design::basic, Design::critic, Design::critic_rule, Design::coherent, Design::coherent_rule})
    if (to_string(d) == s) return d;
  throw Error(ErrorCode::ConfigError, "unknown design '" + std::string(s) +
                                          "' (expected basic, critic, critic_rule, coherent or coherent_rule)");
}

// Narrator and evaluator are always on the roster.
struct Roster {
  bool llm_critic = false;
  bool rule_critic = false;
  bool coherence = false;

  bool has_critic() const { return llm_critic || rule_critic; }
};

inline Roster roster_of(Design d) {
  switch (d) {
    case Design::basic: return {};
    case Design::critic: return {true, false, false};
    case Design::critic_rule: return {false, true, false};
    case Design::coherent: return {true, false, true};
    case Design::coherent_rule: return {false, true, true};
  }
  return {};
}

enum class BaselineMode { from_file, narrator_generated };

inline std::string_view to_string(BaselineMode m) {
  return m == BaselineMode::from_file ? "from_file" : "narrator_generated";
}

inline BaselineMode baseline_mode_from(std::string_view s) {
  if (s == "from_file") return BaselineMode::from_file;
  if (s == "narrator_generated") return BaselineMode::narrator_generated;
  throw Error(ErrorCode::ConfigError, "unknown baseline_mode '" + std::string(s) + "'");
}

struct EnsembleConfig {
  bool enabled = false;
  std::vector<std::string> evaluators;  // model ids, one per panel member
  std::string primary;
};

struct ModelBindings {
  std::string narrator;
  std::string evaluator;
  std::string critic;
  std::string coherence;
};

struct RunConfig {
  std::string run_id;
  Design design = Design::basic;
  int max_rounds = 3;
  int n_features = 4;
  int max_sentences = 10;
  BaselineMode baseline_mode = BaselineMode::from_file;
  EnsembleConfig ensemble;
  ModelBindings models;
  double value_tolerance = 1e-6;
  std::uint64_t seed = 0;
  int workers = 1;
  double temperature = 0.0;
};

inline void validate(const RunConfig& c) {
  if (c.max_rounds < 1) throw Error(ErrorCode::ConfigError, "max_rounds must be at least 1");
  if (c.n_features < 1) throw Error(ErrorCode::ConfigError, "n_features must be at least 1");
  if (c.workers < 1) throw Error(ErrorCode::ConfigError, "workers must be at least 1");
  if (!(c.value_tolerance >= 0.0)) throw Error(ErrorCode::ConfigError, "value_tolerance must be non-negative");
  const auto roster = roster_of(c.design);
  if (c.models.narrator.empty()) throw Error(ErrorCode::ConfigError, "models.narrator is required");
  if (!c.ensemble.enabled && c.models.evaluator.empty()) throw Error(ErrorCode::ConfigError, "models.evaluator is required");
  if (roster.llm_critic && c.models.critic.empty())
    throw Error(ErrorCode::ConfigError, "design " + std::string(to_string(c.design)) + " needs models.critic");
  if (roster.coherence && c.models.coherence.empty())
    throw Error(ErrorCode::ConfigError, "design " + std::string(to_string(c.design)) + " needs models.coherence");
  if (c.ensemble.enabled) {
    if (c.ensemble.evaluators.size() < 2) throw Error(ErrorCode::PanelTooSmall, "ensemble needs at least 2 evaluators");
    std::set<std::string> ids(c.ensemble.evaluators.begin(), c.ensemble.evaluators.end());
    if (ids.size() != c.ensemble.evaluators.size()) throw Error(ErrorCode::ConfigError, "ensemble evaluators must be distinct");
    if (!ids.count(c.ensemble.primary))
      throw Error(ErrorCode::ConfigError, "ensemble.primary '" + c.ensemble.primary + "' is not an ensemble evaluator");
  }
}

// ---------------- transcripts ----------------

struct RoundRecord {
  int round_index = 0;
  std::string narrative;
  NarrativeOrigin origin = NarrativeOrigin::baseline_file;
  std::vector<ExtractionAttempt> extractions;
  std::optional<ExtractionRecord> consensus;  // ensemble only
  std::optional<FaithfulnessReport> report;
  std::string evaluator_feedback;
  std::optional<CriticFeedback> critic;
  std::optional<CoherenceFeedback> coherence;
  std::optional<std::string> evaluator_failure;
  std::optional<std::string> coherence_failure;
  bool stop_flag = false;
  Usage usage;  // cumulative for the instance at the end of this round
  Warnings warnings;
};

inline const std::set<std::string>& problem_categories() {
  static const std::set<std::string> c = {"C1", "C2", "C3", "C4", "C5", "none"};
  return c;
}

struct Annotation {
  int round_index = 0;
  std::string category;
  std::string note;
  std::int64_t seq = 0;  // write order; later wins

  bool operator==(const Annotation&) const = default;
};

struct Transcript {
  std::string instance_id;
  std::string run_id;
  std::string dataset_id;
  std::vector<RoundRecord> rounds;
  std::vector<Annotation> annotations;  // full history

  // Latest annotation for the round, if any.
  const Annotation* annotation_for(int round) const {
    const Annotation* best = nullptr;
    for (const auto& a : annotations)
      if (a.round_index == round && (!best || a.seq >= best->seq)) best = &a;
    return best;
  }
};

inline nlohmann::json warnings_json(const Warnings& w) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& x : w) arr.push_back({{"code", x.code}, {"message", x.message}});
  return arr;
}

inline Warnings warnings_from_json(const nlohmann::json& j) {
  Warnings w;
  for (const auto& x : j) w.push_back({x.at("code").get<std::string>(), x.at("message").get<std::string>()});
  return w;
}

inline nlohmann::json to_json(const Usage& u) {
  return {{"calls", u.calls}, {"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
}

inline Usage usage_from_json(const nlohmann::json& j) {
  return {j.value("calls", std::int64_t{0}), j.value("input_tokens", std::int64_t{0}), j.value("output_tokens", std::int64_t{0})};
}

inline nlohmann::json to_json(const ExtractionAttempt& a) {
  return {{"model_id", a.model_id},
          {"raw_answers", a.raw_answers},
          {"record", a.record ? to_json(*a.record) : nlohmann::json(nullptr)},
          {"warnings", warnings_json(a.warnings)},
          {"failure", a.failure ? nlohmann::json(*a.failure) : nlohmann::json(nullptr)},
          {"usage", to_json(a.usage)}};
}

inline ExtractionAttempt extraction_attempt_from_json(const nlohmann::json& j) {
  ExtractionAttempt a;
  a.model_id = j.at("model_id").get<std::string>();
  a.raw_answers = j.at("raw_answers").get<std::vector<std::string>>();
  if (!j.at("record").is_null()) a.record = extraction_record_from_json(j.at("record"));
  a.warnings = warnings_from_json(j.at("warnings"));
  if (!j.at("failure").is_null()) a.failure = j.at("failure").get<std::string>();
  a.usage = usage_from_json(j.at("usage"));
  return a;
}

inline nlohmann::json to_json(const RoundRecord& r) {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& a : r.extractions) ex.push_back(to_json(a));
  auto opt = [](const auto& o) { return o ? to_json(*o) : nlohmann::json(nullptr); };
  auto opt_str = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  return {{"round_index", r.round_index},
          {"narrative", r.narrative},
          {"origin", to_string(r.origin)},
          {"extractions", std::move(ex)},
          {"consensus", opt(r.consensus)},
          {"report", opt(r.report)},
          {"evaluator_feedback", r.evaluator_feedback},
          {"critic", opt(r.critic)},
          {"coherence", opt(r.coherence)},
          {"evaluator_failure", opt_str(r.evaluator_failure)},
          {"coherence_failure", opt_str(r.coherence_failure)},
          {"stop_flag", r.stop_flag},
          {"usage", to_json(r.usage)},
          {"warnings", warnings_json(r.warnings)}};
}

inline RoundRecord round_record_from_json(const nlohmann::json& j) {
  RoundRecord r;
  r.round_index = j.at("round_index").get<int>();
  r.narrative = j.at("narrative").get<std::string>();
  r.origin = narrative_origin_from(j.at("origin").get<std::string>());
  for (const auto& a : j.at("extractions")) r.extractions.push_back(extraction_attempt_from_json(a));
  if (!j.at("consensus").is_null()) r.consensus = extraction_record_from_json(j.at("consensus"));
  if (!j.at("report").is_null()) r.report = faithfulness_report_from_json(j.at("report"));
  r.evaluator_feedback = j.at("evaluator_feedback").get<std::string>();
  if (!j.at("critic").is_null()) r.critic = critic_feedback_from_json(j.at("critic"));
  if (!j.at("coherence").is_null()) r.coherence = coherence_feedback_from_json(j.at("coherence"));
  if (!j.at("evaluator_failure").is_null()) r.evaluator_failure = j.at("evaluator_failure").get<std::string>();
  if (!j.at("coherence_failure").is_null()) r.coherence_failure = j.at("coherence_failure").get<std::string>();
  r.stop_flag = j.at("stop_flag").get<bool>();
  r.usage = usage_from_json(j.at("usage"));
  r.warnings = warnings_from_json(j.at("warnings"));
  return r;
}

// JSONL: one "round" line per RoundRecord, one "annotation" line per annotation.
inline std::string transcript_lines(const Transcript& t) {
  std::string out;
  for (const auto& r : t.rounds) {
    nlohmann::json line = {{"type", "round"},
                           {"run_id", t.run_id},
                           {"instance_id", t.instance_id},
                           {"dataset_id", t.dataset_id},
                           {"record", to_json(r)}};
    out += line.dump() + "\n";
  }
  for (const auto& a : t.annotations) out += nlohmann::json{{"type", "annotation"},
                                                            {"run_id", t.run_id},
                                                            {"instance_id", t.instance_id},
                                                            {"round", a.round_index},
                                                            {"category", a.category},
                                                            {"note", a.note},
                                                            {"seq", a.seq}}
                                                 .dump() +
                                             "\n";
  return out;
}

inline std::vector<Transcript> parse_transcripts(std::string_view jsonl) {
  std::vector<Transcript> out;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const nlohmann::json& line) -> Transcript& {
    const auto id = line.at("instance_id").get<std::string>();
    auto it = index.find(id);
    if (it != index.end()) return out[it->second];
    index[id] = out.size();
    Transcript t;
    t.instance_id = id;
    t.run_id = line.value("run_id", "");
    t.dataset_id = line.value("dataset_id", "");
    out.push_back(std::move(t));
    return out.back();
  };
  int lineno = 0;
  for (auto raw : detail::split_lines(jsonl)) {
    ++lineno;
    if (trim(raw).empty()) continue;
    try {
      const auto line = nlohmann::json::parse(raw);
      const auto type = line.at("type").get<std::string>();
      auto& t = slot(line);
      if (type == "round") {
        auto rec = round_record_from_json(line.at("record"));
        if (rec.round_index != static_cast<int>(t.rounds.size()))
          throw Error(ErrorCode::SchemaError, "round indices of " + t.instance_id + " are not contiguous");
        if (t.dataset_id.empty()) t.dataset_id = line.value("dataset_id", "");
        t.rounds.push_back(std::move(rec));
      } else if (type == "annotation") {
        t.annotations.push_back({line.at("round").get<int>(), line.at("category").get<std::string>(),
                                 line.at("note").get<std::string>(), line.at("seq").get<std::int64_t>()});
      } else {
        throw Error(ErrorCode::SchemaError, "unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, "transcripts line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------- the loop ----------------

struct Instance {
  ShapTable table;
  DatasetInfo info;
  std::optional<std::string> baseline;
};

inline AgentBinding binding_for(const RunConfig& c, const std::string& model, const std::string& instance_id) {
  AgentBinding b;
  b.model_id = model;
  b.run_id = c.run_id;
  b.context_key = instance_id;
  b.temperature = c.temperature;
  return b;
}

inline Transcript run_instance(const RunConfig& config, const ShapTable& table, const DatasetInfo& info,
                               const std::optional<std::string>& baseline, Gateway& gateway) {
  const bool from_file = config.baseline_mode == BaselineMode::from_file;
  if (from_file && !baseline)
    throw Error(ErrorCode::ConfigError, "instance " + table.instance_id + " has no baseline narrative");
  const auto roster = roster_of(config.design);
  const auto& id = table.instance_id;

  Transcript tr;
  tr.instance_id = id;
  tr.run_id = config.run_id;
  tr.dataset_id = table.dataset_id;

  const auto base = build_base_prompt(table, info, default_generation_rules(config.n_features, config.max_sentences));
  std::string narrative;
  NarrativeOrigin origin;
  if (from_file) {
    narrative = *baseline;
    origin = NarrativeOrigin::baseline_file;
  } else {
    narrative = gateway.complete(binding_for(config, config.models.narrator, id).request(PromptRole::narrator, base.body)).body;
    origin = NarrativeOrigin::narrator_generated;
  }

  for (int t = 0; t < config.max_rounds; ++t) {
    RoundRecord rec;
    rec.round_index = t;
    rec.narrative = narrative;
    rec.origin = origin;

    std::optional<ExtractionRecord> extracted;
    if (config.ensemble.enabled) {
      std::vector<AgentBinding> panel;
      for (const auto& m : config.ensemble.evaluators) panel.push_back(binding_for(config, m, id));
      auto ev = ensemble_extract(narrative, info, gateway, panel, config.ensemble.primary, config.value_tolerance);
      rec.extractions = std::move(ev.attempts);
      rec.warnings = std::move(ev.warnings);
      if (ev.record) {
        extracted = *ev.record;
        if (ev.vote) rec.consensus = ev.record;
      } else {
        rec.evaluator_failure = ev.failure;
      }
    } else {
      auto attempt = extract(narrative, info, gateway, binding_for(config, config.models.evaluator, id));
      if (attempt.record)
        extracted = *attempt.record;
      else
        rec.evaluator_failure = attempt.failure;
      rec.extractions.push_back(std::move(attempt));
    }
    if (extracted) {
      rec.report = compare(*extracted, table, config.n_features, config.value_tolerance);
      rec.evaluator_feedback = rec.report->feedback_text;
    }

    if (rec.report && roster.rule_critic) rec.critic = rule_critic(*rec.report, table, config.n_features);
    if (rec.report && roster.llm_critic)
      rec.critic = llm_critic(*rec.report, table, config.n_features, gateway, binding_for(config, config.models.critic, id));
    if (roster.coherence) {
      auto c = critique(narrative, gateway, binding_for(config, config.models.coherence, id));
      rec.coherence = std::move(c.feedback);
      rec.coherence_failure = std::move(c.failure);
    }

    const bool faithful = rec.report && rec.report->is_faithful();
    const bool last = t + 1 >= config.max_rounds;
    rec.stop_flag = last || (!roster.coherence && faithful);

    if (!rec.stop_flag) {
      if (rec.evaluator_failure) {
        rec.warnings.push_back({"NarrativeCarried", "no evaluation this round; narrative carried forward unchanged"});
      } else {
        const std::string& feedback = rec.critic ? rec.critic->body : rec.evaluator_feedback;
        std::optional<std::string> coherence_text;
        if (rec.coherence) coherence_text = rec.coherence->body;
        const auto prompt = build_revision_prompt(base, narrative, feedback, coherence_text);
        narrative = gateway.complete(binding_for(config, config.models.narrator, id).request(PromptRole::narrator, prompt.body)).body;
      }
      origin = NarrativeOrigin::narrator_revised;
    }
    rec.usage = gateway.context_usage(id);
    tr.rounds.push_back(std::move(rec));
    if (tr.rounds.back().stop_flag) break;
  }
  return tr;
}

struct InstanceFailure {
  std::string instance_id;
  std::string message;
};

struct BatchResult {
  std::vector<Transcript> transcripts;  // successful instances, input order
  std::vector<InstanceFailure> failures;
  std::vector<RoundMetrics> metrics;
};

// Per-round metrics with carry-forward: an instance that stopped early (or
// whose evaluation failed this round) contributes its latest report.
inline std::vector<RoundMetrics> batch_metrics(const std::vector<Transcript>& transcripts, int max_rounds, int n) {
  std::vector<RoundMetrics> out;
  for (int r = 0; r < max_rounds; ++r) {
    std::vector<FaithfulnessReport> reports;
    for (const auto& t : transcripts) {
      const FaithfulnessReport* latest = nullptr;
      for (const auto& rec : t.rounds)
        if (rec.round_index <= r && rec.report) latest = &*rec.report;
      if (latest) reports.push_back(*latest);
    }
    if (reports.empty()) continue;
    out.push_back(round_metrics(r, reports, n));
  }
  return out;
}

inline BatchResult run_batch(const RunConfig& config, const std::vector<Instance>& instances, Gateway& gateway) {
  validate(config);
  if (instances.empty()) throw Error(ErrorCode::EmptyBatch, "no instances to run");
  std::set<std::string> ids;
  for (const auto& i : instances)
    if (!ids.insert(i.table.instance_id).second)
      throw Error(ErrorCode::ConfigError, "duplicate instance id '" + i.table.instance_id + "'");

  std::vector<std::optional<Transcript>> slots(instances.size());
  std::vector<std::optional<std::string>> errors(instances.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      try {
        slots[i] = run_instance(config, instances[i].table, instances[i].info, instances[i].baseline, gateway);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), instances.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  BatchResult out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (slots[i])
      out.transcripts.push_back(std::move(*slots[i]));
    else
      out.failures.push_back({instances[i].table.instance_id, errors[i].value_or("unknown failure")});
  }
  out.metrics = batch_metrics(out.transcripts, config.max_rounds, config.n_features);
  return out;
}

}  // namespace shapnarr
