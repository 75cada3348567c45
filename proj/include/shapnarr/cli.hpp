#pragma once

// Command implementations behind tools/shapnarr. Each cmd_* returns the process
// exit status and throws Error for configuration / schema problems.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/http_providers.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/metrics.hpp"
#include "shapnarr/orchestrator.hpp"
#include "shapnarr/simlab.hpp"

namespace shapnarr {

namespace fs = std::filesystem;

// ---------------- files ----------------

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + p.string());
}

inline void append_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline nlohmann::json read_json_file(const fs::path& p) {
  const auto bytes = read_file(p);
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, p.string() + ": " + e.what());
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------- run config ----------------

namespace detail {

template <class T>
T config_field(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ConfigError, where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& where = "config") {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + ": top level must be an object");
  RunConfig c;
  c.design = design_from(detail::config_field<std::string>(j, "design", "basic", where));
  c.max_rounds = detail::config_field(j, "max_rounds", 3, where);
  c.n_features = detail::config_field(j, "n_features", 4, where);
  c.max_sentences = detail::config_field(j, "max_sentences", 10, where);
  c.baseline_mode = baseline_mode_from(detail::config_field<std::string>(j, "baseline_mode", "from_file", where));
  c.value_tolerance = detail::config_field(j, "value_tolerance", 1e-6, where);
  c.seed = detail::config_field<std::uint64_t>(j, "seed", 0, where);
  c.workers = detail::config_field(j, "workers", 1, where);
  c.temperature = detail::config_field(j, "temperature", 0.0, where);
  c.run_id = detail::config_field<std::string>(j, "run_id", "", where);
  if (j.contains("models")) {
    const auto& m = j.at("models");
    if (!m.is_object()) throw Error(ErrorCode::ConfigError, where + ": field 'models' must be an object");
    for (const auto& [role, _] : m.items())
      if (role != "narrator" && role != "evaluator" && role != "critic" && role != "coherence")
        throw Error(ErrorCode::ConfigError, where + ": models." + role + " is not an agent role");
    c.models.narrator = detail::config_field<std::string>(m, "narrator", "", where + ".models");
    c.models.evaluator = detail::config_field<std::string>(m, "evaluator", "", where + ".models");
    c.models.critic = detail::config_field<std::string>(m, "critic", "", where + ".models");
    c.models.coherence = detail::config_field<std::string>(m, "coherence", "", where + ".models");
  }
  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    c.ensemble.enabled = detail::config_field(e, "enabled", false, where + ".ensemble");
    c.ensemble.evaluators = detail::config_field<std::vector<std::string>>(e, "evaluators", {}, where + ".ensemble");
    c.ensemble.primary = detail::config_field<std::string>(e, "primary", "", where + ".ensemble");
  }
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"run_id", c.run_id},
          {"design", to_string(c.design)},
          {"max_rounds", c.max_rounds},
          {"n_features", c.n_features},
          {"max_sentences", c.max_sentences},
          {"baseline_mode", to_string(c.baseline_mode)},
          {"ensemble", {{"enabled", c.ensemble.enabled}, {"evaluators", c.ensemble.evaluators}, {"primary", c.ensemble.primary}}},
          {"models",
           {{"narrator", c.models.narrator},
            {"evaluator", c.models.evaluator},
            {"critic", c.models.critic},
            {"coherence", c.models.coherence}}},
          {"value_tolerance", c.value_tolerance},
          {"seed", c.seed},
          {"workers", c.workers},
          {"temperature", c.temperature}};
}

inline std::set<std::string> referenced_models(const RunConfig& c) {
  std::set<std::string> out;
  const auto roster = roster_of(c.design);
  out.insert(c.models.narrator);
  if (c.ensemble.enabled)
    out.insert(c.ensemble.evaluators.begin(), c.ensemble.evaluators.end());
  else
    out.insert(c.models.evaluator);
  if (roster.llm_critic) out.insert(c.models.critic);
  if (roster.coherence) out.insert(c.models.coherence);
  out.erase("");
  return out;
}

// ---------------- providers ----------------

inline RetryPolicy retry_policy_from_json(const nlohmann::json& j, std::uint64_t seed) {
  RetryPolicy r;
  r.seed = seed;
  if (j.is_null()) return r;
  r.max_retries = detail::config_field(j, "max_retries", r.max_retries, "config.retry");
  r.jitter = detail::config_field(j, "jitter", r.jitter, "config.retry");
  if (j.contains("backoff_ms")) {
    r.backoff.clear();
    for (auto ms : detail::config_field<std::vector<std::int64_t>>(j, "backoff_ms", {}, "config.retry"))
      r.backoff.emplace_back(ms);
  }
  return r;
}

inline std::shared_ptr<Provider> provider_from_json(const std::string& model_id, const nlohmann::json& p,
                                                    const fs::path& base_dir, std::uint64_t seed) {
  const std::string where = "config.providers." + model_id;
  const auto kind = detail::config_field<std::string>(p, "kind", "", where);
  if (kind == "simlab") {
    SimlabOptions o;
    o.reviser = reviser_policy_from_json(p);
    o.seed = seed ^ detail::config_field<std::uint64_t>(p, "seed", 0, where);
    o.coherence_reply = detail::config_field<std::string>(p, "coherence_reply", o.coherence_reply, where);
    return make_simlab_provider(o, model_id);
  }
  if (kind == "scripted") {
    const auto file = detail::config_field<std::string>(p, "fixtures", "", where);
    if (file.empty()) throw Error(ErrorCode::ConfigError, where + ": scripted provider needs 'fixtures'");
    return scripted_provider_from_json(read_json_file(base_dir / file), model_id);
  }
  if (kind == "echo") return std::make_shared<EchoProvider>();
  if (kind == "openai" || kind == "anthropic") {
    HttpProviderConfig h;
    h.format = kind == "openai" ? WireFormat::openai_chat : WireFormat::anthropic_messages;
    h.base_url = detail::config_field<std::string>(p, "base_url",
                                                   kind == "openai" ? "https://api.openai.com" : "https://api.anthropic.com", where);
    h.path = detail::config_field<std::string>(p, "path", "", where);
    h.model = detail::config_field<std::string>(p, "model", model_id, where);
    h.api_key_env = detail::config_field<std::string>(p, "api_key_env", "", where);
    h.timeout = std::chrono::seconds(detail::config_field(p, "timeout_s", 120, where));
    return std::make_shared<HttpChatProvider>(h);
  }
  throw Error(ErrorCode::ConfigError, where + ": unknown provider kind '" + kind + "'");
}

inline std::unique_ptr<Gateway> gateway_from_config(const nlohmann::json& j, const RunConfig& c, const fs::path& base_dir,
                                                    Sleeper sleeper = real_sleeper()) {
  auto g = std::make_unique<Gateway>(retry_policy_from_json(j.value("retry", nlohmann::json()), c.seed), std::move(sleeper));
  const auto providers = j.value("providers", nlohmann::json::object());
  for (const auto& model : referenced_models(c)) {
    if (!providers.contains(model))
      throw Error(ErrorCode::ConfigError, "config.providers: no provider for model '" + model + "'");
    const auto& p = providers.at(model);
    ProviderLimits limits;
    if (p.contains("limits")) {
      const auto& l = p.at("limits");
      limits.max_concurrent = detail::config_field(l, "max_concurrent", limits.max_concurrent, "limits");
      limits.requests_per_second = detail::config_field(l, "requests_per_second", limits.requests_per_second, "limits");
      limits.burst = detail::config_field(l, "burst", limits.burst, "limits");
    }
    g->register_model(model, provider_from_json(model, p, base_dir, c.seed), limits);
  }
  if (j.contains("prices")) g->ledger().set_prices(price_table_from_json(j.at("prices")));
  return g;
}

// ---------------- inputs ----------------

struct TableFile {
  fs::path path;
  ShapTable table;
  Warnings warnings;
};

struct TableCorpus {
  std::vector<TableFile> tables;  // sorted by file name
  std::map<std::string, DatasetInfo> datasets;
  Warnings warnings;
};

// Tables are the *.json files directly in `dir`; dataset info lives in
// dir/datasets/<dataset_id>.json.
inline TableCorpus load_table_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "tables directory " + dir.string() + " does not exist");
  TableCorpus c;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      auto load = load_shap_table(read_file(f));
      c.tables.push_back({f, std::move(load.table), std::move(load.warnings)});
    } catch (const Error& e) {
      throw Error(e.code(), f.string() + ": " + e.what());
    }
  }
  for (const auto& t : c.tables) {
    const auto& ds = t.table.dataset_id;
    if (c.datasets.count(ds)) continue;
    const auto info_path = dir / "datasets" / (ds + ".json");
    if (fs::exists(info_path)) {
      try {
        c.datasets[ds] = load_dataset_info(read_file(info_path));
      } catch (const Error& e) {
        throw Error(e.code(), info_path.string() + ": " + e.what());
      }
    } else {
      c.warnings.push_back({"DatasetInfoFromTable", "no " + info_path.string() + "; descriptions taken from table rows"});
      c.datasets[ds] = dataset_info_from_table(t.table);
    }
  }
  return c;
}

inline std::map<std::string, std::string> load_baselines(const fs::path& p) {
  const auto j = read_json_file(p);
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, p.string() + ": baselines must map instance_id to narrative");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaError, p.string() + ": baseline for '" + k + "' is not a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

// ---------------- run ----------------

struct RunOverrides {
  std::optional<std::string> design;
  std::optional<int> max_rounds;
  std::optional<int> n_features;
  std::optional<bool> ensemble;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models;  // role=model_id
};

inline void apply_overrides(RunConfig& c, const RunOverrides& o) {
  if (o.design) c.design = design_from(*o.design);
  if (o.max_rounds) c.max_rounds = *o.max_rounds;
  if (o.n_features) c.n_features = *o.n_features;
  if (o.ensemble) c.ensemble.enabled = *o.ensemble;
  if (o.seed) c.seed = *o.seed;
  for (const auto& m : o.models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--models expects role=model_id, got '" + m + "'");
    const auto role = m.substr(0, eq);
    const auto id = m.substr(eq + 1);
    if (role == "narrator")
      c.models.narrator = id;
    else if (role == "evaluator")
      c.models.evaluator = id;
    else if (role == "critic")
      c.models.critic = id;
    else if (role == "coherence")
      c.models.coherence = id;
    else
      throw Error(ErrorCode::ConfigError, "--models: unknown role '" + role + "'");
  }
}

struct RunPaths {
  fs::path dir;
  fs::path transcripts;
  fs::path metrics;
  fs::path manifest;
};

inline RunPaths run_paths(const fs::path& dir) {
  return {dir, dir / "transcripts.jsonl", dir / "metrics.csv", dir / "manifest.json"};
}

inline int cmd_run(const fs::path& config_path, const fs::path& tables_dir, const std::optional<fs::path>& baselines_path,
                   const fs::path& out_dir, const RunOverrides& overrides = {}, std::ostream& log = std::cerr,
                   Sleeper sleeper = real_sleeper()) {
  const auto started = utc_timestamp();
  const auto raw = read_json_file(config_path);
  auto config = run_config_from_json(raw, config_path.string());
  apply_overrides(config, overrides);
  if (config.run_id.empty()) config.run_id = std::string(to_string(config.design)) + "-seed" + std::to_string(config.seed);
  validate(config);

  std::optional<fs::path> baselines = baselines_path;
  if (!baselines && raw.contains("baselines") && raw.at("baselines").is_string())
    baselines = config_path.parent_path() / raw.at("baselines").get<std::string>();
  if (config.baseline_mode == BaselineMode::from_file && !baselines)
    throw Error(ErrorCode::ConfigError, config_path.string() + ": baseline_mode from_file needs --baselines or a 'baselines' field");

  const auto corpus = load_table_corpus(tables_dir);
  if (corpus.tables.empty()) throw Error(ErrorCode::EmptyBatch, "no *.json tables in " + tables_dir.string());
  std::map<std::string, std::string> narratives;
  if (config.baseline_mode == BaselineMode::from_file) narratives = load_baselines(*baselines);

  std::vector<Instance> instances;
  for (const auto& tf : corpus.tables) {
    Instance inst{tf.table, corpus.datasets.at(tf.table.dataset_id), std::nullopt};
    if (config.baseline_mode == BaselineMode::from_file) {
      auto it = narratives.find(tf.table.instance_id);
      if (it == narratives.end())
        throw Error(ErrorCode::ConfigError, baselines->string() + ": no baseline for instance '" + tf.table.instance_id + "'");
      inst.baseline = it->second;
    }
    instances.push_back(std::move(inst));
  }

  const auto paths = run_paths(out_dir / config.run_id);
  if (fs::exists(paths.dir)) throw Error(ErrorCode::RunExists, "run directory " + paths.dir.string() + " already exists");

  auto gateway = gateway_from_config(raw, config, config_path.parent_path(), std::move(sleeper));
  const auto result = run_batch(config, instances, *gateway);

  fs::create_directories(paths.dir);
  for (const auto& t : result.transcripts) append_file(paths.transcripts, transcript_lines(t));
  if (result.transcripts.empty()) write_file(paths.transcripts, "");
  write_file(paths.metrics, metrics_csv(result.metrics));

  nlohmann::json inventory = {{"tables", nlohmann::json::array()}, {"datasets", nlohmann::json::array()}};
  for (const auto& tf : corpus.tables)
    inventory["tables"].push_back(
        {{"file", tf.path.filename().string()}, {"dataset_id", tf.table.dataset_id}, {"instance_id", tf.table.instance_id}});
  for (const auto& [ds, _] : corpus.datasets) inventory["datasets"].push_back(ds);
  if (baselines) inventory["baselines"] = baselines->string();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) failures.push_back({{"instance_id", f.instance_id}, {"message", f.message}});
  nlohmann::json load_warnings = warnings_json(corpus.warnings);
  for (const auto& tf : corpus.tables)
    for (const auto& w : tf.warnings)
      load_warnings.push_back({{"code", w.code}, {"message", tf.path.filename().string() + ": " + w.message}});
  const auto total = gateway->ledger().total_usage(config.run_id);
  const nlohmann::json manifest = {
      {"run_id", config.run_id},
      {"config", to_json(config)},
      {"config_path", config_path.string()},
      {"inventory", std::move(inventory)},
      {"started_at", started},
      {"finished_at", utc_timestamp()},
      {"ledger",
       {{"buckets", gateway->ledger().to_json()},
        {"total_usage", to_json(total)},
        {"total_cost", gateway->ledger().total_cost(config.run_id)}}},
      {"template_version", templates::kVersion},
      {"instances", instances.size()},
      {"failures", std::move(failures)},
      {"load_warnings", std::move(load_warnings)}};
  write_file(paths.manifest, manifest.dump(2) + "\n");

  log << "run " << config.run_id << ": " << result.transcripts.size() << " instance(s) completed, "
      << result.failures.size() << " failed\n";
  for (const auto& f : result.failures) log << "  " << f.instance_id << ": " << f.message << "\n";
  if (!result.metrics.empty()) log << render_text(progression_table(result.metrics));
  log << "wrote " << paths.dir.string() << "\n";
  return result.failures.empty() ? 0 : 1;
}

// ---------------- report ----------------

struct LoadedRun {
  fs::path dir;
  nlohmann::json manifest;
  std::vector<RoundMetrics> metrics;
  std::vector<Transcript> transcripts;

  std::string run_id() const { return manifest.value("run_id", dir.filename().string()); }
};

inline LoadedRun load_run(const fs::path& dir) {
  const auto p = run_paths(dir);
  LoadedRun r;
  r.dir = dir;
  r.manifest = read_json_file(p.manifest);
  r.metrics = parse_metrics_csv(read_file(p.metrics));
  r.transcripts = parse_transcripts(read_file(p.transcripts));
  return r;
}

// Latest annotation per (instance, round), counted by category.
inline std::map<std::string, int> category_counts(const std::vector<Transcript>& transcripts) {
  std::map<std::string, int> out;
  for (const auto& c : problem_categories()) out[c] = 0;
  for (const auto& t : transcripts) {
    std::set<int> rounds;
    for (const auto& a : t.annotations) rounds.insert(a.round_index);
    for (int r : rounds) ++out[t.annotation_for(r)->category];
  }
  return out;
}

inline std::string report_long_csv(const std::vector<LoadedRun>& runs) {
  std::string out = "round,metric,value,run\n";
  for (const auto& run : runs)
    for (const auto& m : run.metrics) {
      const std::pair<const char*, double> cells[] = {{"RA", m.RA}, {"SA", m.SA}, {"VA", m.VA}, {"overall", m.overall},
                                                      {"unfaithful_count", static_cast<double>(m.unfaithful_count)}};
      for (const auto& [name, v] : cells)
        out += std::to_string(m.round_index) + "," + name + "," + format_number(v) + "," + run.run_id() + "\n";
    }
  return out;
}

inline std::string report_text(const std::vector<LoadedRun>& runs, bool paired) {
  std::ostringstream out;
  for (const auto& run : runs) {
    const auto& cfg = run.manifest.value("config", nlohmann::json::object());
    const auto ens = cfg.value("ensemble", nlohmann::json::object());
    out << "== " << run.run_id() << " (design " << cfg.value("design", "?");
    if (ens.value("enabled", false)) {
      std::string panel;
      for (const auto& e : ens.value("evaluators", std::vector<std::string>{})) panel += (panel.empty() ? "" : ",") + e;
      out << ", ensemble " << panel << " primary " << ens.value("primary", "?");
    } else {
      out << ", evaluator " << cfg.value("models", nlohmann::json::object()).value("evaluator", "?");
    }
    out << ")\n";
    if (run.metrics.empty())
      out << "(no metrics)\n";
    else
      out << render_text(progression_table(run.metrics));
    const auto counts = category_counts(run.transcripts);
    out << "Categories:";
    for (const auto& [c, k] : counts) out << " " << c << "=" << k;
    out << "\n\n";
  }

  std::size_t rounds = 0;
  for (const auto& run : runs) rounds = std::max(rounds, run.metrics.size());
  auto cell = [](const LoadedRun& run, std::size_t r, auto pick) {
    return r < run.metrics.size() ? format_fixed(pick(run.metrics[r]), 3) : std::string("-");
  };
  if (paired && runs.size() == 2) {
    out << "round | RA (o|e) | SA (o|e) | VA (o|e) | overall (o|e)\n";
    for (std::size_t r = 0; r < rounds; ++r) {
      out << r;
      for (auto pick : {+[](const RoundMetrics& m) { return m.RA; }, +[](const RoundMetrics& m) { return m.SA; },
                        +[](const RoundMetrics& m) { return m.VA; }, +[](const RoundMetrics& m) { return m.overall; }})
        out << " | " << cell(runs[0], r, pick) << "|" << cell(runs[1], r, pick);
      out << "\n";
    }
  } else {
    out << "round";
    for (const auto& run : runs) out << " | " << run.run_id() << " overall";
    out << "\n";
    for (std::size_t r = 0; r < rounds; ++r) {
      out << r;
      for (const auto& run : runs) out << " | " << cell(run, r, [](const RoundMetrics& m) { return m.overall; });
      out << "\n";
    }
  }
  return out.str();
}

inline int cmd_report(const std::vector<fs::path>& run_dirs, const std::optional<fs::path>& csv_out, bool paired,
                      std::ostream& out = std::cout) {
  if (run_dirs.empty()) throw Error(ErrorCode::EmptyInput, "report needs at least one run directory");
  std::vector<LoadedRun> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));
  out << report_text(runs, paired);
  if (csv_out) write_file(*csv_out, report_long_csv(runs));
  return 0;
}

// ---------------- annotate ----------------

inline int cmd_annotate(const fs::path& run_dir, const std::string& instance_id, int round, const std::string& category,
                        const std::string& note) {
  if (!problem_categories().count(category))
    throw Error(ErrorCode::InvalidCategory, "category must be one of C1..C5 or none, got '" + category + "'");
  const auto paths = run_paths(run_dir);
  const auto transcripts = parse_transcripts(read_file(paths.transcripts));
  std::int64_t seq = 0;
  const Transcript* target = nullptr;
  for (const auto& t : transcripts) {
    for (const auto& a : t.annotations) seq = std::max(seq, a.seq);
    if (t.instance_id == instance_id) target = &t;
  }
  if (!target) throw Error(ErrorCode::ConfigError, "no instance '" + instance_id + "' in " + paths.transcripts.string());
  if (round < 0 || round >= static_cast<int>(target->rounds.size()))
    throw Error(ErrorCode::ConfigError, "instance '" + instance_id + "' has no round " + std::to_string(round));
  Transcript line;
  line.instance_id = target->instance_id;
  line.run_id = target->run_id;
  line.annotations.push_back({round, category, note, seq + 1});
  append_file(paths.transcripts, transcript_lines(line));
  return 0;
}

// ---------------- simgen / synth ----------------

inline int cmd_simgen(const fs::path& plan_dir, const fs::path& tables_dir, const fs::path& out, int n,
                      std::ostream& log = std::cerr) {
  const auto corpus = load_table_corpus(tables_dir);
  std::map<std::string, FaultPlan> plans;
  if (fs::is_directory(plan_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(plan_dir))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        auto p = fault_plan_from_json(read_json_file(f));
        if (!plans.emplace(p.instance_id, p).second)
          throw Error(ErrorCode::InvalidPlan, "second plan for instance '" + p.instance_id + "'");
      } catch (const Error& e) {
        throw Error(e.code(), f.string() + ": " + e.what());
      }
    }
  } else {
    throw Error(ErrorCode::IoError, "plan directory " + plan_dir.string() + " does not exist");
  }
  nlohmann::json baselines = nlohmann::json::object();
  int faulty = 0;
  for (const auto& tf : corpus.tables) {
    FaultPlan plan;
    auto it = plans.find(tf.table.instance_id);
    if (it != plans.end()) plan = it->second;
    try {
      baselines[tf.table.instance_id] = render_templated_narrative(tf.table, n, plan);
    } catch (const Error& e) {
      throw Error(e.code(), "plan for " + tf.table.instance_id + ": " + e.what());
    }
    if (!plan.empty()) ++faulty;
  }
  for (const auto& [id, _] : plans)
    if (!baselines.contains(id)) throw Error(ErrorCode::InvalidPlan, "plan names unknown instance '" + id + "'");
  write_file(out, baselines.dump(2) + "\n");
  log << "wrote " << corpus.tables.size() << " baseline(s), " << faulty << " with faults, to " << out.string() << "\n";
  return 0;
}

// Synthetic tables (tables/ + tables/datasets/) and fault plans (plans/).
inline int cmd_synth(const fs::path& out_dir, int count, int faulty, int rows, int n, std::uint64_t seed,
                     std::ostream& log = std::cerr) {
  const auto corpus = synthetic_corpus(count, faulty, rows, n, seed);
  fs::create_directories(out_dir / "tables" / "datasets");
  fs::create_directories(out_dir / "plans");
  for (const auto& t : corpus.tables) write_file(out_dir / "tables" / (t.instance_id + ".json"), serialize_shap_table(t));
  write_file(out_dir / "tables" / "datasets" / "synth.json", to_json(corpus.info).dump(2) + "\n");
  for (const auto& p : corpus.plans)
    if (!p.empty()) write_file(out_dir / "plans" / (p.instance_id + ".json"), to_json(p).dump(2) + "\n");
  log << "wrote " << count << " table(s) and " << faulty << " fault plan(s) under " << out_dir.string() << "\n";
  return 0;
}

}  // namespace shapnarr
