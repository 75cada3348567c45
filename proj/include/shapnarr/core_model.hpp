#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shapnarr/errors.hpp"

namespace shapnarr {

struct FeatureRow {
  std::string feature_name;
  double shap_value = 0.0;     // attribution toward class 1
  double feature_value = 0.0;  // dummy-encoded discrete features are 0 or 1
  double feature_average = 0.0;
  std::string feature_description;

  bool operator==(const FeatureRow&) const = default;
};

// Ground-truth attributions for one instance. Rows are ordered by |shap_value|,
// most important first; row index is the true rank.
struct ShapTable {
  std::string dataset_id;
  std::string instance_id;
  int predicted_class = 0;
  double probability_class1 = 0.0;
  std::vector<FeatureRow> rows;

  bool operator==(const ShapTable&) const = default;

  const FeatureRow* find(std::string_view name) const {
    for (const auto& r : rows)
      if (r.feature_name == name) return &r;
    return nullptr;
  }

  std::optional<std::size_t> rank_of(std::string_view name) const {
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].feature_name == name) return i;
    return std::nullopt;
  }
};

struct DatasetInfo {
  std::string dataset_description;
  std::string target_description;
  std::string task_description;
  std::vector<std::pair<std::string, std::string>> feature_descriptions;

  bool operator==(const DatasetInfo&) const = default;

  const std::string* description_of(std::string_view name) const {
    for (const auto& [n, d] : feature_descriptions)
      if (n == name) return &d;
    return nullptr;
  }
};

enum class NarrativeOrigin { baseline_file, narrator_generated, narrator_revised };

inline std::string_view to_string(NarrativeOrigin o) {
  switch (o) {
    case NarrativeOrigin::baseline_file: return "baseline_file";
    case NarrativeOrigin::narrator_generated: return "narrator_generated";
    case NarrativeOrigin::narrator_revised: return "narrator_revised";
  }
  return "?";
}

inline NarrativeOrigin narrative_origin_from(std::string_view s) {
  if (s == "baseline_file") return NarrativeOrigin::baseline_file;
  if (s == "narrator_generated") return NarrativeOrigin::narrator_generated;
  if (s == "narrator_revised") return NarrativeOrigin::narrator_revised;
  throw Error(ErrorCode::SchemaError, "unknown narrative origin '" + std::string(s) + "'");
}

// Round 0 is the pre-refinement narrative.
struct NarrativeRecord {
  std::string instance_id;
  int round_index = 0;
  std::string body;
  NarrativeOrigin origin = NarrativeOrigin::baseline_file;

  NarrativeRecord(std::string instance, int round, std::string text, NarrativeOrigin from)
      : instance_id(std::move(instance)), round_index(round), body(std::move(text)), origin(from) {
    if (body.empty()) throw Error(ErrorCode::EmptyNarrative, "narrative body is empty");
    if (round_index < 0) throw Error(ErrorCode::SchemaError, "negative round index");
    if (round_index == 0 && origin == NarrativeOrigin::narrator_revised)
      throw Error(ErrorCode::SchemaError, "round 0 narrative cannot be a revision");
  }

  bool operator==(const NarrativeRecord&) const = default;
};

// Sign convention for the ground truth. The zero case has no natural answer;
// by default an exact 0.0 attribution counts as a positive influence.
struct SignRule {
  bool zero_is_positive = true;

  int sign_of(double shap) const {
    if (shap > 0.0) return 1;
    if (shap < 0.0) return -1;
    return zero_is_positive ? 1 : -1;
  }
};

struct GroundTruthEntry {
  std::string feature_name;
  int rank = 0;
  int sign = 1;
  double value = 0.0;

  bool operator==(const GroundTruthEntry&) const = default;
};

// First n rows as (name, r*, s*, v*).
inline std::vector<GroundTruthEntry> ground_truth(const ShapTable& table, int n, SignRule rule = {}) {
  if (n < 1) throw Error(ErrorCode::NTooLarge, "n must be at least 1, got " + std::to_string(n));
  if (static_cast<std::size_t>(n) > table.rows.size())
    throw Error(ErrorCode::NTooLarge, "n=" + std::to_string(n) + " exceeds table size " +
                                          std::to_string(table.rows.size()));
  std::vector<GroundTruthEntry> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    out.push_back({row.feature_name, i, rule.sign_of(row.shap_value), row.feature_value});
  }
  return out;
}

struct TableLoad {
  ShapTable table;
  Warnings warnings;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::SchemaError, where + ": missing field '" + key + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw Error(ErrorCode::SchemaError, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw Error(ErrorCode::SchemaError, where + ": field '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(ErrorCode::SchemaError, where + ": field '" + key + "' must be finite");
  return d;
}

inline nlohmann::json parse_json(std::string_view bytes, const std::string& what) {
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, what + ": malformed JSON: " + e.what());
  }
}

}  // namespace detail

// Checks every ShapTable invariant except ordering.
inline void validate_rows(const ShapTable& table) {
  if (table.rows.empty()) throw Error(ErrorCode::EmptyTable, "table '" + table.instance_id + "' has no rows");
  std::unordered_set<std::string> seen;
  for (const auto& r : table.rows) {
    if (r.feature_name.empty()) throw Error(ErrorCode::SchemaError, "empty feature_name");
    if (!std::isfinite(r.shap_value) || !std::isfinite(r.feature_value) || !std::isfinite(r.feature_average))
      throw Error(ErrorCode::SchemaError, "non-finite number in row '" + r.feature_name + "'");
    if (!seen.insert(r.feature_name).second)
      throw Error(ErrorCode::DuplicateFeature, "feature '" + r.feature_name + "' appears twice");
  }
  if (table.predicted_class != 0 && table.predicted_class != 1)
    throw Error(ErrorCode::SchemaError, "predicted_class must be 0 or 1");
  if (!(table.probability_class1 >= 0.0 && table.probability_class1 <= 1.0))
    throw Error(ErrorCode::SchemaError, "probability_class1 must lie in [0,1]");
}

inline bool rows_sorted(const ShapTable& table) {
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (std::fabs(table.rows[i].shap_value) > std::fabs(table.rows[i - 1].shap_value)) return false;
  return true;
}

// Stable: equal |shap_value| keeps file order.
inline void sort_rows(ShapTable& table) {
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
    return std::fabs(a.shap_value) > std::fabs(b.shap_value);
  });
}

inline ShapTable shap_table_from_json(const nlohmann::json& j, Warnings* warnings = nullptr) {
  const std::string where = "shap table";
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, where + ": top level must be an object");
  ShapTable t;
  t.dataset_id = detail::require_string(j, "dataset_id", where);
  t.instance_id = detail::require_string(j, "instance_id", where);
  const auto& cls = detail::require(j, "predicted_class", where);
  if (!cls.is_number_integer()) throw Error(ErrorCode::SchemaError, where + ": 'predicted_class' must be an integer");
  t.predicted_class = cls.get<int>();
  t.probability_class1 = detail::require_number(j, "probability_class1", where);
  const auto& rows = detail::require(j, "rows", where);
  if (!rows.is_array()) throw Error(ErrorCode::SchemaError, where + ": 'rows' must be an array");
  std::size_t idx = 0;
  for (const auto& r : rows) {
    const std::string rw = where + " rows[" + std::to_string(idx++) + "]";
    if (!r.is_object()) throw Error(ErrorCode::SchemaError, rw + ": must be an object");
    FeatureRow row;
    row.feature_name = detail::require_string(r, "feature_name", rw);
    row.shap_value = detail::require_number(r, "shap_value", rw);
    row.feature_value = detail::require_number(r, "feature_value", rw);
    row.feature_average = detail::require_number(r, "feature_average", rw);
    row.feature_description = detail::require_string(r, "feature_description", rw);
    t.rows.push_back(std::move(row));
  }
  validate_rows(t);
  if (!rows_sorted(t)) {
    sort_rows(t);
    if (warnings)
      warnings->push_back({"RowsResorted", "rows of '" + t.instance_id + "' re-sorted by |shap_value| descending"});
  }
  return t;
}

inline TableLoad load_shap_table(std::string_view bytes) {
  TableLoad out;
  out.table = shap_table_from_json(detail::parse_json(bytes, "shap table"), &out.warnings);
  return out;
}

inline nlohmann::json to_json(const ShapTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"feature_name", r.feature_name},
                    {"shap_value", r.shap_value},
                    {"feature_value", r.feature_value},
                    {"feature_average", r.feature_average},
                    {"feature_description", r.feature_description}});
  }
  return {{"dataset_id", t.dataset_id},
          {"instance_id", t.instance_id},
          {"predicted_class", t.predicted_class},
          {"probability_class1", t.probability_class1},
          {"rows", std::move(rows)}};
}

inline std::string serialize_shap_table(const ShapTable& t) { return to_json(t).dump(2) + "\n"; }

inline DatasetInfo dataset_info_from_json(const nlohmann::json& j) {
  const std::string where = "dataset info";
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, where + ": top level must be an object");
  DatasetInfo info;
  info.dataset_description = detail::require_string(j, "dataset_description", where);
  info.target_description = detail::require_string(j, "target_description", where);
  info.task_description = detail::require_string(j, "task_description", where);
  const auto& fd = detail::require(j, "feature_descriptions", where);
  if (!fd.is_array()) throw Error(ErrorCode::SchemaError, where + ": 'feature_descriptions' must be an array");
  for (const auto& e : fd) {
    if (!e.is_object()) throw Error(ErrorCode::SchemaError, where + ": feature description must be an object");
    info.feature_descriptions.emplace_back(detail::require_string(e, "feature_name", where),
                                           detail::require_string(e, "feature_desc", where));
  }
  return info;
}

inline DatasetInfo load_dataset_info(std::string_view bytes) {
  return dataset_info_from_json(detail::parse_json(bytes, "dataset info"));
}

inline nlohmann::json to_json(const DatasetInfo& info) {
  nlohmann::json fd = nlohmann::json::array();
  for (const auto& [n, d] : info.feature_descriptions) fd.push_back({{"feature_name", n}, {"feature_desc", d}});
  return {{"dataset_description", info.dataset_description},
          {"target_description", info.target_description},
          {"task_description", info.task_description},
          {"feature_descriptions", std::move(fd)}};
}

// Fallback when no dataset file exists: descriptions come from the table itself.
inline DatasetInfo dataset_info_from_table(const ShapTable& t) {
  DatasetInfo info;
  for (const auto& r : t.rows) info.feature_descriptions.emplace_back(r.feature_name, r.feature_description);
  return info;
}

}  // namespace shapnarr
