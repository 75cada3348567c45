#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/numfmt.hpp"

namespace shapnarr {

enum class Field { rank, sign, value };

inline std::string_view to_string(Field f) {
  switch (f) {
    case Field::rank: return "rank";
    case Field::sign: return "sign";
    case Field::value: return "value";
  }
  return "?";
}

// Correct-term count over M*n (feature, field) slots; kept as integers so
// callers can compare exactly.
struct AccuracyCount {
  std::int64_t correct = 0;
  std::int64_t total = 0;

  double ratio() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(const AccuracyCount&) const = default;
};

inline bool field_correct(const FeatureCheck& f, Field field) {
  switch (field) {
    case Field::rank: return !f.rank_error;
    case Field::sign: return !f.sign_error;
    case Field::value:
      // unmentioned or unquantified values count as correct
      if (!f.extracted || !f.extracted->value) return true;
      return !f.value_error;
  }
  return false;
}

inline AccuracyCount accuracy_count(const std::vector<FaithfulnessReport>& reports, Field field, int n) {
  if (reports.empty()) throw Error(ErrorCode::EmptyBatch, "no reports to aggregate");
  AccuracyCount c;
  for (const auto& r : reports) {
    if (r.n != n || static_cast<int>(r.features.size()) != n)
      throw Error(ErrorCode::MixedN, "report built with n=" + std::to_string(r.n) + ", expected n=" + std::to_string(n));
    for (const auto& f : r.features) c.correct += field_correct(f, field) ? 1 : 0;
    c.total += n;
  }
  return c;
}

inline double accuracy(const std::vector<FaithfulnessReport>& reports, Field field, int n) {
  return accuracy_count(reports, field, n).ratio();
}

inline double overall(double ra, double sa, double va) { return (ra + sa + va) / 3.0; }

inline int unfaithful_count(const std::vector<FaithfulnessReport>& reports) {
  return static_cast<int>(
      std::count_if(reports.begin(), reports.end(), [](const FaithfulnessReport& r) { return !r.is_faithful(); }));
}

struct RoundMetrics {
  int round_index = 0;
  int M = 0;
  int n = 0;
  double RA = 0.0;
  double SA = 0.0;
  double VA = 0.0;
  double overall = 0.0;
  int unfaithful_count = 0;

  bool operator==(const RoundMetrics&) const = default;
};

inline RoundMetrics round_metrics(int round_index, const std::vector<FaithfulnessReport>& reports, int n) {
  RoundMetrics m;
  m.round_index = round_index;
  m.M = static_cast<int>(reports.size());
  m.n = n;
  m.RA = accuracy(reports, Field::rank, n);
  m.SA = accuracy(reports, Field::sign, n);
  m.VA = accuracy(reports, Field::value, n);
  m.overall = shapnarr::overall(m.RA, m.SA, m.VA);
  m.unfaithful_count = shapnarr::unfaithful_count(reports);
  return m;
}

struct InstabilityStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std_dev = 0.0;  // population
};

inline InstabilityStats instability_stats(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "instability stats need at least one value");
  InstabilityStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

inline constexpr std::string_view kArrow = "\xE2\x86\x92";  // →

inline std::string progression(const std::vector<double>& values, int places = 3) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "empty progression");
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? std::string(kArrow) : "") + format_fixed(values[i], places);
  return out;
}

inline std::string progression(const std::vector<int>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "empty progression");
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? std::string(kArrow) : "") + std::to_string(values[i]);
  return out;
}

struct ProgressionTable {
  std::string RA;
  std::string SA;
  std::string VA;
  std::string overall_final;
  std::string unfaithful;
};

inline ProgressionTable progression_table(const std::vector<RoundMetrics>& rounds) {
  if (rounds.empty()) throw Error(ErrorCode::EmptyInput, "no rounds to tabulate");
  std::vector<double> ra, sa, va;
  std::vector<int> uf;
  for (const auto& r : rounds) {
    ra.push_back(r.RA);
    sa.push_back(r.SA);
    va.push_back(r.VA);
    uf.push_back(r.unfaithful_count);
  }
  return {progression(ra), progression(sa), progression(va), format_fixed(rounds.back().overall, 3), progression(uf)};
}

inline std::string render_text(const ProgressionTable& t) {
  return "RA: " + t.RA + "\nSA: " + t.SA + "\nVA: " + t.VA + "\nOverall (final): " + t.overall_final +
         "\nUnfaithful: " + t.unfaithful + "\n";
}

inline std::string render_csv(const ProgressionTable& t) {
  return "metric,progression\nRA," + t.RA + "\nSA," + t.SA + "\nVA," + t.VA + "\noverall_final," + t.overall_final +
         "\nunfaithful," + t.unfaithful + "\n";
}

// ---- metrics.csv ----

inline constexpr std::string_view kMetricsHeader = "round,RA,SA,VA,overall,unfaithful_count,M,n";

// Full precision (shortest round-trip) so the file reloads bit-exactly.
inline std::string metrics_csv(const std::vector<RoundMetrics>& rounds) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rounds)
    out += std::to_string(r.round_index) + "," + format_number(r.RA) + "," + format_number(r.SA) + "," +
           format_number(r.VA) + "," + format_number(r.overall) + "," + std::to_string(r.unfaithful_count) + "," +
           std::to_string(r.M) + "," + std::to_string(r.n) + "\n";
  return out;
}

inline std::vector<RoundMetrics> parse_metrics_csv(std::string_view text) {
  std::vector<RoundMetrics> out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader)
    throw Error(ErrorCode::SchemaError, "metrics.csv: unexpected header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw Error(ErrorCode::SchemaError, "metrics.csv line " + std::to_string(lineno) + ": expected 8 cells");
    std::vector<double> v;
    for (const auto& c : cells) {
      auto d = parse_number(c);
      if (!d) throw Error(ErrorCode::SchemaError, "metrics.csv line " + std::to_string(lineno) + ": bad number '" + c + "'");
      v.push_back(*d);
    }
    out.push_back({static_cast<int>(v[0]), static_cast<int>(v[6]), static_cast<int>(v[7]), v[1], v[2], v[3], v[4],
                   static_cast<int>(v[5])});
  }
  return out;
}

}  // namespace shapnarr
