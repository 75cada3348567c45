#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shapnarr/errors.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/llm_gateway.hpp"

namespace shapnarr {

struct VotePanel {
  std::vector<ExtractionRecord> extractions;  // one per evaluator identity
  std::vector<std::string> evaluator_ids;
  std::string designated_primary;
};

struct VoteResult {
  ExtractionRecord record;     // repaired consensus
  ExtractionRecord consensus;  // field-level winners before rank repair
  Warnings warnings;
};

inline void validate(const VotePanel& p) {
  if (p.extractions.size() < 2)
    throw Error(ErrorCode::PanelTooSmall, "a vote needs at least 2 extractions, got " + std::to_string(p.extractions.size()));
  if (p.evaluator_ids.size() != p.extractions.size())
    throw Error(ErrorCode::ConfigError, "panel has " + std::to_string(p.extractions.size()) + " extractions but " +
                                            std::to_string(p.evaluator_ids.size()) + " evaluator ids");
  std::set<std::string> ids(p.evaluator_ids.begin(), p.evaluator_ids.end());
  if (ids.size() != p.evaluator_ids.size()) throw Error(ErrorCode::ConfigError, "duplicate evaluator id in panel");
  if (!ids.count(p.designated_primary))
    throw Error(ErrorCode::ConfigError, "designated primary '" + p.designated_primary + "' is not on the panel");
}

namespace detail {

// One voter's ballot for one feature.
struct Ballot {
  const std::string* voter;
  const ExtractionEntry* entry;
};

// Candidate groups for one field. `same` decides membership; groups are built
// over ballots sorted by key so the result does not depend on panel order.
template <class Key, class Same>
std::vector<std::vector<const Ballot*>> group_ballots(const std::vector<Ballot>& ballots, Key key, Same same) {
  std::vector<const Ballot*> sorted;
  for (const auto& b : ballots) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(), [&](const Ballot* a, const Ballot* b) {
    const auto ka = key(*a), kb = key(*b);
    if (ka != kb) return ka < kb;
    return *a->voter < *b->voter;
  });
  std::vector<std::vector<const Ballot*>> groups;
  for (const auto* b : sorted) {
    if (!groups.empty() && same(*groups.back().back(), *b))
      groups.back().push_back(b);
    else
      groups.push_back({b});
  }
  return groups;
}

// Strict majority, else the primary's group, else the biggest group (ties to
// the group holding the alphabetically first voter). Returns the ballot whose
// field is taken.
inline const Ballot* pick(const std::vector<std::vector<const Ballot*>>& groups, std::size_t voters,
                          const std::string& primary) {
  auto representative = [&](const std::vector<const Ballot*>& g) {
    for (const auto* b : g)
      if (*b->voter == primary) return b;
    return *std::min_element(g.begin(), g.end(), [](const Ballot* a, const Ballot* b) { return *a->voter < *b->voter; });
  };
  for (const auto& g : groups)
    if (g.size() * 2 > voters) return representative(g);
  for (const auto& g : groups)
    for (const auto* b : g)
      if (*b->voter == primary) return b;
  const std::vector<const Ballot*>* best = nullptr;
  for (const auto& g : groups) {
    if (!best || g.size() > best->size() ||
        (g.size() == best->size() && *representative(g)->voter < *representative(*best)->voter))
      best = &g;
  }
  return representative(*best);
}

}  // namespace detail

// Field-level majority vote. Invariant under panel order: every tie-break goes
// through evaluator identity, never position.
inline VoteResult vote(const VotePanel& panel, double value_tolerance = 1e-6) {
  validate(panel);
  const std::size_t k = panel.extractions.size();
  std::set<std::string> universe;
  for (const auto& r : panel.extractions)
    for (const auto& e : r.entries) universe.insert(e.feature_name);

  VoteResult out;
  for (const auto& name : universe) {
    std::vector<detail::Ballot> ballots;
    bool primary_has = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (const auto* e = panel.extractions[i].find(name)) {
        ballots.push_back({&panel.evaluator_ids[i], e});
        if (panel.evaluator_ids[i] == panel.designated_primary) primary_has = true;
      }
    }
    const std::size_t present = ballots.size();
    const std::size_t absent = k - present;
    const bool keep = present > absent || (present == absent && primary_has);
    if (!keep) continue;

    ExtractionEntry e;
    e.feature_name = name;
    const auto rank_groups = detail::group_ballots(
        ballots, [](const detail::Ballot& b) { return b.entry->rank; },
        [](const detail::Ballot& a, const detail::Ballot& b) { return a.entry->rank == b.entry->rank; });
    e.rank = detail::pick(rank_groups, present, panel.designated_primary)->entry->rank;

    const auto sign_groups = detail::group_ballots(
        ballots, [](const detail::Ballot& b) { return b.entry->sign; },
        [](const detail::Ballot& a, const detail::Ballot& b) { return a.entry->sign == b.entry->sign; });
    e.sign = detail::pick(sign_groups, present, panel.designated_primary)->entry->sign;

    // Values: null is its own candidate; numbers chain-cluster within tolerance.
    const auto value_key = [](const detail::Ballot& b) {
      return b.entry->value ? std::make_pair(1, *b.entry->value) : std::make_pair(0, 0.0);
    };
    const auto value_groups = detail::group_ballots(ballots, value_key, [&](const detail::Ballot& a, const detail::Ballot& b) {
      if (!a.entry->value || !b.entry->value) return !a.entry->value && !b.entry->value;
      return std::fabs(*b.entry->value - *a.entry->value) <= value_tolerance;
    });
    e.value = detail::pick(value_groups, present, panel.designated_primary)->entry->value;

    // assumption is not scored; keep the primary's wording when it has one
    const detail::Ballot* source = nullptr;
    for (const auto& b : ballots)
      if (!source || *b.voter == panel.designated_primary ||
          (*source->voter != panel.designated_primary && *b.voter < *source->voter))
        source = &b;
    e.assumption = source->entry->assumption;
    out.consensus.entries.push_back(std::move(e));
  }

  std::stable_sort(out.consensus.entries.begin(), out.consensus.entries.end(),
                   [](const ExtractionEntry& a, const ExtractionEntry& b) {
                     return std::tie(a.rank, a.feature_name) < std::tie(b.rank, b.feature_name);
                   });
  out.record = out.consensus;
  if (reindex_ranks(out.record))
    out.warnings.push_back({"RankRepaired", "consensus ranks collided or skipped; re-indexed"});
  return out;
}

// ---------------- ensemble extraction ----------------

struct EnsembleEvaluation {
  std::vector<ExtractionAttempt> attempts;  // in panel order
  std::optional<VoteResult> vote;
  std::optional<ExtractionRecord> record;   // what compare() should see
  Warnings warnings;
  std::optional<std::string> failure;
};

// Fans the k extraction calls out concurrently, then votes over the ones that parsed.
inline EnsembleEvaluation ensemble_extract(std::string_view narrative, const DatasetInfo& info, Gateway& gateway,
                                           const std::vector<AgentBinding>& panel, const std::string& primary,
                                           double value_tolerance) {
  std::vector<std::future<ExtractionAttempt>> futures;
  futures.reserve(panel.size());
  const std::string text(narrative);
  for (const auto& b : panel)
    futures.push_back(std::async(std::launch::async, [&gateway, &info, text, b] { return extract(text, info, gateway, b); }));

  EnsembleEvaluation out;
  std::exception_ptr first_error;
  for (auto& f : futures) {
    try {
      out.attempts.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  VotePanel vp;
  for (const auto& a : out.attempts) {
    if (a.record) {
      vp.extractions.push_back(*a.record);
      vp.evaluator_ids.push_back(a.model_id);
    } else {
      out.warnings.push_back({"VoterFailed", a.model_id + ": " + a.failure.value_or("no record")});
    }
  }
  if (vp.extractions.empty()) {
    out.failure = "EvaluatorFailure: no panel member produced a parseable extraction";
    return out;
  }
  if (vp.extractions.size() == 1) {
    out.warnings.push_back({"PanelDegraded", "only " + vp.evaluator_ids.front() + " answered; no vote held"});
    out.record = vp.extractions.front();
    return out;
  }
  const bool primary_answered =
      std::find(vp.evaluator_ids.begin(), vp.evaluator_ids.end(), primary) != vp.evaluator_ids.end();
  vp.designated_primary = primary_answered ? primary : *std::min_element(vp.evaluator_ids.begin(), vp.evaluator_ids.end());
  if (!primary_answered)
    out.warnings.push_back({"PrimaryFailed", "designated primary failed; tie-break passes to " + vp.designated_primary});
  out.vote = vote(vp, value_tolerance);
  out.record = out.vote->record;
  out.warnings.insert(out.warnings.end(), out.vote->warnings.begin(), out.vote->warnings.end());
  return out;
}

}  // namespace shapnarr
