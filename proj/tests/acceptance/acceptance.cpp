// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "../unit/oracles.hpp"
#include "shapnarr/cli.hpp"

using namespace shapnarr;

namespace {

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

std::string slurp(const std::string& rel) { return read_file(fs::path(SHAPNARR_TEST_DATA) / rel); }

ShapTable student() { return load_shap_table(slurp("student/student-14.json")).table; }

ExtractionRecord truth_record(const ShapTable& t, int n) {
  ExtractionRecord r;
  for (const auto& g : ground_truth(t, n)) r.entries.push_back({g.feature_name, g.rank, g.sign, g.value, std::nullopt});
  return r;
}

// ---- criteria ----

void accuracy_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  for (int b = 0; b < 200; ++b) {
    const int n = b % 2 ? 8 : 4;
    const int M = 1 + static_cast<int>(rng() % 20);
    std::vector<ShapTable> tables;
    std::vector<ExtractionRecord> recs;
    std::vector<FaithfulnessReport> reps;
    for (int m = 0; m < M; ++m) {
      tables.push_back(synthetic_table("acc", "t" + std::to_string(m), n + 2, rng));
      recs.push_back(oracle::random_extraction(tables.back(), n, rng));
      reps.push_back(compare(recs.back(), tables.back(), n));
    }
    const auto o = oracle::accuracy(recs, tables, n);
    const auto r = accuracy_count(reps, Field::rank, n), s = accuracy_count(reps, Field::sign, n),
               v = accuracy_count(reps, Field::value, n);
    require(r == AccuracyCount{o.ok_r, o.total} && s == AccuracyCount{o.ok_s, o.total} && v == AccuracyCount{o.ok_v, o.total},
            "batch " + std::to_string(b) + " disagrees with recount");
    require(accuracy(reps, Field::rank, n) == o.ra() && accuracy(reps, Field::sign, n) == o.sa() &&
                accuracy(reps, Field::value, n) == o.va(),
            "batch " + std::to_string(b) + " ratio differs");
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  require(ms < 5000, "took " + std::to_string(ms) + " ms");
}

void reference_overall() {
  const auto a = format_fixed(overall(0.990, 1.000, 0.997), 3);
  const auto b = format_fixed(overall(0.960, 0.993, 0.997), 3);
  require(a == "0.996", "first row gave " + a);
  require(b == "0.983", "second row gave " + b);
}

void rank_swap_law() {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 50; ++c) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int M = 1 + static_cast<int>(rng() % 20);
    std::vector<ShapTable> tables;
    for (int m = 0; m < M; ++m) tables.push_back(synthetic_table("swap", "t" + std::to_string(m), n + 1, rng));
    std::vector<FaithfulnessReport> clean, swapped;
    const int victim = static_cast<int>(rng() % M);
    const int i = static_cast<int>(rng() % n);
    int j = static_cast<int>(rng() % n);
    while (j == i) j = static_cast<int>(rng() % n);
    for (int m = 0; m < M; ++m) {
      auto rec = truth_record(tables[m], n);
      clean.push_back(compare(rec, tables[m], n));
      if (m == victim) std::swap(rec.entries[i].rank, rec.entries[j].rank);
      swapped.push_back(compare(rec, tables[m], n));
    }
    const auto before = accuracy_count(clean, Field::rank, n), after = accuracy_count(swapped, Field::rank, n);
    require(before.correct - after.correct == 2 && after.total == static_cast<std::int64_t>(M) * n,
            "case " + std::to_string(c) + ": count delta " + std::to_string(before.correct - after.correct));
    const double delta = accuracy(swapped, Field::rank, n) - accuracy(clean, Field::rank, n);
    require(std::fabs(delta + 2.0 / (M * n)) < 1e-12, "case " + std::to_string(c) + ": ratio delta " + format_number(delta));
  }
}

void feedback_golden() {
  const auto t = student();
  require(compare(truth_record(t, 4), t, 4).feedback_text == slurp("golden/feedback_faithful.txt"), "faithful sentence");
  const ExtractionRecord fig{{{"absences", 0, 1, 2.0, {}}, {"failures", 1, 1, 0.0, {}}, {"Walc", 2, 1, 3.0, {}}, {"goout", 3, -1, 5.0, {}}}};
  require(compare(fig, t, 4).feedback_text == slurp("golden/feedback_figure2.txt"), "per-feature error lines");
  const ExtractionRecord unk{{{"absences", 0, 1, 2.0, {}},
                              {"age2", 1, 1, 17.0, {}},
                              {"Walc", 2, -1, 3.0, {}},
                              {"failures", 3, 1, 0.0, {}},
                              {"goout", 4, 1, 7.0, {}}}};
  require(compare(unk, t, 4).feedback_text == slurp("golden/feedback_unknown.txt"), "unknown-feature line");
}

std::vector<Instance> corpus_instances(int count, int faulty, std::uint64_t seed) {
  const auto c = synthetic_corpus(count, faulty, 8, 4, seed);
  std::vector<Instance> out;
  for (std::size_t i = 0; i < c.tables.size(); ++i)
    out.push_back({c.tables[i], c.info, render_templated_narrative(c.tables[i], 4, c.plans[i])});
  return out;
}

RunConfig sim_config(Design d, int rounds) {
  RunConfig c;
  c.run_id = "acceptance";
  c.design = d;
  c.max_rounds = rounds;
  c.n_features = 4;
  c.models = {"sim", "sim", "sim", "sim"};
  return c;
}

std::unique_ptr<Gateway> sim_gateway(ReviserPolicy p, std::uint64_t seed) {
  auto g = std::make_unique<Gateway>();
  SimlabOptions o;
  o.reviser = p;
  o.seed = seed;
  g->register_model("sim", make_simlab_provider(o));
  return g;
}

void stopping_semantics() {
  const auto inst = corpus_instances(30, 10, 8);
  for (auto d : {Design::basic, Design::critic, Design::critic_rule, Design::coherent, Design::coherent_rule}) {
    auto g = sim_gateway(ReviserPolicy::compliant(), 1);
    const auto res = run_batch(sim_config(d, 3), inst, *g);
    require(res.failures.empty() && res.transcripts.size() == inst.size(), std::string(to_string(d)) + ": failures");
    for (const auto& tr : res.transcripts) {
      if (roster_of(d).coherence) {
        require(tr.rounds.size() == 3, std::string(to_string(d)) + ": " + tr.instance_id + " has " +
                                           std::to_string(tr.rounds.size()) + " rounds");
        continue;
      }
      std::size_t first = tr.rounds.size();
      for (std::size_t r = 0; r < tr.rounds.size(); ++r)
        if (tr.rounds[r].report && tr.rounds[r].report->is_faithful()) {
          first = r;
          break;
        }
      require(first < tr.rounds.size() && tr.rounds.size() == first + 1,
              std::string(to_string(d)) + ": " + tr.instance_id + " did not stop at its first faithful round");
    }
  }
}

void convergence() {
  const auto inst = corpus_instances(100, 30, 2025);
  auto g = sim_gateway(ReviserPolicy::compliant(), 3);
  const auto res = run_batch(sim_config(Design::critic_rule, 3), inst, *g);
  require(res.metrics.size() == 3, "compliant run produced " + std::to_string(res.metrics.size()) + " rounds");
  require(res.metrics[0].unfaithful_count == 30, "round 0 unfaithful " + std::to_string(res.metrics[0].unfaithful_count));
  for (std::size_t r = 1; r < res.metrics.size(); ++r) {
    const auto& m = res.metrics[r];
    require(m.unfaithful_count == 0 && m.RA == 1.0 && m.SA == 1.0 && m.VA == 1.0,
            "compliant round " + std::to_string(r) + " not converged");
  }
  auto gp = sim_gateway(ReviserPolicy::partial(0.5), 3);
  const auto part = run_batch(sim_config(Design::critic_rule, 10), inst, *gp);
  require(part.metrics.size() == 10, "partial run produced " + std::to_string(part.metrics.size()) + " rounds");
  std::vector<int> uf;
  for (const auto& m : part.metrics) uf.push_back(m.unfaithful_count);
  for (std::size_t r = 1; r < uf.size(); ++r)
    require(uf[r] <= uf[r - 1], "partial unfaithful_count rose: " + progression(uf));
  std::cout << "  partial(0.5) unfaithful: " << progression(uf) << "\n";
}

void ensemble_oracle() {
  const std::vector<std::string> ids = {"v1", "v2", "v3", "v4", "v5"};
  std::vector<std::size_t> perm(5);
  // field slot: 0 rank, 1 sign, 2 value, 3 presence; each voter picks a domain index
  const int domain[] = {3, 2, 3, 3};
  int cases = 0;
  for (int field = 0; field < 4; ++field) {
    const int k = domain[field];
    const int combos = static_cast<int>(std::pow(k, 5));
    for (int code = 0; code < combos; ++code) {
      std::vector<ExtractionRecord> recs(5);
      int c = code;
      for (int v = 0; v < 5; ++v) {
        const int x = c % k;
        c /= k;
        ExtractionEntry e{"f", 1, 1, 2.0, std::nullopt};
        if (field == 0) e.rank = x;
        if (field == 1) e.sign = x ? 1 : -1;
        if (field == 2) e.value = x == 0 ? std::optional<double>() : std::optional<double>(x);
        if (field == 3 && x == 0) continue;  // absent
        if (field == 3) e.value = x;
        recs[v].entries.push_back(e);
        recs[v].entries.push_back({"anchor", 0, 1, 1.0, std::nullopt});
      }
      for (auto& r : recs)
        if (r.entries.empty()) r.entries.push_back({"anchor", 0, 1, 1.0, std::nullopt});
      for (const auto& primary : ids) {
        ++cases;
        const auto expect = oracle::vote(recs, ids, primary, false);
        std::iota(perm.begin(), perm.end(), 0);
        do {
          VotePanel p;
          for (auto i : perm) {
            p.extractions.push_back(recs[i]);
            p.evaluator_ids.push_back(ids[i]);
          }
          p.designated_primary = primary;
          require(vote(p).consensus == expect, "field " + std::to_string(field) + " code " + std::to_string(code) +
                                                   " primary " + primary + " disagrees with oracle");
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
    }
  }
  std::cout << "  " << cases << " panels x 120 orders\n";
}

void determinism() {
  const auto root = fs::temp_directory_path() / ("shapnarr-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream log;
  cmd_synth(root / "synth", 40, 12, 8, 4, 99, log);
  cmd_simgen(root / "synth" / "plans", root / "synth" / "tables", root / "baselines.json", 4, log);
  write_file(root / "config.json", R"({"design":"coherent_rule","max_rounds":4,"seed":13,"workers":4,
    "models":{"narrator":"sim","evaluator":"sim","coherence":"sim"},
    "providers":{"sim":{"kind":"simlab","policy":"partial","p":0.5}}})");
  auto noop = [](std::chrono::milliseconds) {};
  cmd_run(root / "config.json", root / "synth" / "tables", root / "baselines.json", root / "a", {}, log, noop);
  cmd_run(root / "config.json", root / "synth" / "tables", root / "baselines.json", root / "b", {}, log, noop);
  const auto a = run_paths(root / "a" / "coherent_rule-seed13"), b = run_paths(root / "b" / "coherent_rule-seed13");
  const bool same_metrics = read_file(a.metrics) == read_file(b.metrics);
  const bool same_transcripts = read_file(a.transcripts) == read_file(b.transcripts);
  const bool nonempty = !read_file(a.transcripts).empty();
  fs::remove_all(root);
  require(same_metrics, "metrics.csv differs");
  require(same_transcripts, "transcripts differ");
  require(nonempty, "no transcripts written");
}

void instability() {
  const auto s = instability_stats({0.905, 0.905, 0.905, 0.905, 0.905});
  require(format_fixed(s.std_dev, 3) == "0.000" && format_fixed(s.mean, 3) == "0.905", "constant series");
  const auto b = instability_stats({0.0, 1.0});
  require(b.mean == 0.5 && b.min == 0.0 && b.max == 1.0 && b.std_dev == 0.5, "{0,1} series");
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void()>> criteria[] = {
      {"accuracy equals brute-force recount on 200 batches in < 5 s", accuracy_oracle},
      {"overall accuracy reproduces 0.996 and 0.983", reference_overall},
      {"one rank swap lowers RA by exactly 2/(M*n), 50 cases", rank_swap_law},
      {"feedback text byte-identical to golden files", feedback_golden},
      {"stopping semantics across all five designs", stopping_semantics},
      {"simlab convergence (100 instances, 30 faulty)", convergence},
      {"ensemble vote equals exhaustive oracle under all voter orders", ensemble_oracle},
      {"cmd_run is byte-deterministic", determinism},
      {"instability stats", instability},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
      std::cout << "PASS " << name << "\n";
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL " << name << ": " << e.what() << "\n";
    }
    std::cout.flush();
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << (std::size(criteria) - failed) << "/" << std::size(criteria) << "\n";
  return failed ? 1 : 0;
}
