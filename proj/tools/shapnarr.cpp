// shapnarr: run refinement experiments, report on them, annotate transcripts,
// and generate simulation-lab corpora.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shapnarr/cli.hpp"

int main(int argc, char** argv) {
  namespace sn = shapnarr;
  CLI::App app{"Generate, evaluate and refine SHAP narratives"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the refinement loop over a directory of SHAP tables");
  std::string config, tables, out = "out";
  std::optional<std::string> baselines;
  sn::RunOverrides ov;
  std::optional<std::string> design;
  std::optional<int> max_rounds, n_features;
  std::optional<std::uint64_t> seed;
  bool ensemble = false;
  run->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--tables", tables, "Directory of SHAP-table files")->required()->check(CLI::ExistingDirectory);
  run->add_option("--baselines", baselines, "Baseline narratives (JSON object instance_id -> text)");
  run->add_option("--out", out, "Parent directory for run directories");
  run->add_option("--design", design, "basic | critic | critic_rule | coherent | coherent_rule");
  run->add_option("--max-rounds", max_rounds, "Maximum rounds (>= 1)");
  run->add_option("--n-features", n_features, "Features per narrative");
  run->add_flag("--ensemble", ensemble, "Enable the evaluator ensemble from the config");
  run->add_option("--seed", seed, "Seed for stochastic mocks and retry jitter");
  run->add_option("--models", ov.models, "Role bindings, role=model_id (repeatable)");

  // report
  auto* report = app.add_subcommand("report", "Compare runs: progression tables, overall columns, categories");
  std::vector<std::string> run_dirs;
  std::optional<std::string> csv;
  bool paired = false;
  report->add_option("runs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--csv", csv, "Write plot-ready long CSV (round,metric,value,run)");
  report->add_flag("--paired", paired, "Two runs: render original|ensemble paired columns");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Attach a problem category to one round of a transcript");
  std::string a_run, a_instance, a_category, a_note;
  int a_round = 0;
  annotate->add_option("run_dir", a_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  annotate->add_option("--instance", a_instance, "Instance id")->required();
  annotate->add_option("--round", a_round, "Round index")->required();
  annotate->add_option("--category", a_category, "C1..C5 or none")->required();
  annotate->add_option("--note", a_note, "Free-text note");

  // simgen
  auto* simgen = app.add_subcommand("simgen", "Render templated baselines from fault plans");
  std::string s_plans, s_tables, s_out;
  int s_n = 4;
  simgen->add_option("--plans", s_plans, "Directory of fault-plan files")->required();
  simgen->add_option("--tables", s_tables, "Directory of SHAP-table files")->required();
  simgen->add_option("--out", s_out, "Output baselines file")->required();
  simgen->add_option("--n-features", s_n, "Features per narrative");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic table corpus with seeded fault plans");
  std::string y_out;
  int y_count = 100, y_faulty = 30, y_rows = 8, y_n = 4;
  std::uint64_t y_seed = 0;
  synth->add_option("--out", y_out, "Output directory")->required();
  synth->add_option("--count", y_count, "Instances");
  synth->add_option("--faulty", y_faulty, "Instances carrying faults");
  synth->add_option("--rows", y_rows, "Rows per table");
  synth->add_option("--n-features", y_n, "Features narrated (bounds fault positions)");
  synth->add_option("--seed", y_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ov.design = design;
      ov.max_rounds = max_rounds;
      ov.n_features = n_features;
      if (ensemble) ov.ensemble = true;
      ov.seed = seed;
      std::optional<sn::fs::path> b;
      if (baselines) b = *baselines;
      return sn::cmd_run(config, tables, b, out, ov);
    }
    if (*report) {
      std::vector<sn::fs::path> dirs(run_dirs.begin(), run_dirs.end());
      std::optional<sn::fs::path> c;
      if (csv) c = *csv;
      return sn::cmd_report(dirs, c, paired);
    }
    if (*annotate) return sn::cmd_annotate(a_run, a_instance, a_round, a_category, a_note);
    if (*simgen) return sn::cmd_simgen(s_plans, s_tables, s_out, s_n);
    if (*synth) return sn::cmd_synth(y_out, y_count, y_faulty, y_rows, y_n, y_seed);
  } catch (const sn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
