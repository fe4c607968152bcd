#include "cli.hpp"

#include <algorithm>
#include <iostream>

#include <CLI11.hpp>

#include "json_config.hpp"
#include "softq/error.hpp"

namespace softq::cli {

namespace {

void add_common(CLI::App* sub, CommonOptions& o, bool out_required) {
  sub->add_option("--config", o.config, "JSON file with flag values; command-line flags win");
  sub->add_option("--kg-dir", o.kg_dir, "Directory with train.tsv, valid.tsv, test.tsv");
  auto* out = sub->add_option("--out", o.out, "Output directory");
  if (out_required) out->required();
  sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  sub->add_option("--budget", o.budget, "Enumeration budget (assignments)")
      ->capture_default_str();
}

int report(std::ostream& err, ExitCode code, std::string_view kind, const std::string& message) {
  const nlohmann::json j = {
      {"error", kind}, {"message", message}, {"exit_code", static_cast<int>(code)}};
  err << j.dump() << '\n';
  return code;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Soft query answering over uncertain knowledge graphs", "softq"};
  app.require_subcommand(1);

  AnswerOptions answer;
  auto* a = app.add_subcommand("answer", "Answer soft queries and write ranked utilities");
  add_common(a, answer.common, false);
  a->add_option("--backend", answer.backend,
                "exact:<split> | tabular:<scores.tsv> | embedding:<checkpoint>")
      ->capture_default_str();
  a->add_option("--queries", answer.queries,
                "Dataset records (.jsonl or directory) or a text file, one query per line");
  a->add_option("--query", answer.query, "A single query (DSL or JSON)");
  a->add_option("--delta1", answer.delta1, "Matrix threshold; unset disables");
  a->add_option("--delta2", answer.delta2, "State pruning threshold; unset disables");
  a->add_option("--debias", answer.debias, "Shift every alpha down by this amount")
      ->capture_default_str();
  a->add_option("--calibration", answer.calibration,
                "Learned calibration checkpoint (needs an embedding backend)");
  a->add_flag("--emit-trace", answer.emit_trace, "Write trace.jsonl into --out");
  a->add_flag("--dense", answer.dense, "Use the dense reference join");

  DatasetOptions dataset;
  auto* d = app.add_subcommand("build-dataset", "Sample useful soft queries into JSONL files");
  add_common(d, dataset.common, true);
  d->add_option("--train-types", dataset.train_types, "Query types for the train split")
      ->delimiter(',');
  d->add_option("--eval-types", dataset.eval_types, "Query types for valid and test")
      ->delimiter(',');
  d->add_option("--train-count", dataset.train_count, "Records per train type");
  d->add_option("--valid-count", dataset.valid_count, "Records per valid type");
  d->add_option("--test-count", dataset.test_count, "Records per test type");
  d->add_option("--alpha-mode", dataset.alpha_mode, "zero | low | normal | high | hybrid")
      ->capture_default_str();
  d->add_option("--beta-mode", dataset.beta_mode, "equal | random")->capture_default_str();
  d->add_flag("--hybrid-per-query", dataset.hybrid_per_query,
              "Draw one hybrid alpha mode per query instead of per atom");
  d->add_option("--max-answers", dataset.max_answers, "Cap on test answers")
      ->capture_default_str();
  d->add_option("--attempts", dataset.attempts, "Sampling attempts per record")
      ->capture_default_str();
  d->add_flag("--exact", dataset.exact, "Compute answers with the brute-force oracle");

  ScorerOptions scorer;
  auto* s = app.add_subcommand("train-scorer", "Train the minimal embedding scorer");
  add_common(s, scorer.common, true);
  s->add_option("--split", scorer.split, "KG view to train on")->capture_default_str();
  s->add_option("--dim", scorer.dim, "Embedding dimension")->capture_default_str();
  s->add_option("--epochs", scorer.epochs)->capture_default_str();
  s->add_option("--lr", scorer.learning_rate, "Learning rate")->capture_default_str();
  s->add_option("--negatives", scorer.negatives, "Negatives per positive")
      ->capture_default_str();

  CalibrateOptions calibrate;
  auto* c = app.add_subcommand("calibrate", "Learn an affine calibration on alpha=0 queries");
  add_common(c, calibrate.common, true);
  c->add_option("--backend", calibrate.backend, "embedding:<checkpoint>")->required();
  c->add_option("--queries", calibrate.queries, "Training records")->required();
  c->add_option("--target", calibrate.target, "train | test: which utilities to fit")
      ->capture_default_str();
  c->add_option("--epochs", calibrate.epochs)->capture_default_str();
  c->add_option("--lr", calibrate.learning_rate, "Adam learning rate")->capture_default_str();
  c->add_option("--batch-size", calibrate.batch_size)->capture_default_str();

  EvaluateOptions evaluate;
  auto* e = app.add_subcommand("evaluate", "Score predictions against dataset records");
  add_common(e, evaluate.common, false);
  e->add_option("--records", evaluate.records, "Dataset records")->required();
  e->add_option("--predictions", evaluate.predictions, "query_id, entity, utility TSV")
      ->required();
  e->add_option("--ndcg-k", evaluate.ndcg_k, "NDCG cutoff; default |A|");

  OracleCheckOptions oracle;
  auto* o = app.add_subcommand("oracle-check", "Cross-check inference against the oracle");
  add_common(o, oracle.common, false);
  o->add_option("--n", oracle.n, "Number of random queries")->capture_default_str();
  o->add_option("--entities", oracle.entities, "Entities per random KG (<= 30)")
      ->capture_default_str();
  o->add_option("--relations", oracle.relations)->capture_default_str();
  o->add_option("--cyclic-fraction", oracle.cyclic_fraction)->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(std::vector<std::string>(argv, argv + argc));
    std::reverse(args.begin() + 1, args.end());
    args.erase(args.begin());
    app.parse(args);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& ex) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::FileError& ex) {
    return report(err, kFileNotFound, "file_not_found", ex.what());
  } catch (const CLI::ParseError& ex) {
    return report(err, kUsage, "usage", ex.what());
  }

  try {
    if (a->parsed()) return cmd_answer(answer, out, err);
    if (d->parsed()) return cmd_build_dataset(dataset, out, err);
    if (s->parsed()) return cmd_train_scorer(scorer, out, err);
    if (c->parsed()) return cmd_calibrate(calibrate, out, err);
    if (e->parsed()) return cmd_evaluate(evaluate, out, err);
    if (o->parsed()) return cmd_oracle_check(oracle, out, err);
  } catch (const ConfigConflict& ex) {
    return report(err, kUsage, "config_conflict", ex.what());
  } catch (const std::filesystem::filesystem_error& ex) {
    return report(err, kFileNotFound, "file_not_found", ex.what());
  } catch (const BudgetExceeded& ex) {
    return report(err, kBudgetExceeded, "budget_exceeded", ex.what());
  } catch (const FormatError& ex) {
    return report(err, kInvalidInput, "format", ex.what());
  } catch (const SyntaxError& ex) {
    return report(err, kInvalidInput, "syntax", ex.what());
  } catch (const ValidationError& ex) {
    return report(err, kInvalidInput, "validation", ex.what());
  } catch (const std::exception& ex) {
    return report(err, kFailure, "internal", ex.what());
  }
  return report(err, kUsage, "usage", "no subcommand");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage{"softq"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace softq::cli
