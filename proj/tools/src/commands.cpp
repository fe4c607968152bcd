#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "cli.hpp"
#include "softq/calibration.hpp"
#include "softq/confidence.hpp"
#include "softq/dataset.hpp"
#include "softq/embedding.hpp"
#include "softq/error.hpp"
#include "softq/format.hpp"
#include "softq/inference.hpp"
#include "softq/metrics.hpp"
#include "softq/oracle.hpp"
#include "softq/synthetic.hpp"

namespace softq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json common_json(const CommonOptions& o) {
  return {{"kg-dir", o.kg_dir}, {"out", o.out}, {"seed", o.seed}, {"budget", o.budget}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

UncertainKG require_kg(const CommonOptions& o) {
  if (o.kg_dir.empty()) throw ConfigConflict("--kg-dir is required");
  return load_kg_dir(o.kg_dir);
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) {
    throw fs::filesystem_error("no such file", p, std::make_error_code(std::errc::no_such_file_or_directory));
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

// Regular files under each input, directories expanded recursively and sorted.
std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (p.empty() || !fs::exists(p)) continue;
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

struct Backend {
  std::unique_ptr<EmbeddingScorer> scorer;
  std::unique_ptr<ConfidenceBackend> base;
  std::unique_ptr<ConfidenceBackend> calibrated;
  fs::path file;

  const ConfidenceBackend& get() const { return calibrated ? *calibrated : *base; }
};

Backend make_backend(const std::string& spec, const UncertainKG& kg) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ConfigConflict("backend must be exact:<split>, tabular:<path> or embedding:<checkpoint>");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  Backend b;
  if (kind == "exact") {
    b.base = std::make_unique<ClosedWorldBackend>(kg, parse_split(arg));
  } else if (kind == "tabular") {
    b.file = arg;
    require_file(b.file);
    b.base = std::make_unique<TabularBackend>(b.file, kg);
  } else if (kind == "embedding") {
    b.file = arg;
    require_file(b.file);
    b.scorer = std::make_unique<EmbeddingScorer>(load_scorer(b.file));
    if (b.scorer->num_entities() != kg.num_entities() ||
        b.scorer->num_relations() != kg.num_relations()) {
      throw ConfigConflict("embedding checkpoint does not match the KG vocabulary");
    }
    b.base = std::make_unique<EmbeddingBackend>(*b.scorer);
  } else {
    throw ConfigConflict("unknown backend kind '" + kind + "'");
  }
  return b;
}

struct NamedQuery {
  std::string id;
  SoftQuery query;
};

bool looks_like_records(const fs::path& p) {
  return fs::is_directory(p) || p.extension() == ".jsonl";
}

std::vector<NamedQuery> read_queries(const AnswerOptions& o, const UncertainKG& kg) {
  std::vector<NamedQuery> out;
  if (!o.query.empty()) {
    out.push_back({"q1", parse_query(o.query, kg.entities(), kg.relations())});
    return out;
  }
  const fs::path path = o.queries;
  require_file(path);
  if (looks_like_records(path)) {
    for (auto& r : load_records(path, kg)) out.push_back({r.id, std::move(r.query)});
    return out;
  }
  std::ifstream in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back({"q" + std::to_string(lineno),
                     parse_query(line, kg.entities(), kg.relations())});
    } catch (const SyntaxError& e) {
      throw FormatError(path.string() + ": " + e.what(), lineno);
    }
  }
  if (out.empty()) throw FormatError(path.string() + ": no queries");
  return out;
}

json answer_config(const AnswerOptions& o) {
  json j = common_json(o.common);
  j["backend"] = o.backend;
  j["queries"] = o.queries;
  j["query"] = o.query;
  j["delta1"] = optional_json(o.delta1);
  j["delta2"] = optional_json(o.delta2);
  j["debias"] = o.debias;
  j["calibration"] = o.calibration;
  j["emit-trace"] = o.emit_trace;
  j["dense"] = o.dense;
  return j;
}

}  // namespace

void write_run_json(const fs::path& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<fs::path>& inputs) {
  json digests = json::array();
  for (const auto& f : expand_inputs(inputs)) {
    digests.push_back({{"path", f.generic_string()}, {"sha256", sha256_file(f)}});
  }
  const json run = {{"command", command}, {"config", config}, {"seed", seed},
                    {"inputs", digests}};
  fs::create_directories(out_dir);
  auto out = open_out(out_dir / "run.json");
  out << run.dump(2) << '\n';
}

int cmd_answer(const AnswerOptions& o, std::ostream& out, std::ostream&) {
  if (o.query.empty() == o.queries.empty()) {
    throw ConfigConflict("give exactly one of --query and --queries");
  }
  if (o.emit_trace && o.common.out.empty()) throw ConfigConflict("--emit-trace needs --out");
  const UncertainKG kg = require_kg(o.common);
  Backend backend = make_backend(o.backend, kg);
  if (!o.calibration.empty()) {
    if (!backend.scorer) throw ConfigConflict("learned calibration requires an embedding backend");
    require_file(o.calibration);
    backend.calibrated = std::make_unique<CalibratedBackend>(*backend.base, *backend.scorer,
                                                             load_calibration(o.calibration));
  }
  auto queries = read_queries(o, kg);
  if (o.debias != 0.0) {
    for (auto& q : queries) q.query = debias_query(q.query, {o.debias});
  }

  const fs::path dir = o.common.out;
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream trace_file;
  std::string current_id;
  InferenceConfig config;
  config.delta1 = o.delta1;
  config.delta2 = o.delta2;
  config.enumeration_budget = o.common.budget;
  config.join_mode = o.dense ? JoinMode::kDense : JoinMode::kAuto;
  if (o.emit_trace) {
    trace_file = open_out(dir / "trace.jsonl");
    config.trace = [&](const json& event) {
      json e = event;
      e["query_id"] = current_id;
      trace_file << e.dump() << '\n';
    };
  }
  const InferenceContext ctx(backend.get(), config);

  std::ostringstream tsv;
  for (const auto& q : queries) {
    current_id = q.id;
    validate_query(q.query, kg.num_entities(), kg.num_relations());
    const auto ranked = rank_answers(answer_query(q.query, ctx));
    for (const auto& [e, u] : ranked) {
      tsv << q.id << '\t' << kg.entities().name(e) << '\t' << format_double(u) << '\n';
    }
  }
  if (dir.empty()) {
    out << tsv.str();
    return kOk;
  }
  open_out(dir / "answers.tsv") << tsv.str();
  std::vector<fs::path> inputs{o.common.kg_dir};
  if (!backend.file.empty()) inputs.push_back(backend.file);
  if (!o.queries.empty()) inputs.emplace_back(o.queries);
  if (!o.calibration.empty()) inputs.emplace_back(o.calibration);
  write_run_json(dir, "answer", answer_config(o), o.common.seed, inputs);
  return kOk;
}

int cmd_build_dataset(const DatasetOptions& o, std::ostream& out, std::ostream& err) {
  const UncertainKG kg = require_kg(o.common);
  DatasetConfig cfg;
  cfg.seed = o.common.seed;
  cfg.budget = o.common.budget;
  cfg.max_answers = o.max_answers;
  cfg.attempts_per_record = o.attempts;
  cfg.exact = o.exact;
  cfg.strategy.alpha_mode = parse_alpha_mode(o.alpha_mode);
  cfg.strategy.beta_mode = parse_beta_mode(o.beta_mode);
  cfg.strategy.hybrid_per_query = o.hybrid_per_query;
  auto add = [&](Split split, const std::vector<std::string>& types, std::size_t count) {
    if (count == 0) return;
    for (const auto& t : types) cfg.counts[split].emplace_back(parse_query_type(t), count);
  };
  add(Split::kTrain, o.train_types, o.train_count);
  add(Split::kValid, o.eval_types, o.valid_count);
  add(Split::kTest, o.eval_types, o.test_count);
  if (cfg.counts.empty()) throw ConfigConflict("all record counts are zero");

  const fs::path dir = o.common.out;
  fs::create_directories(dir);
  const DatasetReport report = build_dataset(kg, cfg, dir);
  json config = common_json(o.common);
  config["dataset"] = cfg;
  write_run_json(dir, "build-dataset", config, o.common.seed, {o.common.kg_dir});
  out << report.to_json().dump(2) << '\n';
  if (report.shortfall()) {
    const json j = {{"error", "shortfall"},
                    {"message", "fewer useful records than requested; see stats.json"},
                    {"exit_code", static_cast<int>(kFailure)}};
    err << j.dump() << '\n';
    return kFailure;
  }
  return kOk;
}

int cmd_train_scorer(const ScorerOptions& o, std::ostream& out, std::ostream&) {
  const UncertainKG kg = require_kg(o.common);
  ScorerHyper hyper;
  hyper.dim = o.dim;
  hyper.epochs = o.epochs;
  hyper.learning_rate = o.learning_rate;
  hyper.negatives = o.negatives;
  hyper.seed = o.common.seed;
  const Split split = parse_split(o.split);
  ScorerTrainingReport report;
  const EmbeddingScorer scorer = train_embedding_scorer(kg, split, hyper, &report);

  const fs::path dir = o.common.out;
  fs::create_directories(dir);
  const json sidecar = {{"hyper", hyper}, {"split", o.split},
                        {"entities", kg.num_entities()}, {"relations", kg.num_relations()}};
  save_scorer(scorer, dir / "scorer.bin", sidecar);
  auto csv = open_out(dir / "mse.csv");
  csv << "epoch,mse\n";
  for (std::size_t i = 0; i < report.mse_per_epoch.size(); ++i) {
    csv << i << ',' << format_double(report.mse_per_epoch[i]) << '\n';
  }
  json config = common_json(o.common);
  config["split"] = o.split;
  config["hyper"] = hyper;
  write_run_json(dir, "train-scorer", config, o.common.seed, {o.common.kg_dir});
  out << json{{"initial_mse", report.mse_per_epoch.front()},
              {"final_mse", report.mse_per_epoch.back()}}
             .dump()
      << '\n';
  return kOk;
}

int cmd_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream&) {
  const UncertainKG kg = require_kg(o.common);
  Backend backend = make_backend(o.backend, kg);
  if (!backend.scorer) throw ConfigConflict("learned calibration requires an embedding backend");
  if (o.target != "train" && o.target != "test") {
    throw ConfigConflict("--target must be train or test");
  }
  require_file(o.queries);
  const auto records = load_records(o.queries, kg);
  std::vector<CalibrationExample> examples;
  for (const auto& r : records) {
    const AnswerMap& truth = o.target == "train" ? r.train_answers : r.test_answers;
    examples.push_back({r.query, {truth.begin(), truth.end()}});
  }
  CalibrationHyper hyper;
  hyper.learning_rate = o.learning_rate;
  hyper.epochs = o.epochs;
  hyper.batch_size = o.batch_size;
  hyper.seed = o.common.seed;
  hyper.budget = o.common.budget;
  std::vector<double> history;
  const AffineCalibration cal =
      train_calibration(*backend.base, *backend.scorer, examples, hyper, &history);

  const fs::path dir = o.common.out;
  fs::create_directories(dir);
  const json sidecar = {{"hyper", hyper}, {"backend", o.backend}, {"target", o.target},
                        {"dim", cal.dim()}};
  save_calibration(cal, dir / "calibration.bin", sidecar);
  auto csv = open_out(dir / "loss.csv");
  csv << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    csv << i << ',' << format_double(history[i]) << '\n';
  }
  json config = common_json(o.common);
  config["backend"] = o.backend;
  config["queries"] = o.queries;
  config["target"] = o.target;
  config["hyper"] = hyper;
  write_run_json(dir, "calibrate", config, o.common.seed,
                 {o.common.kg_dir, backend.file, o.queries});
  out << json{{"initial_loss", history.front()}, {"final_loss", history.back()}}.dump() << '\n';
  return kOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream&) {
  const UncertainKG kg = require_kg(o.common);
  require_file(o.records);
  require_file(o.predictions);
  const auto records = load_records(o.records, kg);
  const auto predictions = read_predictions(o.predictions, kg);
  const EvalReport report = evaluate_run(records, predictions, o.ndcg_k);
  const json j = report.to_json();
  if (!o.common.out.empty()) {
    const fs::path dir = o.common.out;
    fs::create_directories(dir);
    open_out(dir / "report.json") << j.dump(2) << '\n';
    open_out(dir / "report.csv") << report.to_csv();
    json config = common_json(o.common);
    config["records"] = o.records;
    config["predictions"] = o.predictions;
    config["ndcg-k"] = optional_json(o.ndcg_k);
    write_run_json(dir, "evaluate", config, o.common.seed,
                   {o.common.kg_dir, o.records, o.predictions});
  }
  out << j.dump(2) << '\n';
  return kOk;
}

namespace {

bool same_bits(const UtilityVector& a, const UtilityVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) return false;
  }
  return true;
}

}  // namespace

int cmd_oracle_check(const OracleCheckOptions& o, std::ostream& out, std::ostream& err) {
  if (o.entities == 0 || o.entities > 30) throw ConfigConflict("--entities must be in [1, 30]");
  if (o.relations == 0 || o.relations > 5) throw ConfigConflict("--relations must be in [1, 5]");
  if (!(o.cyclic_fraction >= 0.0 && o.cyclic_fraction <= 1.0)) {
    throw ConfigConflict("--cyclic-fraction must be in [0, 1]");
  }
  const auto types = all_query_types();
  std::size_t matches = 0;
  json mismatches = json::array();
  for (std::size_t i = 0; i < o.n; ++i) {
    Rng rng(derive_seed(o.common.seed, "oracle-check", {i}));
    SyntheticKGConfig kc;
    kc.entities = o.entities;
    kc.relations = o.relations;
    kc.train_facts = std::min<std::size_t>(
        3 * o.entities, std::max<std::size_t>(1, o.entities * o.entities * o.relations / 2));
    kc.valid_facts = 0;
    kc.test_facts = 0;
    kc.seed = rng.next();
    const UncertainKG kg = random_kg(kc);
    const ClosedWorldBackend backend(kg, Split::kTrain);

    SyntheticQueryConfig qc;
    SoftQuery q;
    if (rng.bernoulli(o.cyclic_fraction)) {
      qc.cyclic = true;
      qc.self_loops = true;
      q = random_query(kg.num_entities(), kg.num_relations(), qc, rng);
    } else if (i % 2 == 0) {
      try {
        q = random_template_query(kg, types[(i / 2) % types.size()], qc, rng);
      } catch (const Error&) {
        q = random_query(kg.num_entities(), kg.num_relations(), qc, rng);
      }
    } else {
      qc.self_loops = true;
      q = random_query(kg.num_entities(), kg.num_relations(), qc, rng);
    }
    InferenceConfig ic;
    ic.enumeration_budget = o.common.budget;
    const auto got = answer_query(q, backend, ic);
    const auto want = brute_force_utility(q, backend, o.common.budget);
    if (same_bits(got, want)) {
      ++matches;
    } else {
      mismatches.push_back({{"index", i}, {"query", to_dsl(q, kg.entities(), kg.relations())}});
    }
  }
  const std::string summary =
      std::to_string(matches) + "/" + std::to_string(o.n) + " exact matches";
  out << summary << '\n';
  if (!o.common.out.empty()) {
    const fs::path dir = o.common.out;
    fs::create_directories(dir);
    open_out(dir / "oracle_check.json")
        << json{{"queries", o.n}, {"matches", matches}, {"mismatches", mismatches}}.dump(2)
        << '\n';
    json config = common_json(o.common);
    config["n"] = o.n;
    config["entities"] = o.entities;
    config["relations"] = o.relations;
    config["cyclic-fraction"] = o.cyclic_fraction;
    write_run_json(dir, "oracle-check", config, o.common.seed, {});
  }
  if (matches != o.n) {
    const json j = {{"error", "oracle_mismatch"},
                    {"message", summary},
                    {"exit_code", static_cast<int>(kFailure)}};
    err << j.dump() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace softq::cli
