#include "softq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "softq/error.hpp"
#include "softq/inference.hpp"
#include "softq/oracle.hpp"
#include "softq/rng.hpp"

namespace softq {

AnswerMap to_answer_map(const UtilityVector& u) {
  AnswerMap out;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (std::isfinite(u[i]) && u[i] > 0.0) out.emplace(static_cast<EntityId>(i), u[i]);
  }
  return out;
}

namespace {

constexpr QueryType kAllTypes[] = {
    QueryType::k1P,  QueryType::k2P, QueryType::k2I,  QueryType::k2IN,
    QueryType::k2IL, QueryType::k2M, QueryType::k2U,  QueryType::k3IN,
    QueryType::kIP,  QueryType::kINP, QueryType::kIM, QueryType::kUP};

constexpr std::string_view kTypeNames[] = {"1P",  "2P", "2I",  "2IN", "2IL", "2M",
                                           "2U",  "3IN", "IP", "INP", "IM",  "UP"};

}  // namespace

std::string_view to_string(QueryType type) { return kTypeNames[static_cast<int>(type)]; }

QueryType parse_query_type(std::string_view name) {
  for (QueryType t : kAllTypes) {
    if (to_string(t) == name) return t;
  }
  throw ValidationError("unknown query type '" + std::string(name) + "'");
}

std::span<const QueryType> all_query_types() { return kAllTypes; }

bool is_training_type(QueryType type) {
  switch (type) {
    case QueryType::k1P:
    case QueryType::k2P:
    case QueryType::k2I:
    case QueryType::k2IN:
    case QueryType::k2IL:
      return true;
    default:
      return false;
  }
}

nlohmann::json template_catalog() {
  return {{"version", kTemplateVersion},
          {"shapes",
           {{"1P", "(c,r,y)"},
            {"2P", "EXISTS x1 . (c,r1,x1) & (x1,r2,y)"},
            {"2I", "(c1,r1,y) & (c2,r2,y)"},
            {"2IN", "(c1,r1,y) & !(c2,r2,y)"},
            {"2IL", "EXISTS x1 . (c,r1,y) & (x1,r2,y)"},
            {"2M", "(c,r1,y) & (c,r2,y)"},
            {"2U", "(c1,r1,y) | (c2,r2,y)"},
            {"3IN", "(c1,r1,y) & (c2,r2,y) & !(c3,r3,y)"},
            {"IP", "EXISTS x1 . (c1,r1,x1) & (c2,r2,x1) & (x1,r3,y)"},
            {"INP", "EXISTS x1 . (c1,r1,x1) & !(c2,r2,x1) & (x1,r3,y)"},
            {"IM", "(c1,r1,y) & (c2,r2,y) & (c2,r3,y)"},
            {"UP", "EXISTS x1 . (c1,r1,x1) & (x1,r2,y) | EXISTS x1 . (c2,r3,x1) & (x1,r4,y)"}}}};
}

namespace {

struct InFact {
  EntityId head;
  RelationId relation;
  friend bool operator==(const InFact&, const InFact&) = default;
};

class Walker {
 public:
  Walker(const UncertainKG& kg, Rng& rng) : rng_(rng), in_(kg.num_entities()) {
    for (const Fact& f : kg.facts_in(Split::kTrain)) {
      if (f.confidence > 0.0) in_[f.tail].push_back({f.head, f.relation});
    }
    for (EntityId e = 0; e < in_.size(); ++e) {
      if (!in_[e].empty()) targets_.push_back(e);
    }
  }

  bool empty() const { return targets_.empty(); }
  std::size_t below(std::size_t n) { return rng_.below(n); }
  EntityId answer() { return targets_[rng_.below(targets_.size())]; }
  const std::vector<InFact>& in(EntityId e) const { return in_[e]; }

  std::optional<InFact> pick(EntityId e) {
    if (in_[e].empty()) return std::nullopt;
    return in_[e][rng_.below(in_[e].size())];
  }

  // k distinct incoming facts of e, in sampled order.
  std::optional<std::vector<InFact>> pick_distinct(EntityId e, std::size_t k) {
    const auto& facts = in_[e];
    if (facts.size() < k) return std::nullopt;
    std::vector<std::size_t> idx(facts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<InFact> out;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng_.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(facts[idx[i]]);
    }
    return out;
  }

  // Two incoming facts of e sharing the head, with different relations.
  std::optional<std::pair<InFact, InFact>> pick_parallel(EntityId e) {
    const auto& facts = in_[e];
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < facts.size(); ++i) {
      for (std::size_t j = i + 1; j < facts.size(); ++j) {
        if (facts[i].head == facts[j].head && facts[i].relation != facts[j].relation) {
          pairs.emplace_back(i, j);
        }
      }
    }
    if (pairs.empty()) return std::nullopt;
    const auto [i, j] = pairs[rng_.below(pairs.size())];
    return std::pair(facts[i], facts[j]);
  }

 private:
  Rng& rng_;
  std::vector<std::vector<InFact>> in_;
  std::vector<EntityId> targets_;
};

SoftAtom atom(Term h, RelationId r, Term t, bool negated = false) {
  return SoftAtom{h, r, t, 0.0, 1.0, negated};
}

Term c(EntityId e) { return Term::constant(e); }
const Term y = Term::free();
const Term x1 = Term::existential(1);

SoftQuery single(std::vector<std::uint32_t> xs, std::vector<SoftAtom> atoms) {
  return SoftQuery{{SoftConjunctiveQuery{std::move(xs), std::move(atoms)}}};
}

std::optional<SoftConjunctiveQuery> chain(Walker& w, EntityId a) {
  const auto last = w.pick(a);
  if (!last) return std::nullopt;
  const auto first = w.pick(last->head);
  if (!first) return std::nullopt;
  return SoftConjunctiveQuery{
      {1}, {atom(c(first->head), first->relation, x1), atom(x1, last->relation, y)}};
}

std::optional<SoftQuery> try_sample(Walker& w, QueryType type) {
  const EntityId a = w.answer();
  switch (type) {
    case QueryType::k1P: {
      const auto f = w.pick(a);
      return single({}, {atom(c(f->head), f->relation, y)});
    }
    case QueryType::k2P: {
      auto ch = chain(w, a);
      if (!ch) return std::nullopt;
      return SoftQuery{{*ch}};
    }
    case QueryType::k2I:
    case QueryType::k2IN: {
      const auto fs = w.pick_distinct(a, 2);
      if (!fs) return std::nullopt;
      return single({}, {atom(c((*fs)[0].head), (*fs)[0].relation, y),
                         atom(c((*fs)[1].head), (*fs)[1].relation, y,
                              type == QueryType::k2IN)});
    }
    case QueryType::k2IL: {
      const auto fs = w.pick_distinct(a, 2);
      if (!fs) return std::nullopt;
      return single({1}, {atom(c((*fs)[0].head), (*fs)[0].relation, y),
                          atom(x1, (*fs)[1].relation, y)});
    }
    case QueryType::k2M: {
      const auto p = w.pick_parallel(a);
      if (!p) return std::nullopt;
      return single({}, {atom(c(p->first.head), p->first.relation, y),
                         atom(c(p->second.head), p->second.relation, y)});
    }
    case QueryType::k2U: {
      const auto f1 = w.pick(a);
      const auto f2 = w.pick(w.answer());
      if (*f1 == *f2) return std::nullopt;
      return SoftQuery{{SoftConjunctiveQuery{{}, {atom(c(f1->head), f1->relation, y)}},
                        SoftConjunctiveQuery{{}, {atom(c(f2->head), f2->relation, y)}}}};
    }
    case QueryType::k3IN: {
      const auto fs = w.pick_distinct(a, 3);
      if (!fs) return std::nullopt;
      return single({}, {atom(c((*fs)[0].head), (*fs)[0].relation, y),
                         atom(c((*fs)[1].head), (*fs)[1].relation, y),
                         atom(c((*fs)[2].head), (*fs)[2].relation, y, true)});
    }
    case QueryType::kIP:
    case QueryType::kINP: {
      const auto last = w.pick(a);
      const auto fs = w.pick_distinct(last->head, 2);
      if (!fs) return std::nullopt;
      return single({1}, {atom(c((*fs)[0].head), (*fs)[0].relation, x1),
                          atom(c((*fs)[1].head), (*fs)[1].relation, x1,
                               type == QueryType::kINP),
                          atom(x1, last->relation, y)});
    }
    case QueryType::kIM: {
      const auto p = w.pick_parallel(a);
      if (!p) return std::nullopt;
      std::vector<InFact> others;
      for (const InFact& f : w.in(a)) {
        if (f.head != p->first.head) others.push_back(f);
      }
      if (others.empty()) return std::nullopt;
      const InFact f1 = others[w.below(others.size())];
      return single({}, {atom(c(f1.head), f1.relation, y),
                         atom(c(p->first.head), p->first.relation, y),
                         atom(c(p->second.head), p->second.relation, y)});
    }
    case QueryType::kUP: {
      auto c1 = chain(w, a);
      auto c2 = chain(w, w.answer());
      if (!c1 || !c2 || *c1 == *c2) return std::nullopt;
      return SoftQuery{{*c1, *c2}};
    }
  }
  return std::nullopt;
}

}  // namespace

SoftQuery sample_query_skeleton(const UncertainKG& kg, QueryType type, std::uint64_t seed,
                                std::size_t retries) {
  Rng rng(seed);
  Walker walker(kg, rng);
  if (walker.empty()) throw Error("train view has no facts to sample from");
  for (std::size_t i = 0; i < retries; ++i) {
    if (auto q = try_sample(walker, type)) return *q;
  }
  throw Error("sampling exhausted for type " + std::string(to_string(type)));
}

namespace {

constexpr std::string_view kAlphaNames[] = {"zero", "low", "normal", "high", "hybrid"};
constexpr std::string_view kBetaNames[] = {"equal", "random"};

}  // namespace

std::string_view to_string(AlphaMode mode) { return kAlphaNames[static_cast<int>(mode)]; }
std::string_view to_string(BetaMode mode) { return kBetaNames[static_cast<int>(mode)]; }

AlphaMode parse_alpha_mode(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kAlphaNames[i] == name) return static_cast<AlphaMode>(i);
  }
  throw ValidationError("unknown alpha mode '" + std::string(name) + "'");
}

BetaMode parse_beta_mode(std::string_view name) {
  for (int i = 0; i < 2; ++i) {
    if (kBetaNames[i] == name) return static_cast<BetaMode>(i);
  }
  throw ValidationError("unknown beta mode '" + std::string(name) + "'");
}

SoftQuery assign_requirements(const SoftQuery& query, const RequirementStrategy& strategy,
                              const UncertainKG& kg, std::uint64_t seed) {
  Rng rng(seed);
  auto draw_mode = [&] { return static_cast<AlphaMode>(rng.below(4)); };
  const AlphaMode query_mode =
      strategy.alpha_mode == AlphaMode::kHybrid && strategy.hybrid_per_query ? draw_mode()
                                                                              : strategy.alpha_mode;
  SoftQuery out = query;
  for (auto& conj : out.disjuncts) {
    for (auto& a : conj.atoms) {
      const AlphaMode mode = query_mode == AlphaMode::kHybrid ? draw_mode() : query_mode;
      double q = 0.0;
      switch (mode) {
        case AlphaMode::kZero:
          break;
        case AlphaMode::kLow:
          q = 25.0;
          break;
        case AlphaMode::kNormal:
          q = 50.0;
          break;
        case AlphaMode::kHigh:
          q = 75.0;
          break;
        case AlphaMode::kHybrid:
          break;
      }
      if (mode == AlphaMode::kZero) {
        a.alpha = 0.0;
      } else {
        const RelationStats& stats = kg.relation_stats(a.relation);
        if (stats.count() == 0) {
          throw ValidationError("no train confidences for relation " +
                                kg.relations().name(a.relation));
        }
        a.alpha = relation_percentile(stats, q);
      }
      a.beta = strategy.beta_mode == BetaMode::kEqual ? 1.0 : 1.0 - rng.uniform();
    }
  }
  return out;
}

namespace {

AnswerMap answer_with(const SoftQuery& q, const InferenceContext& ctx, bool exact,
                      std::uint64_t budget) {
  if (exact) return to_answer_map(brute_force_utility(q, ctx.backend(), budget));
  return to_answer_map(answer_query(q, ctx));
}

}  // namespace

std::pair<AnswerMap, AnswerMap> compute_answers(const SoftQuery& query,
                                                const ConfidenceBackend& base_view,
                                                const ConfidenceBackend& target_view, bool exact,
                                                std::uint64_t budget) {
  InferenceConfig cfg;
  cfg.enumeration_budget = budget;
  return {answer_with(query, InferenceContext(base_view, cfg), exact, budget),
          answer_with(query, InferenceContext(target_view, cfg), exact, budget)};
}

bool filter_useful(const DatasetRecord& record, std::size_t max_answers) {
  const auto& a = record.train_answers;
  const auto& b = record.test_answers;
  if (b.empty() || b.size() > max_answers) return false;
  if (a.size() != b.size()) return true;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return true;
    if (std::abs(ia->second - ib->second) > kUtilityTolerance) return true;
  }
  return false;
}

namespace {

nlohmann::json answers_to_json(const AnswerMap& m, const UncertainKG& kg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [e, v] : m) j[kg.entities().name(e)] = v;
  return j;
}

AnswerMap answers_from_json(const nlohmann::json& j, const UncertainKG& kg) {
  AnswerMap m;
  for (const auto& [name, v] : j.items()) {
    const auto e = kg.entities().find(name);
    if (!e) throw FormatError("unknown entity '" + name + "' in answers");
    const double value = v.get<double>();
    if (!std::isfinite(value) || value <= 0.0) throw FormatError("answer utility must be > 0");
    m.emplace(*e, value);
  }
  return m;
}

}  // namespace

nlohmann::json record_to_json(const DatasetRecord& record, const UncertainKG& kg) {
  nlohmann::json j;
  j["id"] = record.id;
  j["type"] = std::string(to_string(record.type));
  j["query"] = to_json(record.query, kg.entities(), kg.relations());
  j["train_answers"] = answers_to_json(record.train_answers, kg);
  j["test_answers"] = answers_to_json(record.test_answers, kg);
  j["seed"] = record.seed;
  return j;
}

DatasetRecord record_from_json(const nlohmann::json& j, const UncertainKG& kg) {
  try {
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.type = parse_query_type(j.at("type").get<std::string>());
    r.query = query_from_json(j.at("query"), kg.entities(), kg.relations());
    r.train_answers = answers_from_json(j.at("train_answers"), kg);
    r.test_answers = answers_from_json(j.at("test_answers"), kg);
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid record: ") + e.what());
  } catch (const SyntaxError& e) {
    throw FormatError(std::string("invalid record query: ") + e.what());
  }
}

void save_records(const std::filesystem::path& path, std::span<const DatasetRecord> records,
                  const UncertainKG& kg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r, kg).dump() << '\n';
}

namespace {

void load_file(const std::filesystem::path& path, const UncertainKG& kg, std::size_t max_answers,
               std::vector<DatasetRecord>& out) {
  std::ifstream in(path);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw FormatError(path.string() + ": malformed JSON", lineno);
    }
    DatasetRecord r;
    try {
      r = record_from_json(j, kg);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what(), lineno);
    }
    if (!filter_useful(r, max_answers)) {
      throw FormatError(path.string() + ": record " + r.id + " is not a useful query", lineno);
    }
    out.push_back(std::move(r));
  }
}

}  // namespace

std::vector<DatasetRecord> load_records(const std::filesystem::path& path, const UncertainKG& kg,
                                        std::size_t max_answers) {
  std::vector<DatasetRecord> out;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_file(f, kg, max_answers, out);
  } else {
    load_file(path, kg, max_answers, out);
  }
  return out;
}

void to_json(nlohmann::json& j, const DatasetConfig& cfg) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [split, list] : cfg.counts) {
    nlohmann::json per_type = nlohmann::json::object();
    for (const auto& [type, n] : list) per_type[std::string(to_string(type))] = n;
    counts[std::string(to_string(split))] = per_type;
  }
  j = {{"seed", cfg.seed},
       {"max_answers", cfg.max_answers},
       {"attempts_per_record", cfg.attempts_per_record},
       {"skeleton_retries", cfg.skeleton_retries},
       {"exact", cfg.exact},
       {"budget", cfg.budget},
       {"alpha_mode", std::string(to_string(cfg.strategy.alpha_mode))},
       {"beta_mode", std::string(to_string(cfg.strategy.beta_mode))},
       {"hybrid_per_query", cfg.strategy.hybrid_per_query},
       {"counts", counts}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_answers = j.value("max_answers", cfg.max_answers);
    cfg.attempts_per_record = j.value("attempts_per_record", cfg.attempts_per_record);
    cfg.skeleton_retries = j.value("skeleton_retries", cfg.skeleton_retries);
    cfg.exact = j.value("exact", cfg.exact);
    cfg.budget = j.value("budget", cfg.budget);
    cfg.strategy.alpha_mode = parse_alpha_mode(j.value("alpha_mode", std::string("zero")));
    cfg.strategy.beta_mode = parse_beta_mode(j.value("beta_mode", std::string("equal")));
    cfg.strategy.hybrid_per_query = j.value("hybrid_per_query", false);
    if (j.contains("counts")) {
      for (const auto& [split, per_type] : j.at("counts").items()) {
        auto& list = cfg.counts[parse_split(split)];
        for (const auto& [type, n] : per_type.items()) {
          list.emplace_back(parse_query_type(type), n.get<std::size_t>());
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad dataset config: ") + e.what());
  }
  return cfg;
}

bool DatasetReport::shortfall() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const Entry& e) { return e.emitted < e.requested; });
}

nlohmann::json DatasetReport::to_json() const {
  nlohmann::json splits = nlohmann::json::object();
  nlohmann::json shortfalls = nlohmann::json::array();
  for (const Entry& e : entries) {
    splits[std::string(softq::to_string(e.split))][std::string(softq::to_string(e.type))] = {
        {"requested", e.requested}, {"emitted", e.emitted}, {"attempts", e.attempts}};
    if (e.emitted < e.requested) {
      shortfalls.push_back({{"split", softq::to_string(e.split)},
                            {"type", softq::to_string(e.type)},
                            {"missing", e.requested - e.emitted}});
    }
  }
  return {{"splits", splits}, {"shortfalls", shortfalls}};
}

Split target_view(Split split) { return split == Split::kTest ? Split::kTest : Split::kValid; }

std::vector<DatasetRecord> generate_records(const UncertainKG& kg, const DatasetConfig& config,
                                            Split split, QueryType type, std::size_t count,
                                            DatasetReport::Entry* entry) {
  if (split == Split::kTrain && !is_training_type(type)) {
    throw ValidationError("query type " + std::string(to_string(type)) +
                          " is evaluation-only and cannot be used for training");
  }
  const ClosedWorldBackend base(kg, Split::kTrain);
  const ClosedWorldBackend target(kg, target_view(split));
  InferenceConfig icfg;
  icfg.enumeration_budget = config.budget;
  const InferenceContext base_ctx(base, icfg);
  const InferenceContext target_ctx(target, icfg);

  std::vector<DatasetRecord> out;
  std::size_t attempts = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t record_seed =
        derive_seed(config.seed, "record",
                    {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(type), i});
    for (std::size_t a = 0; a < config.attempts_per_record; ++a) {
      ++attempts;
      const std::uint64_t s = derive_seed(record_seed, "attempt", {a});
      SoftQuery skeleton;
      try {
        skeleton = sample_query_skeleton(kg, type, derive_seed(s, "skeleton"),
                                         config.skeleton_retries);
      } catch (const BudgetExceeded&) {
        throw;
      } catch (const Error&) {
        continue;
      }
      DatasetRecord r;
      r.id = std::string(to_string(split)) + "-" + std::string(to_string(type)) + "-" +
             std::to_string(i);
      r.type = type;
      r.query = assign_requirements(skeleton, config.strategy, kg, derive_seed(s, "requirements"));
      r.train_answers = answer_with(r.query, base_ctx, config.exact, config.budget);
      r.test_answers = answer_with(r.query, target_ctx, config.exact, config.budget);
      r.seed = s;
      if (filter_useful(r, config.max_answers)) {
        out.push_back(std::move(r));
        break;
      }
    }
  }
  if (entry) {
    *entry = {split, type, count, out.size(), attempts};
  }
  return out;
}

DatasetReport build_dataset(const UncertainKG& kg, const DatasetConfig& config,
                            const std::filesystem::path& out_dir) {
  for (const auto& [split, list] : config.counts) {
    for (const auto& [type, n] : list) {
      if (split == Split::kTrain && !is_training_type(type)) {
        throw ValidationError("query type " + std::string(to_string(type)) +
                              " is evaluation-only and cannot be used for training");
      }
    }
  }
  DatasetReport report;
  for (const auto& [split, list] : config.counts) {
    for (const auto& [type, n] : list) {
      DatasetReport::Entry entry;
      const auto records = generate_records(kg, config, split, type, n, &entry);
      report.entries.push_back(entry);
      save_records(out_dir / std::string(to_string(split)) /
                       (std::string(to_string(type)) + ".jsonl"),
                   records, kg);
    }
  }
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "stats.json", std::ios::binary);
    out << report.to_json().dump(2) << '\n';
  }
  {
    nlohmann::json meta;
    meta["config"] = config;
    meta["templates"] = template_catalog();
    std::ofstream out(out_dir / "metadata.json", std::ios::binary);
    out << meta.dump(2) << '\n';
  }
  return report;
}

}  // namespace softq
