#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "reference.hpp"
#include "softq/dataset.hpp"
#include "softq/error.hpp"
#include "softq/oracle.hpp"

namespace softq {
namespace {

using test::kNegInf;

const UncertainKG& toy() {
  static const UncertainKG kg = load_kg_dir(std::filesystem::path(SOFTQ_TEST_DATA) / "toy");
  return kg;
}

// Expected skeleton shape per conjunct: existential count, then per atom
// (head kind, tail kind, negated) with 'c' constant, 'y' free, 'x' existential.
struct Shape {
  std::size_t existentials;
  std::vector<std::string> atoms;  // e.g. "c>y", "c>y!"
};

std::string describe(const SoftAtom& a) {
  auto k = [](const Term& t) { return t.is_constant() ? 'c' : t.is_free() ? 'y' : 'x'; };
  std::string s{k(a.head), '>', k(a.tail)};
  if (a.negated) s += '!';
  return s;
}

std::vector<Shape> expected_shape(QueryType t) {
  switch (t) {
    case QueryType::k1P: return {{0, {"c>y"}}};
    case QueryType::k2P: return {{1, {"c>x", "x>y"}}};
    case QueryType::k2I: return {{0, {"c>y", "c>y"}}};
    case QueryType::k2IN: return {{0, {"c>y", "c>y!"}}};
    case QueryType::k2IL: return {{1, {"c>y", "x>y"}}};
    case QueryType::k2M: return {{0, {"c>y", "c>y"}}};
    case QueryType::k2U: return {{0, {"c>y"}}, {0, {"c>y"}}};
    case QueryType::k3IN: return {{0, {"c>y", "c>y", "c>y!"}}};
    case QueryType::kIP: return {{1, {"c>x", "c>x", "x>y"}}};
    case QueryType::kINP: return {{1, {"c>x", "c>x!", "x>y"}}};
    case QueryType::kIM: return {{0, {"c>y", "c>y", "c>y"}}};
    case QueryType::kUP: return {{1, {"c>x", "x>y"}}, {1, {"c>x", "x>y"}}};
  }
  return {};
}

TEST(SampleQuerySkeleton, ShapesOfAllTypes) {
  const auto& kg = toy();
  const auto backend = lookup_backend(kg, Split::kTrain);
  EXPECT_EQ(all_query_types().size(), 12u);
  for (QueryType type : all_query_types()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto q = sample_query_skeleton(kg, type, seed);
      SCOPED_TRACE(std::string(to_string(type)) + " seed " + std::to_string(seed));
      validate_query(q, kg.num_entities(), kg.num_relations());
      const auto shape = expected_shape(type);
      ASSERT_EQ(q.disjuncts.size(), shape.size());
      for (std::size_t d = 0; d < shape.size(); ++d) {
        const auto& conj = q.disjuncts[d];
        EXPECT_EQ(conj.existentials.size(), shape[d].existentials);
        ASSERT_EQ(conj.atoms.size(), shape[d].atoms.size());
        for (std::size_t i = 0; i < conj.atoms.size(); ++i) {
          EXPECT_EQ(describe(conj.atoms[i]), shape[d].atoms[i]);
          EXPECT_EQ(conj.atoms[i].alpha, 0.0);
          EXPECT_EQ(conj.atoms[i].beta, 1.0);
        }
      }
      if (type == QueryType::k2M) {
        EXPECT_EQ(q.disjuncts[0].atoms[0].head, q.disjuncts[0].atoms[1].head);
        EXPECT_NE(q.disjuncts[0].atoms[0].relation, q.disjuncts[0].atoms[1].relation);
      }
      if (type == QueryType::kIM) {
        EXPECT_EQ(q.disjuncts[0].atoms[1].head, q.disjuncts[0].atoms[2].head);
        EXPECT_NE(q.disjuncts[0].atoms[0].head, q.disjuncts[0].atoms[1].head);
      }
      // Some entity is an answer under the train view.
      EXPECT_GT(brute_force_utility(q, backend).support(), 0u);
    }
  }
}

TEST(SampleQuerySkeleton, NegatedAnswerReachable) {
  const auto& kg = toy();
  const auto backend = lookup_backend(kg, Split::kTrain);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto q = sample_query_skeleton(kg, QueryType::k2IN, seed);
    const auto& neg = q.disjuncts[0].atoms[1];
    const auto u = brute_force_utility(q, backend);
    // The sampled answer carries a train fact for the negated atom as well.
    bool found = false;
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
      if (u[e] != kNegInf && kg.contains(Split::kTrain, neg.head.id, neg.relation, e)) found = true;
    }
    EXPECT_TRUE(found) << "seed " << seed;
  }
}

TEST(SampleQuerySkeleton, Errors) {
  // No entity has two incoming facts.
  const auto thin = test::make_kg({{"a", "r", "b", 0.5}});
  EXPECT_THROW(sample_query_skeleton(thin, QueryType::k2I, 0, 5), Error);
  EXPECT_EQ(sample_query_skeleton(toy(), QueryType::k2P, 7),
            sample_query_skeleton(toy(), QueryType::k2P, 7));
}

UncertainKG percentile_kg() {
  return test::make_kg({{"a", "r", "b", 0.8},
                        {"b", "r", "c", 0.2},
                        {"c", "r", "d", 0.6},
                        {"d", "r", "a", 0.4},
                        {"a", "s", "c", 0.5}});
}

SoftQuery two_atoms(const UncertainKG& kg) {
  return parse_query("(a, r, y, 0, 1) & (c, s, y, 0, 1)", kg.entities(), kg.relations());
}

TEST(AssignRequirements, ZeroEqual) {
  const auto kg = percentile_kg();
  auto q = two_atoms(kg);
  for (auto& a : q.disjuncts[0].atoms) {
    a.alpha = 0.5;
    a.beta = 3.0;
  }
  const auto out = assign_requirements(q, {AlphaMode::kZero, BetaMode::kEqual}, kg, 1);
  for (const auto& a : out.disjuncts[0].atoms) {
    EXPECT_EQ(a.alpha, 0.0);
    EXPECT_EQ(a.beta, 1.0);
  }
}

TEST(AssignRequirements, PercentileModes) {
  const auto kg = percentile_kg();
  const auto q = two_atoms(kg);
  // Sorted r confidences [0.2, 0.4, 0.6, 0.8]: ranks ceil(0.25*4)=1, ceil(0.5*4)=2, ceil(0.75*4)=3.
  const std::pair<AlphaMode, double> cases[] = {
      {AlphaMode::kLow, 0.2}, {AlphaMode::kNormal, 0.4}, {AlphaMode::kHigh, 0.6}};
  for (const auto& [mode, want] : cases) {
    const auto out = assign_requirements(q, {mode, BetaMode::kEqual}, kg, 0);
    EXPECT_EQ(out.disjuncts[0].atoms[0].alpha, want);
    EXPECT_EQ(out.disjuncts[0].atoms[1].alpha, 0.5);  // s has a single fact
  }
}

TEST(AssignRequirements, RandomBetaReproducible) {
  const auto kg = percentile_kg();
  const auto q = two_atoms(kg);
  const RequirementStrategy s{AlphaMode::kZero, BetaMode::kRandom};
  const auto a = assign_requirements(q, s, kg, 11);
  EXPECT_EQ(a, assign_requirements(q, s, kg, 11));
  EXPECT_NE(a, assign_requirements(q, s, kg, 12));
  for (const auto& atom : a.disjuncts[0].atoms) {
    EXPECT_GT(atom.beta, 0.0);
    EXPECT_LE(atom.beta, 1.0);
  }
}

TEST(AssignRequirements, HybridDrawsFromPercentiles) {
  const auto& kg = toy();
  std::set<double> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto q = sample_query_skeleton(kg, QueryType::k3IN, seed);
    const auto out = assign_requirements(q, {AlphaMode::kHybrid, BetaMode::kEqual}, kg, seed);
    for (const auto& a : out.disjuncts[0].atoms) {
      const auto& stats = kg.relation_stats(a.relation);
      const std::set<double> allowed{0.0, relation_percentile(stats, 25),
                                     relation_percentile(stats, 50),
                                     relation_percentile(stats, 75)};
      EXPECT_TRUE(allowed.count(a.alpha)) << a.alpha;
      EXPECT_EQ(a.beta, 1.0);
      seen.insert(a.alpha);
    }
    RequirementStrategy per_query{AlphaMode::kHybrid, BetaMode::kEqual, true};
    const auto pq = assign_requirements(q, per_query, kg, seed);
    // One mode for the whole query: either every alpha is zero or none is.
    const auto zeros = std::count_if(pq.disjuncts[0].atoms.begin(), pq.disjuncts[0].atoms.end(),
                                     [](const SoftAtom& a) { return a.alpha == 0.0; });
    EXPECT_TRUE(zeros == 0 || zeros == 3);
  }
  EXPECT_GT(seen.size(), 2u);
}

TEST(AssignRequirements, MissingStats) {
  const auto kg = test::make_kg({{"a", "r", "b", 0.5}}, {}, {{"a", "s", "b", 0.5}});
  const auto q = parse_query("(a, s, y, 0, 1)", kg.entities(), kg.relations());
  EXPECT_THROW(assign_requirements(q, {AlphaMode::kHigh, BetaMode::kEqual}, kg, 0),
               ValidationError);
  EXPECT_NO_THROW(assign_requirements(q, {AlphaMode::kZero, BetaMode::kEqual}, kg, 0));
}

TEST(ComputeAnswers, Cases) {
  const auto kg = test::make_kg({{"a", "r", "b", 0.5}, {"c", "r", "d", 0.25}}, {},
                                {{"a", "r", "c", 0.25}, {"c", "r", "d", 0.75}, {"d", "s", "a", 1}});
  const auto train = lookup_backend(kg, Split::kTrain);
  const auto test = lookup_backend(kg, Split::kTest);
  const auto id = [&](const char* n) { return kg.entities().at(n); };

  for (bool exact : {true, false}) {
    const auto unchanged = parse_query("(b, r, y, 0, 1)", kg.entities(), kg.relations());
    const auto [u1, u2] = compute_answers(
        parse_query("(a, r, y, 0.4, 1)", kg.entities(), kg.relations()), train, test, exact);
    EXPECT_EQ(u1, u2);
    EXPECT_EQ(u1, (AnswerMap{{id("b"), 0.5}}));

    const auto [n1, n2] = compute_answers(
        parse_query("(a, r, y, 0, 1)", kg.entities(), kg.relations()), train, test, exact);
    EXPECT_EQ(n1, (AnswerMap{{id("b"), 0.5}}));
    EXPECT_EQ(n2, (AnswerMap{{id("b"), 0.5}, {id("c"), 0.25}}));

    const auto [r1, r2] = compute_answers(
        parse_query("(c, r, y, 0, 2)", kg.entities(), kg.relations()), train, test, exact);
    EXPECT_EQ(r1, (AnswerMap{{id("d"), 0.5}}));
    EXPECT_EQ(r2, (AnswerMap{{id("d"), 1.5}}));

    const auto [e1, e2] = compute_answers(unchanged, train, test, exact);
    EXPECT_TRUE(e1.empty());
    EXPECT_TRUE(e2.empty());
  }
  const auto big = parse_query("EXISTS x1, x2 . (x1, r, x2, 0, 1) & (x2, r, y, 0, 1)",
                               kg.entities(), kg.relations());
  EXPECT_THROW(compute_answers(big, train, test, true, 10), BudgetExceeded);
}

TEST(FilterUseful, Examples) {
  DatasetRecord r;
  r.train_answers = {{1, 0.5}};
  r.test_answers = {{1, 0.5}};
  EXPECT_FALSE(filter_useful(r));
  r.test_answers = {{1, 0.75}};
  EXPECT_TRUE(filter_useful(r));
  r.test_answers = {{1, 0.5 + 1e-13}};
  EXPECT_FALSE(filter_useful(r));
  r.test_answers = {{1, 0.5}, {2, 0.5}};
  EXPECT_TRUE(filter_useful(r));
  EXPECT_FALSE(filter_useful(r, 1));
  r.test_answers.clear();
  EXPECT_FALSE(filter_useful(r));
}

DatasetConfig small_config() {
  DatasetConfig cfg;
  cfg.seed = 3;
  cfg.strategy = {AlphaMode::kHybrid, BetaMode::kRandom};
  cfg.counts[Split::kTrain] = {{QueryType::k1P, 6}, {QueryType::k2P, 4}, {QueryType::k2IN, 3}};
  cfg.counts[Split::kTest] = {{QueryType::k2U, 3}, {QueryType::kIP, 3}};
  return cfg;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[std::filesystem::relative(entry.path(), dir).string()] = test::read_text(entry.path());
    }
  }
  return files;
}

TEST(BuildDataset, DeterministicFiles) {
  const auto a = test::scratch_dir("dataset-a"), b = test::scratch_dir("dataset-b");
  const auto ra = build_dataset(toy(), small_config(), a);
  build_dataset(toy(), small_config(), b);
  const auto fa = snapshot(a);
  EXPECT_EQ(fa, snapshot(b));
  EXPECT_TRUE(fa.count("metadata.json"));
  EXPECT_TRUE(fa.count("stats.json"));
  EXPECT_TRUE(fa.count("train/1P.jsonl"));
  EXPECT_TRUE(fa.count("test/2U.jsonl"));
  for (const auto& e : ra.entries) EXPECT_LE(e.emitted, e.requested);

  auto other = small_config();
  other.seed = 4;
  const auto c = test::scratch_dir("dataset-c");
  build_dataset(toy(), other, c);
  EXPECT_NE(fa, snapshot(c));
}

TEST(BuildDataset, RecordsPassRecheckOnLoad) {
  const auto dir = test::scratch_dir("dataset-load");
  const auto report = build_dataset(toy(), small_config(), dir);
  std::size_t loaded = 0;
  for (const char* split : {"train", "test"}) {
    const auto records = load_records(dir / split, toy());
    for (const auto& r : records) EXPECT_TRUE(filter_useful(r));
    loaded += records.size();
  }
  std::size_t emitted = 0;
  for (const auto& e : report.entries) emitted += e.emitted;
  EXPECT_EQ(loaded, emitted);
  EXPECT_GT(loaded, 0u);
}

TEST(BuildDataset, RejectsEvalOnlyTypeInTrain) {
  DatasetConfig cfg;
  cfg.counts[Split::kTrain] = {{QueryType::k3IN, 1}};
  EXPECT_THROW(build_dataset(toy(), cfg, test::scratch_dir("dataset-bad")), ValidationError);
  EXPECT_FALSE(is_training_type(QueryType::k2U));
  EXPECT_FALSE(is_training_type(QueryType::kUP));
  EXPECT_TRUE(is_training_type(QueryType::k2IL));
}

TEST(BuildDataset, HundredOnePQueriesOrShortfall) {
  DatasetConfig cfg;
  cfg.seed = 1;
  cfg.counts[Split::kTrain] = {{QueryType::k1P, 100}};
  const auto report = build_dataset(toy(), cfg, test::scratch_dir("dataset-100"));
  ASSERT_EQ(report.entries.size(), 1u);
  const auto& e = report.entries[0];
  EXPECT_EQ(e.requested, 100u);
  if (e.emitted != 100) {
    EXPECT_TRUE(report.shortfall());
    EXPECT_LT(e.emitted, 100u);
  } else {
    EXPECT_FALSE(report.shortfall());
  }
}

TEST(DatasetRecords, RoundTrip) {
  const auto& kg = toy();
  auto cfg = small_config();
  const auto records = generate_records(kg, cfg, Split::kTest, QueryType::kUP, 4);
  ASSERT_FALSE(records.empty());
  const auto dir = test::scratch_dir("records");
  save_records(dir / "r.jsonl", records, kg);
  const auto back = load_records(dir / "r.jsonl", kg);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, records[i].id);
    EXPECT_EQ(back[i].type, records[i].type);
    EXPECT_EQ(back[i].query, records[i].query);
    EXPECT_EQ(back[i].train_answers, records[i].train_answers);
    EXPECT_EQ(back[i].test_answers, records[i].test_answers);
    EXPECT_EQ(back[i].seed, records[i].seed);
    EXPECT_EQ(record_to_json(back[i], kg), record_to_json(records[i], kg));
  }
}

TEST(DatasetRecords, LoadRejectsNonUseful) {
  const auto& kg = toy();
  DatasetRecord r;
  r.id = "x";
  r.query = parse_query("(ent0, likes, y, 0, 1)", kg.entities(), kg.relations());
  r.train_answers = {{1, 0.5}};
  r.test_answers = {{1, 0.5}};
  const auto dir = test::scratch_dir("records-bad");
  save_records(dir / "r.jsonl", std::vector<DatasetRecord>{r}, kg);
  EXPECT_THROW(load_records(dir / "r.jsonl", kg), FormatError);
  test::write_text(dir / "junk.jsonl", "{not json\n");
  EXPECT_THROW(load_records(dir / "junk.jsonl", kg), FormatError);
}

TEST(DatasetRecords, TestViewAnswersMatchOracle) {
  const auto& kg = toy();
  DatasetConfig cfg;
  cfg.seed = 9;
  cfg.strategy = {AlphaMode::kHybrid, BetaMode::kRandom};
  const auto train = lookup_backend(kg, Split::kTrain);
  const auto valid = lookup_backend(kg, Split::kValid);
  for (QueryType t : {QueryType::k2P, QueryType::k2IL}) {
    for (const auto& r : generate_records(kg, cfg, Split::kTrain, t, 3)) {
      EXPECT_EQ(r.train_answers, to_answer_map(brute_force_utility(r.query, train)));
      EXPECT_EQ(r.test_answers, to_answer_map(brute_force_utility(r.query, valid)));
    }
  }
  EXPECT_EQ(target_view(Split::kTrain), Split::kValid);
  EXPECT_EQ(target_view(Split::kTest), Split::kTest);
}

}  // namespace
}  // namespace softq
