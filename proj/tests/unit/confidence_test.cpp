#include <gtest/gtest.h>

#include "reference.hpp"
#include "softq/confidence.hpp"
#include "softq/error.hpp"
#include "softq/synthetic.hpp"

namespace softq {
namespace {

using test::make_kg;

TEST(LookupBackend, ClosedWorld) {
  const auto kg = make_kg({{"a", "r", "b", 0.9}}, {}, {{"b", "r", "a", 0.5}});
  const auto train = lookup_backend(kg, Split::kTrain);
  const auto test = lookup_backend(kg, Split::kTest);
  const auto a = kg.entities().at("a"), b = kg.entities().at("b");
  EXPECT_EQ(train.confidence(a, 0, b), 0.9);
  EXPECT_EQ(train.confidence(b, 0, a), 0.0);
  EXPECT_EQ(test.confidence(a, 0, b), 0.9);
  EXPECT_EQ(test.confidence(b, 0, a), 0.5);
}

TEST(LookupBackend, RelationMatrixMatchesPointwise) {
  SyntheticKGConfig cfg;
  cfg.entities = 12;
  cfg.train_facts = 60;
  const auto kg = random_kg(cfg);
  for (Split view : {Split::kTrain, Split::kTest}) {
    const auto backend = lookup_backend(kg, view);
    for (RelationId r = 0; r < kg.num_relations(); ++r) {
      const auto m = backend.relation_matrix(r, std::nullopt);
      EXPECT_EQ(m.default_value(), 0.0);
      const auto thresholded = backend.relation_matrix(r, 0.5);
      for (EntityId s = 0; s < kg.num_entities(); ++s) {
        for (EntityId o = 0; o < kg.num_entities(); ++o) {
          const double p = backend.confidence(s, r, o);
          EXPECT_EQ(m.at(s, o), p);
          EXPECT_EQ(thresholded.at(s, o), p <= 0.5 ? 0.0 : p);
        }
      }
    }
  }
}

TEST(TabularBackend, ListedAndUnlisted) {
  const auto kg = make_kg({{"a", "r", "b", 0.9}, {"b", "r", "c", 0.5}});
  const auto dir = test::scratch_dir("tabular");
  test::write_text(dir / "scores.tsv", "a\tr\tb\t0.42\nc\tr\ta\t1\n");
  const TabularBackend backend(dir / "scores.tsv", kg);
  const auto a = kg.entities().at("a"), b = kg.entities().at("b"), c = kg.entities().at("c");
  EXPECT_EQ(backend.confidence(a, 0, b), 0.42);
  EXPECT_EQ(backend.confidence(c, 0, a), 1.0);
  EXPECT_EQ(backend.confidence(b, 0, c), 0.0);
  const auto m = backend.relation_matrix(0, std::nullopt);
  EXPECT_EQ(m.at(a, b), 0.42);
  EXPECT_EQ(m.stored_count(), 2u);
}

TEST(TabularBackend, Errors) {
  const auto kg = make_kg({{"a", "r", "b", 0.9}});
  const auto dir = test::scratch_dir("tabular-errors");
  test::write_text(dir / "range.tsv", "a\tr\tb\t1.7\n");
  EXPECT_THROW(TabularBackend(dir / "range.tsv", kg), FormatError);
  test::write_text(dir / "entity.tsv", "a\tr\tzz\t0.5\n");
  EXPECT_THROW(TabularBackend(dir / "entity.tsv", kg), FormatError);
  test::write_text(dir / "relation.tsv", "a\tq\tb\t0.5\n");
  EXPECT_THROW(TabularBackend(dir / "relation.tsv", kg), FormatError);
  test::write_text(dir / "malformed.tsv", "a\tr\tb\thigh\n");
  EXPECT_THROW(TabularBackend(dir / "malformed.tsv", kg), FormatError);
  EXPECT_THROW(TabularBackend(dir / "missing.tsv", kg), std::filesystem::filesystem_error);
}

TEST(TransformedBackend, AppliesAndClamps) {
  const auto kg = make_kg({{"a", "r", "b", 0.5}, {"b", "r", "a", 1.0}});
  const auto base = lookup_backend(kg, Split::kTrain);
  const TransformedBackend t(base, [](double p) { return 0.8 * p + 0.1 + (p == 1.0 ? 0.5 : 0.0); });
  const auto a = kg.entities().at("a"), b = kg.entities().at("b");
  EXPECT_EQ(t.confidence(a, 0, b), 0.8 * 0.5 + 0.1);
  EXPECT_EQ(t.confidence(b, 0, a), 1.0);
  EXPECT_EQ(t.confidence(a, 0, a), 0.1);
  const auto m = t.relation_matrix(0, std::nullopt);
  EXPECT_EQ(m.default_value(), 0.1);
  for (EntityId s = 0; s < 2; ++s) {
    for (EntityId o = 0; o < 2; ++o) EXPECT_EQ(m.at(s, o), t.confidence(s, 0, o));
  }
}

TEST(ClampConfidence, Range) {
  EXPECT_EQ(clamp_confidence(-0.5), 0.0);
  EXPECT_EQ(clamp_confidence(1.5), 1.0);
  EXPECT_EQ(clamp_confidence(std::nan("")), 0.0);
  EXPECT_EQ(clamp_confidence(0.25), 0.25);
}

}  // namespace
}  // namespace softq
