#include <gtest/gtest.h>

#include "reference.hpp"
#include "softq/error.hpp"
#include "softq/kg.hpp"

namespace softq {
namespace {

using test::make_kg;
using test::scratch_dir;
using test::write_text;

TEST(LoadKg, ParsesQuadruples) {
  const auto dir = scratch_dir("kg-parse");
  write_text(dir / "f.tsv", "a\tr\tb\t0.9\na\tr\tc\t0.6\n");
  const auto kg = load_kg(dir / "f.tsv");
  EXPECT_EQ(kg.num_entities(), 3u);
  EXPECT_EQ(kg.num_relations(), 1u);
  EXPECT_EQ(kg.facts().size(), 2u);
  EXPECT_EQ(kg.entities().name(0), "a");
  EXPECT_EQ(kg.entities().name(1), "b");
  EXPECT_EQ(kg.entities().name(2), "c");
}

TEST(LoadKg, EmptyFileHasNoFacts) {
  const auto dir = scratch_dir("kg-empty");
  write_text(dir / "f.tsv", "");
  try {
    load_kg(dir / "f.tsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("no facts"), std::string::npos);
  }
}

TEST(LoadKg, ConfidenceOutOfRange) {
  const auto dir = scratch_dir("kg-range");
  write_text(dir / "f.tsv", "a\tr\tc\t0.5\na\tr\tb\t1.3\n");
  try {
    load_kg(dir / "f.tsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("confidence out of range"), std::string::npos);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadKg, MalformedLineReportsLineNumber) {
  const auto dir = scratch_dir("kg-malformed");
  write_text(dir / "f.tsv", "a\tr\tb\t0.5\na\tr\tb\n");
  try {
    load_kg(dir / "f.tsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  write_text(dir / "g.tsv", "a\tr\tb\tzero\n");
  EXPECT_THROW(load_kg(dir / "g.tsv"), FormatError);
}

TEST(LoadKg, DuplicateWithinSplitIsAnError) {
  const auto dir = scratch_dir("kg-dup");
  write_text(dir / "f.tsv", "a\tr\tb\t0.5\na\tr\tb\t0.6\n");
  EXPECT_THROW(load_kg(dir / "f.tsv"), FormatError);
}

TEST(LoadKg, MissingFile) {
  EXPECT_THROW(load_kg("/nonexistent/softq/file.tsv"), std::filesystem::filesystem_error);
}

TEST(LoadKg, Deterministic) {
  const auto dir = scratch_dir("kg-det");
  write_text(dir / "f.tsv", "q\tr2\tz\t0.5\nz\tr1\tq\t0.25\nm\tr2\tq\t1\n");
  const auto a = load_kg(dir / "f.tsv");
  const auto b = load_kg(dir / "f.tsv");
  ASSERT_EQ(a.num_entities(), b.num_entities());
  for (std::uint32_t i = 0; i < a.num_entities(); ++i) {
    EXPECT_EQ(a.entities().name(i), b.entities().name(i));
  }
  for (std::uint32_t i = 0; i < a.num_relations(); ++i) {
    EXPECT_EQ(a.relations().name(i), b.relations().name(i));
  }
}

TEST(LoadKgDir, ReconstructsNesting) {
  const auto dir = scratch_dir("kg-dir");
  write_text(dir / "train.tsv", "a\tr\tb\t0.9\n");
  write_text(dir / "valid.tsv", "b\tr\tc\t0.5\n");
  write_text(dir / "test.tsv", "c\tr\ta\t0.25\n");
  const auto kg = load_kg_dir(dir);
  const auto a = kg.entities().at("a"), b = kg.entities().at("b"), c = kg.entities().at("c");
  const auto r = kg.relations().at("r");
  EXPECT_EQ(kg.confidence(Split::kTrain, a, r, b), 0.9);
  EXPECT_EQ(kg.confidence(Split::kTrain, b, r, c), 0.0);
  EXPECT_EQ(kg.confidence(Split::kValid, b, r, c), 0.5);
  EXPECT_EQ(kg.confidence(Split::kValid, c, r, a), 0.0);
  EXPECT_EQ(kg.confidence(Split::kTest, c, r, a), 0.25);
  EXPECT_EQ(kg.facts_in(Split::kTrain).size(), 1u);
  EXPECT_EQ(kg.facts_in(Split::kValid).size(), 2u);
  EXPECT_EQ(kg.facts_in(Split::kTest).size(), 3u);
}

TEST(ClosedWorld, Lookup) {
  const auto kg = make_kg({{"a", "r", "b", 0.9}}, {}, {{"c", "r", "a", 0.5}});
  const auto a = kg.entities().at("a"), b = kg.entities().at("b"), c = kg.entities().at("c");
  const auto r = kg.relations().at("r");
  EXPECT_EQ(kg.confidence(Split::kTrain, a, r, b), 0.9);
  EXPECT_EQ(kg.confidence(Split::kTrain, b, r, a), 0.0);
  EXPECT_EQ(kg.confidence(Split::kTrain, c, r, a), 0.0);
  EXPECT_EQ(kg.confidence(Split::kTest, c, r, a), 0.5);
  EXPECT_THROW(kg.confidence(Split::kTrain, 7, r, a), ValidationError);
}

TEST(ClosedWorld, TrainFactsAgreeAcrossViews) {
  const auto kg = make_kg({{"a", "r", "b", 0.75}, {"b", "s", "c", 0.5}},
                          {{"c", "r", "a", 0.25}}, {{"a", "s", "a", 1.0}});
  for (const auto& f : kg.facts_in(Split::kTrain)) {
    const double v = kg.confidence(Split::kTrain, f.head, f.relation, f.tail);
    EXPECT_EQ(kg.confidence(Split::kValid, f.head, f.relation, f.tail), v);
    EXPECT_EQ(kg.confidence(Split::kTest, f.head, f.relation, f.tail), v);
  }
}

TEST(ClosedWorld, LaterSplitOverridesWithWarning) {
  const auto kg = make_kg({{"a", "r", "b", 0.5}}, {}, {{"a", "r", "b", 0.75}});
  const auto a = kg.entities().at("a"), b = kg.entities().at("b");
  EXPECT_EQ(kg.confidence(Split::kTrain, a, 0, b), 0.5);
  EXPECT_EQ(kg.confidence(Split::kValid, a, 0, b), 0.5);
  EXPECT_EQ(kg.confidence(Split::kTest, a, 0, b), 0.75);
  EXPECT_FALSE(kg.warnings().empty());
}

TEST(RelationPercentile, NearestRank) {
  RelationStats s{0, {0.2, 0.4, 0.6, 0.8}};
  EXPECT_EQ(relation_percentile(s, 50), 0.4);
  EXPECT_EQ(relation_percentile(s, 75), 0.6);
  EXPECT_EQ(relation_percentile(s, 25), 0.2);
  EXPECT_EQ(relation_percentile(s, 0), 0.2);
  EXPECT_EQ(relation_percentile(s, 100), 0.8);
  RelationStats one{0, {0.7}};
  for (double q : {0.0, 13.0, 50.0, 99.0, 100.0}) EXPECT_EQ(relation_percentile(one, q), 0.7);
}

TEST(RelationPercentile, Errors) {
  EXPECT_THROW(relation_percentile(RelationStats{}, 50), ValidationError);
  RelationStats s{0, {0.1}};
  EXPECT_THROW(relation_percentile(s, 101), ValidationError);
  EXPECT_THROW(relation_percentile(s, -1), ValidationError);
}

TEST(RelationPercentile, MonotoneInQ) {
  RelationStats s{0, {0.05, 0.1, 0.1, 0.3, 0.55, 0.9, 1.0}};
  double prev = -1.0;
  for (int q = 0; q <= 100; ++q) {
    const double v = relation_percentile(s, q);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(RelationStats, SortedTrainConfidences) {
  const auto kg = make_kg({{"a", "r", "b", 0.75}, {"b", "r", "c", 0.25}, {"c", "r", "a", 0.5}},
                          {{"a", "r", "c", 0.125}});
  const auto& s = kg.relation_stats(0);
  EXPECT_EQ(s.sorted, (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_EQ(s.count(), 3u);
}

}  // namespace
}  // namespace softq
