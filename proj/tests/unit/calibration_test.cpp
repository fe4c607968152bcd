#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "softq/calibration.hpp"
#include "softq/error.hpp"
#include "softq/inference.hpp"

namespace softq {
namespace {

SoftQuery one_atom(double alpha) {
  SoftQuery q;
  q.disjuncts.push_back({{}, {{Term::constant(0), 0, Term::free(), alpha, 1.0, false}}});
  return q;
}

TEST(Debias, ShiftsAndClamps) {
  EXPECT_DOUBLE_EQ(debias_query(one_atom(0.7), {0.1}).disjuncts[0].atoms[0].alpha, 0.7 - 0.1);
  EXPECT_EQ(debias_query(one_atom(0.7), {0.0}), one_atom(0.7));
  EXPECT_EQ(debias_query(one_atom(0.05), {0.1}).disjuncts[0].atoms[0].alpha, 0.0);
  EXPECT_THROW(debias_query(one_atom(0.5), {-0.1}), ValidationError);
  EXPECT_THROW(debias_query(one_atom(0.5), {1.5}), ValidationError);
}

TEST(Debias, OnlyAlphaChanges) {
  Rng rng(3);
  SyntheticQueryConfig cfg;
  cfg.max_disjuncts = 2;
  for (int i = 0; i < 50; ++i) {
    const auto q = random_query(8, 2, cfg, rng);
    auto d = debias_query(q, {0.1});
    for (std::size_t k = 0; k < q.disjuncts.size(); ++k) {
      for (std::size_t j = 0; j < q.disjuncts[k].atoms.size(); ++j) {
        auto& a = d.disjuncts[k].atoms[j];
        EXPECT_EQ(a.alpha, std::max(q.disjuncts[k].atoms[j].alpha - 0.1, 0.0));
        a.alpha = q.disjuncts[k].atoms[j].alpha;
      }
    }
    EXPECT_EQ(d, q);
  }
}

TEST(CalibratedConfidence, Examples) {
  EXPECT_EQ(calibrated_confidence(0.5, 1.0, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(calibrated_confidence(0.1, -0.5, 0.0), 0.05);
  EXPECT_EQ(calibrated_confidence(0.3, 0.0, 0.0), 0.3);
  EXPECT_EQ(calibrated_confidence(0.3, -2.0, 0.0), 0.0);
}

TEST(AffineCalibration, LayoutAndAffine) {
  const auto scorer = EmbeddingScorer::random(3, 2, 2, 4);
  AffineCalibration cal(2);
  EXPECT_EQ(cal.parameters().size(), 3u * 6u);
  Rng rng(1);
  for (double& v : cal.parameters()) v = rng.uniform(-1, 1);
  const auto [rho, lambda] = cal.affine(scorer, 0, 1, 2);
  auto part = [&](Role role, std::span<const double> e, int row) {
    const auto w = cal.weights(role);
    return w[row * 2] * e[0] + w[row * 2 + 1] * e[1] + cal.bias(role)[row];
  };
  const double want_rho = part(Role::kHead, scorer.entity(0), 0) +
                          part(Role::kRelation, scorer.relation(1), 0) +
                          part(Role::kTail, scorer.entity(2), 0);
  const double want_lambda = part(Role::kHead, scorer.entity(0), 1) +
                             part(Role::kRelation, scorer.relation(1), 1) +
                             part(Role::kTail, scorer.entity(2), 1);
  EXPECT_NEAR(rho, want_rho, 1e-14);
  EXPECT_NEAR(lambda, want_lambda, 1e-14);
}

TEST(CalibratedBackend, ZeroParametersAreIdentity) {
  const auto scorer = EmbeddingScorer::random(5, 2, 3, 8);
  const EmbeddingBackend base(scorer);
  const CalibratedBackend cal(base, scorer, AffineCalibration(3));
  for (EntityId s = 0; s < 5; ++s) {
    for (EntityId o = 0; o < 5; ++o) {
      EXPECT_EQ(cal.confidence(s, 1, o), base.confidence(s, 1, o));
      EXPECT_EQ(calibrated_confidence(scorer, AffineCalibration(3), s, 1, o),
                base.confidence(s, 1, o));
    }
  }
}

TEST(CalibrationLoss, MatchesReferenceUtilities) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = test::make_calibration_problem(seed);
    const CalibratedBackend calibrated(*p.base, p.scorer, p.cal);
    double want = 0.0;
    std::size_t terms = 0;
    for (const auto& ex : p.examples) {
      const auto u = test::reference_utility(ex.query, calibrated);
      for (const auto& [e, target] : ex.truth) {
        const double diff = u[e] - target;
        want += diff * diff;
        ++terms;
      }
    }
    const auto got = calibration_loss(p.cal, *p.base, p.scorer, p.examples);
    EXPECT_NEAR(got.loss, want, 1e-10 * std::max(1.0, want)) << "seed " << seed;
    EXPECT_EQ(got.terms, terms);
    EXPECT_EQ(got.gradient.size(), p.cal.parameters().size());
  }
}

TEST(CalibrationLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const auto p = test::make_calibration_problem(seed);
    const auto check = test::check_calibration_gradient(p, 1e-6, 1e-4);
    for (const auto& f : check.failures) ADD_FAILURE() << "seed " << seed << " " << f;
  }
}

TEST(CalibrationLoss, RejectsPositiveAlpha) {
  auto p = test::make_calibration_problem(1);
  p.examples[0].query.disjuncts[0].atoms[0].alpha = 0.25;
  EXPECT_THROW(calibration_loss(p.cal, *p.base, p.scorer, p.examples), ValidationError);
}

TEST(CalibrationLoss, BudgetExceeded) {
  const auto p = test::make_calibration_problem(2);
  EXPECT_THROW(calibration_loss(p.cal, *p.base, p.scorer, p.examples, 0), BudgetExceeded);
}

TEST(TrainCalibration, ExactBackendIsAlreadyOptimal) {
  const auto p = test::make_calibration_problem(3);
  const auto zero = calibration_loss(AffineCalibration(p.scorer.dim()), *p.truth, p.scorer,
                                     p.examples);
  EXPECT_EQ(zero.loss, 0.0);
  CalibrationHyper h;
  h.epochs = 5;
  h.batch_size = 2;
  std::vector<double> history;
  const auto cal = train_calibration(*p.truth, p.scorer, p.examples, h, &history);
  EXPECT_EQ(cal, AffineCalibration(p.scorer.dim()));
  ASSERT_EQ(history.size(), 6u);
  for (double l : history) EXPECT_EQ(l, 0.0);
}

TEST(TrainCalibration, OneStepReducesSingleAnswerError) {
  const auto kg = test::make_kg({{"a", "r", "b", 0.75}, {"a", "r", "c", 0.25}, {"c", "r", "b", 0.5}});
  const auto scorer = EmbeddingScorer::random(kg.num_entities(), 1, 3, 6);
  const EmbeddingBackend base(scorer);
  const auto b = kg.entities().at("b");
  SoftQuery q;
  q.disjuncts.push_back({{}, {{Term::constant(kg.entities().at("a")), 0, Term::free(), 0, 1, false}}});
  const std::vector<CalibrationExample> ex{{q, {{b, 0.75}}}};
  const double before = calibration_loss(AffineCalibration(3), base, scorer, ex).loss;
  CalibrationHyper h;
  h.epochs = 1;
  h.batch_size = 1;
  h.learning_rate = 1e-3;
  const auto cal = train_calibration(base, scorer, ex, h);
  const double after = calibration_loss(cal, base, scorer, ex).loss;
  EXPECT_GT(before, 0.0);
  EXPECT_LT(after, before);
}

TEST(TrainCalibration, DeterministicAndValidated) {
  const auto p = test::make_calibration_problem(4);
  CalibrationHyper h;
  h.epochs = 3;
  h.seed = 5;
  h.batch_size = 2;
  EXPECT_EQ(train_calibration(*p.base, p.scorer, p.examples, h),
            train_calibration(*p.base, p.scorer, p.examples, h));
  h.batch_size = 0;
  EXPECT_THROW(train_calibration(*p.base, p.scorer, p.examples, h), ValidationError);
  h.batch_size = 2;
  std::vector<CalibrationExample> empty{{p.examples[0].query, {}}};
  EXPECT_THROW(train_calibration(*p.base, p.scorer, empty, h), ValidationError);
}

TEST(CalibrationCheckpoint, RoundTrip) {
  const auto dir = test::scratch_dir("cal-ckpt");
  AffineCalibration cal(3);
  Rng rng(2);
  for (double& v : cal.parameters()) v = rng.uniform(-1, 1);
  save_calibration(cal, dir / "c.bin", {{"k", 1}});
  EXPECT_EQ(load_calibration(dir / "c.bin"), cal);
  EXPECT_EQ(std::filesystem::file_size(dir / "c.bin"), 12u + 8u * 3u * 8u);
  EXPECT_EQ(test::read_text(dir / "c.bin").substr(0, 4), "SQAC");
  test::write_text(dir / "bad.bin", "SQES");
  EXPECT_THROW(load_calibration(dir / "bad.bin"), FormatError);
}

}  // namespace
}  // namespace softq
