#include <gtest/gtest.h>

#include <algorithm>

#include "reference.hpp"
#include "softq/error.hpp"
#include "softq/oracle.hpp"
#include "softq/synthetic.hpp"

namespace softq {
namespace {

using test::kNegInf;

TEST(EvalSentence, Cases) {
  const auto kg = test::make_kg({{"a", "r", "b", 0.9}});
  const auto backend = lookup_backend(kg, Split::kTrain);
  const auto a = kg.entities().at("a"), b = kg.entities().at("b");
  SoftConjunctiveQuery grounded{{}, {{Term::constant(a), 0, Term::constant(b), 0, 1, false}}};
  EXPECT_EQ(eval_sentence(grounded, {}, backend), 0.9);

  SoftConjunctiveQuery killed = grounded;
  killed.atoms.push_back({Term::constant(b), 0, Term::constant(a), 0.5, 1, false});
  EXPECT_EQ(eval_sentence(killed, {}, backend), kNegInf);

  SoftConjunctiveQuery negated{{}, {{Term::constant(b), 0, Term::constant(a), 0, 2, true}}};
  EXPECT_EQ(eval_sentence(negated, {}, backend), 2.0);

  SoftConjunctiveQuery open{{1}, {{Term::existential(1), 0, Term::free(), 0, 1, false}}};
  Assignment partial;
  partial.free = b;
  EXPECT_THROW(eval_sentence(open, partial, backend), ValidationError);
  partial.existentials[1] = a;
  EXPECT_EQ(eval_sentence(open, partial, backend), 0.9);
}

TEST(BruteForce, NoExistentials) {
  const auto kg = test::make_kg({{"a", "r", "b", 0.5}, {"a", "r", "c", 0.25}});
  const auto backend = lookup_backend(kg, Split::kTrain);
  SoftQuery q{{{{}, {{Term::constant(0), 0, Term::free(), 0.3, 1, false}}}}};
  const auto u = brute_force_utility(q, backend);
  EXPECT_EQ(u[kg.entities().at("a")], kNegInf);
  EXPECT_EQ(u[kg.entities().at("b")], 0.5);
  EXPECT_EQ(u[kg.entities().at("c")], kNegInf);
}

TEST(BruteForce, ChainExample) {
  const auto kg = test::make_kg({{"a", "r1", "b", 0.9}, {"b", "r2", "c", 0.6}});
  const auto backend = lookup_backend(kg, Split::kTrain);
  const auto q = parse_query("EXISTS x1 . (a, r1, x1, 0, 1) & (x1, r2, y, 0, 1)", kg.entities(),
                             kg.relations());
  const auto u = brute_force_utility(q, backend);
  EXPECT_EQ(u[kg.entities().at("c")], 0.9 + 0.6);
  EXPECT_EQ(u[kg.entities().at("a")], 0.9);
  EXPECT_EQ(u[kg.entities().at("b")], 0.9);
}

TEST(BruteForce, DisjunctIdempotence) {
  Rng rng(2);
  SyntheticKGConfig kc;
  kc.entities = 8;
  const auto kg = random_kg(kc);
  const auto backend = lookup_backend(kg, Split::kTrain);
  SyntheticQueryConfig qc;
  for (int i = 0; i < 30; ++i) {
    auto q = random_query(8, kg.num_relations(), qc, rng);
    const auto once = brute_force_utility(q, backend);
    q.disjuncts.push_back(q.disjuncts[0]);
    EXPECT_EQ(brute_force_utility(q, backend), once);
  }
}

TEST(BruteForce, PermutationInvariance) {
  Rng rng(4);
  SyntheticKGConfig kc;
  kc.entities = 7;
  const auto kg = random_kg(kc);
  const auto backend = lookup_backend(kg, Split::kTrain);
  SyntheticQueryConfig qc;
  qc.max_disjuncts = 3;
  qc.max_extra_atoms = 3;
  for (int i = 0; i < 40; ++i) {
    const auto q = random_query(7, kg.num_relations(), qc, rng);
    auto p = q;
    std::reverse(p.disjuncts.begin(), p.disjuncts.end());
    for (auto& conj : p.disjuncts) std::reverse(conj.atoms.begin(), conj.atoms.end());
    // Dyadic confidences and betas keep every sum exact, so order cannot matter.
    EXPECT_EQ(brute_force_utility(p, backend), brute_force_utility(q, backend));
  }
}

TEST(BruteForce, MatchesReferenceEvaluator) {
  Rng rng(6);
  for (int round = 0; round < 20; ++round) {
    SyntheticKGConfig kc;
    kc.entities = 3 + rng.below(6);
    kc.relations = 1 + rng.below(3);
    kc.train_facts = 2 * kc.entities;
    kc.valid_facts = kc.test_facts = 0;
    kc.seed = rng.next();
    const auto kg = random_kg(kc);
    const auto backend = lookup_backend(kg, Split::kTrain);
    SyntheticQueryConfig qc;
    qc.max_disjuncts = 2;
    qc.self_loops = true;
    qc.cyclic = round % 3 == 0;
    for (int i = 0; i < 10; ++i) {
      const auto q = random_query(kg.num_entities(), kg.num_relations(), qc, rng);
      const auto u = brute_force_utility(q, backend);
      EXPECT_EQ(std::vector<double>(u.values().begin(), u.values().end()),
                test::reference_utility(q, backend));
    }
  }
}

TEST(BruteForce, Budget) {
  SyntheticKGConfig kc;
  kc.entities = 10;
  const auto kg = random_kg(kc);
  const auto backend = lookup_backend(kg, Split::kTrain);
  SoftQuery q{{{{1, 2}, {{Term::existential(1), 0, Term::existential(2), 0, 1, false},
                         {Term::existential(2), 0, Term::free(), 0, 1, false}}}}};
  EXPECT_NO_THROW(brute_force_utility(q, backend, 1000));
  EXPECT_THROW(brute_force_utility(q, backend, 999), BudgetExceeded);
}

}  // namespace
}  // namespace softq
