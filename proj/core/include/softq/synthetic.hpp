#pragma once

#include <cstdint>

#include "softq/dataset.hpp"
#include "softq/kg.hpp"
#include "softq/query.hpp"
#include "softq/rng.hpp"

namespace softq {

// Random uncertain KGs for tests and benchmarks. Entities are named e0.., relations
// r0..; confidences are k / confidence_denominator with k >= 1, so a power-of-two
// denominator keeps every sum of a few confidences exact in double arithmetic.
struct SyntheticKGConfig {
  std::size_t entities = 20;
  std::size_t relations = 3;
  std::size_t train_facts = 40;
  std::size_t valid_facts = 5;  // new triples, on top of train
  std::size_t test_facts = 5;   // new triples, on top of valid
  std::uint32_t confidence_denominator = 256;
  std::uint64_t seed = 0;
};

UncertainKG random_kg(const SyntheticKGConfig& config);

// Random soft queries. Each conjunct is a random tree over y and its
// existentials, plus constant anchors, parallel edges and (optionally) one
// cycle-closing edge or self-loops. alpha is 0 or a multiple of
// 1 / alpha_denominator; beta a positive multiple of 1 / beta_denominator.
struct SyntheticQueryConfig {
  std::size_t max_existentials = 3;
  std::size_t max_extra_atoms = 2;
  std::size_t max_disjuncts = 1;
  double negation_probability = 0.2;
  double zero_alpha_probability = 0.5;
  double max_alpha = 0.75;
  std::uint32_t alpha_denominator = 256;
  std::uint32_t beta_denominator = 16;
  double max_beta = 4.0;
  bool cyclic = false;      // force a cycle (needs >= 2 existentials)
  bool self_loops = false;  // allow self-loop extra atoms
};

SoftQuery random_query(std::size_t num_entities, std::size_t num_relations,
                       const SyntheticQueryConfig& config, Rng& rng);

// A dataset template grounded on `kg` (train view), with per-atom alpha drawn
// like the hybrid strategy (0 or a train percentile) and beta from the same
// grid as random_query. Throws Error when the template cannot be grounded.
SoftQuery random_template_query(const UncertainKG& kg, QueryType type,
                                const SyntheticQueryConfig& config, Rng& rng);

}  // namespace softq
