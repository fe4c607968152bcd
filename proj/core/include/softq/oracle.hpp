#pragma once

#include <cstdint>
#include <map>

#include "softq/confidence.hpp"
#include "softq/inference.hpp"
#include "softq/query.hpp"
#include "softq/semiring.hpp"

namespace softq {

// Entity per variable: the free variable and every existential.
struct Assignment {
  std::optional<EntityId> free;
  std::map<std::uint32_t, EntityId> existentials;

  // Throws ValidationError for an unassigned variable.
  EntityId resolve(const Term& term) const;
};

inline constexpr std::uint64_t kDefaultOracleBudget = 1'000'000;

// otimes over the atoms, in atom order, of atom_value under the assignment.
double eval_sentence(const SoftConjunctiveQuery& conj, const Assignment& asg,
                     const ConfidenceBackend& backend);

// Literal enumeration of every existential assignment for every candidate
// answer. Throws BudgetExceeded when the number of evaluated assignments,
// sum over disjuncts of |E|^(#existentials + 1), passes `budget`.
UtilityVector brute_force_utility(const SoftQuery& query, const ConfidenceBackend& backend,
                                  std::uint64_t budget = kDefaultOracleBudget);

// Enumeration over a partially reduced graph: live variables are enumerated,
// states act as unary factors, live edges as atoms, plus the scalar.
UtilityVector brute_force_annotated(const AnnotatedQueryGraph& g,
                                    const ConfidenceBackend& backend,
                                    std::uint64_t budget = kDefaultOracleBudget);

}  // namespace softq
