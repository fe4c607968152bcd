#include "softq/oracle.hpp"

#include "softq/error.hpp"

namespace softq {

EntityId Assignment::resolve(const Term& term) const {
  switch (term.kind) {
    case Term::Kind::kConstant:
      return term.id;
    case Term::Kind::kFree:
      if (!free) throw ValidationError("unassigned variable y");
      return *free;
    case Term::Kind::kExistential:
      if (auto it = existentials.find(term.id); it != existentials.end()) return it->second;
      throw ValidationError("unassigned variable x" + std::to_string(term.id));
  }
  return 0;
}

double eval_sentence(const SoftConjunctiveQuery& conj, const Assignment& asg,
                     const ConfidenceBackend& backend) {
  double value = semiring::kOne;
  for (const SoftAtom& a : conj.atoms) {
    const double p = backend.confidence(asg.resolve(a.head), a.relation, asg.resolve(a.tail));
    value = semiring::otimes(value, atom_value(p, a.alpha, a.beta, a.negated));
  }
  return value;
}

namespace {

double power_of(std::size_t base, std::size_t exp) {
  double n = 1.0;
  for (std::size_t i = 0; i < exp; ++i) n *= static_cast<double>(base);
  return n;
}

// Odometer over k digits in [0, n); returns false after the last one.
bool advance(std::vector<EntityId>& digits, std::size_t n) {
  std::size_t pos = 0;
  while (pos < digits.size() && ++digits[pos] == n) digits[pos++] = 0;
  return pos < digits.size();
}

}  // namespace

UtilityVector brute_force_utility(const SoftQuery& query, const ConfidenceBackend& backend,
                                  std::uint64_t budget) {
  validate_query(query, backend.num_entities(), backend.num_relations());
  const std::size_t ne = backend.num_entities();
  double total = 0.0;
  for (const auto& conj : query.disjuncts) total += power_of(ne, conj.existentials.size() + 1);
  if (total > static_cast<double>(budget)) {
    throw BudgetExceeded("oracle enumeration exceeds the budget");
  }

  UtilityVector out(ne, semiring::kZero);
  for (const auto& conj : query.disjuncts) {
    const std::size_t k = conj.existentials.size();
    for (EntityId y = 0; y < ne; ++y) {
      Assignment asg;
      asg.free = y;
      std::vector<EntityId> digits(k, 0);
      double best = semiring::kZero;
      do {
        for (std::size_t i = 0; i < k; ++i) asg.existentials[conj.existentials[i]] = digits[i];
        best = semiring::oplus(best, eval_sentence(conj, asg, backend));
      } while (advance(digits, ne));
      out[y] = semiring::oplus(out[y], best);
    }
  }
  return out;
}

UtilityVector brute_force_annotated(const AnnotatedQueryGraph& g,
                                    const ConfidenceBackend& backend, std::uint64_t budget) {
  const std::size_t ne = backend.num_entities();
  std::vector<std::size_t> vars;
  for (std::size_t n = 0; n < g.graph.nodes.size(); ++n) {
    if (g.node_alive[n] && g.graph.nodes[n].is_variable() && n != g.root) vars.push_back(n);
  }
  if (power_of(ne, vars.size() + 1) > static_cast<double>(budget)) {
    throw BudgetExceeded("oracle enumeration exceeds the budget");
  }
  const auto live = g.live_edges();

  std::vector<EntityId> value_of(g.graph.nodes.size(), 0);
  auto entity_at = [&](std::size_t node) {
    const Term& t = g.graph.nodes[node];
    return t.is_constant() ? static_cast<EntityId>(t.id) : value_of[node];
  };

  UtilityVector out(ne, semiring::kZero);
  for (EntityId y = 0; y < ne; ++y) {
    value_of[g.root] = y;
    std::vector<EntityId> digits(vars.size(), 0);
    double best = semiring::kZero;
    do {
      for (std::size_t i = 0; i < vars.size(); ++i) value_of[vars[i]] = digits[i];
      double v = semiring::otimes(g.scalar, g.states[g.root][y]);
      for (std::size_t n : vars) v = semiring::otimes(v, g.states[n][value_of[n]]);
      for (std::size_t i : live) {
        const QueryEdge& e = g.graph.edges[i];
        const double p = backend.confidence(entity_at(e.head), e.relation, entity_at(e.tail));
        v = semiring::otimes(v, atom_value(p, e.alpha, e.beta, e.negated));
      }
      best = semiring::oplus(best, v);
    } while (advance(digits, ne));
    out[y] = best;
  }
  return out;
}

}  // namespace softq
