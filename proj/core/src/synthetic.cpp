#include "softq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "softq/error.hpp"

namespace softq {

UncertainKG random_kg(const SyntheticKGConfig& config) {
  if (config.entities == 0 || config.relations == 0) {
    throw ValidationError("synthetic KG needs entities and relations");
  }
  const std::size_t capacity = config.entities * config.entities * config.relations;
  if (config.train_facts + config.valid_facts + config.test_facts > capacity) {
    throw ValidationError("more facts requested than distinct triples");
  }
  if (config.train_facts == 0) throw ValidationError("synthetic KG needs train facts");
  Rng rng(derive_seed(config.seed, "synthetic-kg"));
  UncertainKG::Builder b;
  for (std::size_t e = 0; e < config.entities; ++e) b.add_entity("e" + std::to_string(e));
  for (std::size_t r = 0; r < config.relations; ++r) b.add_relation("r" + std::to_string(r));

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> used;
  auto add = [&](std::size_t count, Split split) {
    for (std::size_t i = 0; i < count;) {
      const auto h = rng.below(config.entities);
      const auto r = rng.below(config.relations);
      const auto t = rng.below(config.entities);
      if (!used.emplace(h, r, t).second) continue;
      const auto k = 1 + rng.below(config.confidence_denominator);
      b.add("e" + std::to_string(h), "r" + std::to_string(r), "e" + std::to_string(t),
            static_cast<double>(k) / config.confidence_denominator, split);
      ++i;
    }
  };
  add(config.train_facts, Split::kTrain);
  add(config.valid_facts, Split::kValid);
  add(config.test_facts, Split::kTest);
  return std::move(b).build();
}

namespace {

struct Builder {
  const SyntheticQueryConfig& cfg;
  std::size_t ne, nr;
  Rng& rng;

  double alpha() {
    if (rng.bernoulli(cfg.zero_alpha_probability)) return 0.0;
    const auto top = static_cast<std::uint64_t>(std::floor(cfg.max_alpha * cfg.alpha_denominator));
    return static_cast<double>(1 + rng.below(std::max<std::uint64_t>(top, 1))) /
           cfg.alpha_denominator;
  }

  double beta() {
    const auto top = static_cast<std::uint64_t>(std::floor(cfg.max_beta * cfg.beta_denominator));
    return static_cast<double>(1 + rng.below(std::max<std::uint64_t>(top, 1))) /
           cfg.beta_denominator;
  }

  SoftAtom atom(Term h, Term t) {
    SoftAtom a;
    a.head = h;
    a.tail = t;
    a.relation = static_cast<RelationId>(rng.below(nr));
    a.alpha = alpha();
    a.beta = beta();
    a.negated = rng.bernoulli(cfg.negation_probability);
    return a;
  }

  SoftAtom oriented(Term u, Term v) { return rng.bernoulli(0.5) ? atom(u, v) : atom(v, u); }

  SoftConjunctiveQuery conjunct() {
    std::size_t k = rng.below(cfg.max_existentials + 1);
    if (cfg.cyclic) {
      if (cfg.max_existentials < 2) throw ValidationError("cyclic queries need 2 existentials");
      k = std::max<std::size_t>(k, 2);
    }
    std::vector<Term> vars{Term::free()};
    SoftConjunctiveQuery q;
    for (std::uint32_t i = 1; i <= k; ++i) {
      q.existentials.push_back(i);
      vars.push_back(Term::existential(i));
    }
    std::set<std::pair<std::size_t, std::size_t>> adjacent;
    for (std::size_t i = 1; i < vars.size(); ++i) {
      const std::size_t parent = rng.below(i);
      q.atoms.push_back(oriented(vars[parent], vars[i]));
      adjacent.emplace(parent, i);
    }
    if (cfg.cyclic) {
      std::vector<std::pair<std::size_t, std::size_t>> open;
      for (std::size_t i = 0; i < vars.size(); ++i) {
        for (std::size_t j = i + 1; j < vars.size(); ++j) {
          if (!adjacent.contains({i, j})) open.emplace_back(i, j);
        }
      }
      const auto [i, j] = open[rng.below(open.size())];
      q.atoms.push_back(oriented(vars[i], vars[j]));
    }
    const std::size_t extra = rng.below(cfg.max_extra_atoms + 1);
    for (std::size_t n = 0; n < extra || q.atoms.empty(); ++n) {
      const auto kind = rng.below(cfg.self_loops ? 3 : 2);
      if (kind == 1 && !q.atoms.empty()) {
        // Parallel edge next to an existing variable-variable atom.
        const SoftAtom& base = q.atoms[rng.below(q.atoms.size())];
        if (base.head.is_variable() && base.tail.is_variable() && base.head != base.tail) {
          q.atoms.push_back(oriented(base.head, base.tail));
          continue;
        }
      }
      const Term v = vars[rng.below(vars.size())];
      if (kind == 2) {
        q.atoms.push_back(atom(v, v));
        continue;
      }
      const Term c = Term::constant(static_cast<EntityId>(rng.below(ne)));
      q.atoms.push_back(oriented(c, v));
    }
    return q;
  }
};

}  // namespace

SoftQuery random_query(std::size_t num_entities, std::size_t num_relations,
                       const SyntheticQueryConfig& config, Rng& rng) {
  if (num_entities == 0 || num_relations == 0) throw ValidationError("empty vocabulary");
  Builder b{config, num_entities, num_relations, rng};
  SoftQuery q;
  const std::size_t n = 1 + rng.below(std::max<std::size_t>(config.max_disjuncts, 1));
  for (std::size_t i = 0; i < n; ++i) q.disjuncts.push_back(b.conjunct());
  return q;
}

SoftQuery random_template_query(const UncertainKG& kg, QueryType type,
                                const SyntheticQueryConfig& config, Rng& rng) {
  SoftQuery q = sample_query_skeleton(kg, type, rng.next());
  RequirementStrategy strategy;
  strategy.alpha_mode = AlphaMode::kHybrid;
  q = assign_requirements(q, strategy, kg, rng.next());
  Builder b{config, kg.num_entities(), kg.num_relations(), rng};
  for (auto& conj : q.disjuncts) {
    for (auto& a : conj.atoms) a.beta = b.beta();
  }
  return q;
}

}  // namespace softq
