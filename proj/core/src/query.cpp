#include "softq/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "softq/error.hpp"

namespace softq {

std::size_t SoftQuery::atom_count() const {
  std::size_t n = 0;
  for (const auto& d : disjuncts) n += d.atoms.size();
  return n;
}

void validate_query(const SoftQuery& query, std::size_t num_entities,
                    std::size_t num_relations) {
  if (query.disjuncts.empty()) throw ValidationError("query has no disjuncts");
  for (const auto& conj : query.disjuncts) {
    if (conj.atoms.empty()) throw ValidationError("conjunct has no atoms");
    std::set<std::uint32_t> declared;
    for (auto x : conj.existentials) {
      if (!declared.insert(x).second) {
        throw ValidationError("existential x" + std::to_string(x) + " declared twice");
      }
    }
    std::set<std::uint32_t> used;
    bool free_seen = false;
    for (const auto& a : conj.atoms) {
      if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw ValidationError("alpha outside [0,1]");
      if (!(a.beta > 0.0) || !std::isfinite(a.beta)) throw ValidationError("beta must be > 0");
      if (num_relations && a.relation >= num_relations) {
        throw ValidationError("relation index out of range");
      }
      for (const Term& t : {a.head, a.tail}) {
        switch (t.kind) {
          case Term::Kind::kFree:
            free_seen = true;
            break;
          case Term::Kind::kExistential:
            if (!declared.contains(t.id)) {
              throw ValidationError("undeclared variable x" + std::to_string(t.id));
            }
            used.insert(t.id);
            break;
          case Term::Kind::kConstant:
            if (num_entities && t.id >= num_entities) {
              throw ValidationError("entity index out of range");
            }
            break;
        }
      }
    }
    if (!free_seen) throw ValidationError("free variable y does not occur in a conjunct");
    if (used.size() != declared.size()) {
      throw ValidationError("existential variable declared but never used");
    }
  }
}

std::optional<std::size_t> SoftQueryGraph::find(const Term& term) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == term) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> SoftQueryGraph::neighbors(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges) {
    if (e.head == node && e.tail != node) out.push_back(e.tail);
    if (e.tail == node && e.head != node) out.push_back(e.head);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SoftQueryGraph build_query_graph(const SoftConjunctiveQuery& conj) {
  SoftQueryGraph g;
  auto node_of = [&](const Term& t) {
    if (auto i = g.find(t)) return *i;
    g.nodes.push_back(t);
    return g.nodes.size() - 1;
  };
  for (std::size_t i = 0; i < conj.atoms.size(); ++i) {
    const auto& a = conj.atoms[i];
    const auto h = node_of(a.head);
    const auto t = node_of(a.tail);
    g.edges.push_back({h, t, a.relation, a.alpha, a.beta, a.negated, i});
  }
  return g;
}

GraphDiagnostics validate(const SoftQueryGraph& graph) {
  GraphDiagnostics d;
  const std::size_t n = graph.nodes.size();
  d.free_present = std::any_of(graph.nodes.begin(), graph.nodes.end(),
                               [](const Term& t) { return t.is_free(); });
  std::set<std::pair<std::size_t, std::size_t>> simple;
  for (const auto& e : graph.edges) {
    if (e.head == e.tail) {
      d.has_self_loop = true;
      continue;
    }
    simple.insert(std::minmax(e.head, e.tail));
  }
  // Union-find: a simple edge joining two already-connected nodes closes a cycle.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (const auto& [a, b] : simple) {
    const auto ra = root(a), rb = root(b);
    if (ra == rb) {
      d.acyclic = false;
    } else {
      parent[ra] = rb;
      --components;
    }
  }
  d.connected = components <= 1;
  return d;
}

}  // namespace softq
