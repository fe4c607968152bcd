#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "softq/kg.hpp"

namespace softq {

// A node of a soft query: an entity constant, the free variable `y`, or an
// existential variable `x<id>`.
struct Term {
  enum class Kind : std::uint8_t { kConstant, kFree, kExistential };

  Kind kind = Kind::kFree;
  std::uint32_t id = 0;  // entity id for constants, N for x<N>, 0 for y

  static Term constant(EntityId e) { return {Kind::kConstant, e}; }
  static Term free() { return {Kind::kFree, 0}; }
  static Term existential(std::uint32_t n) { return {Kind::kExistential, n}; }

  bool is_constant() const { return kind == Kind::kConstant; }
  bool is_variable() const { return kind != Kind::kConstant; }
  bool is_free() const { return kind == Kind::kFree; }

  friend auto operator<=>(const Term&, const Term&) = default;
};

// (head, relation, tail, alpha, beta), possibly negated. alpha is the
// necessity threshold in [0,1]; beta > 0 is the importance weight.
struct SoftAtom {
  Term head;
  RelationId relation = 0;
  Term tail;
  double alpha = 0.0;
  double beta = 1.0;
  bool negated = false;

  friend bool operator==(const SoftAtom&, const SoftAtom&) = default;
};

// EXISTS x... . a_1 & ... & a_m with the single free variable y.
struct SoftConjunctiveQuery {
  std::vector<std::uint32_t> existentials;
  std::vector<SoftAtom> atoms;

  friend bool operator==(const SoftConjunctiveQuery&, const SoftConjunctiveQuery&) = default;
};

// Disjunction of conjunctive queries sharing the free variable.
struct SoftQuery {
  std::vector<SoftConjunctiveQuery> disjuncts;

  std::size_t atom_count() const;
  friend bool operator==(const SoftQuery&, const SoftQuery&) = default;
};

// Checks every structural invariant; throws ValidationError. When the
// vocabulary sizes are non-zero, ids are range-checked as well.
void validate_query(const SoftQuery& query, std::size_t num_entities = 0,
                    std::size_t num_relations = 0);

struct QueryEdge {
  std::size_t head;  // node indices
  std::size_t tail;
  RelationId relation;
  double alpha;
  double beta;
  bool negated;
  std::size_t atom;  // index of the inducing atom
};

// One node per distinct term and one edge per atom; parallel edges and
// self-loops are kept as-is.
struct SoftQueryGraph {
  std::vector<Term> nodes;
  std::vector<QueryEdge> edges;

  std::optional<std::size_t> find(const Term& term) const;
  // Distinct neighbors other than the node itself, ascending.
  std::vector<std::size_t> neighbors(std::size_t node) const;
  bool is_leaf(std::size_t node) const { return neighbors(node).size() == 1; }
};

SoftQueryGraph build_query_graph(const SoftConjunctiveQuery& conj);

struct GraphDiagnostics {
  bool acyclic = true;  // on the simple graph: parallel edges collapsed, loops ignored
  bool connected = true;
  bool has_self_loop = false;
  bool free_present = false;
};

GraphDiagnostics validate(const SoftQueryGraph& graph);

// Text forms. Parsing auto-detects JSON (leading '{') versus the DSL:
//
//   query    := disjunct ( "|" disjunct )* ;
//   disjunct := [ "EXISTS" var ("," var)* "." ] atom ( "&" atom )* ;
//   atom     := [ "!" ] "(" term "," ident "," term "," number "," number ")" ;
//   term     := ident | "y" | "x" digits ;
//
// Identifiers are bare runs of characters other than whitespace and
// `,()&|!"`, or double-quoted strings with backslash escapes.
SoftQuery parse_query(std::string_view text, const Vocabulary& entities,
                      const Vocabulary& relations);
SoftQuery parse_query_dsl(std::string_view text, const Vocabulary& entities,
                          const Vocabulary& relations);
// {"disjuncts": [{"existentials": ["x1"], "atoms": [{"h", "r", "t", "alpha",
// "beta", "neg"}]}]}. A constant whose name reads as a variable is written
// {"entity": name}.
SoftQuery query_from_json(const nlohmann::json& json, const Vocabulary& entities,
                          const Vocabulary& relations);

std::string to_dsl(const SoftQuery& query, const Vocabulary& entities,
                   const Vocabulary& relations);
nlohmann::json to_json(const SoftQuery& query, const Vocabulary& entities,
                       const Vocabulary& relations);

std::string term_name(const Term& term, const Vocabulary& entities);

}  // namespace softq
