#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "softq/confidence.hpp"
#include "softq/query.hpp"
#include "softq/semiring.hpp"
#include "softq/sparse_matrix.hpp"

namespace softq {

struct InferenceConfig {
  std::optional<double> delta1;  // matrix threshold; nullopt disables
  std::optional<double> delta2;  // state-vector pruning before joins; nullopt disables
  std::uint64_t enumeration_budget = 1'000'000;  // cap on |E|^(#enumerated nodes)
  JoinMode join_mode = JoinMode::kAuto;
  // Receives one JSON object per transformation step.
  std::function<void(const nlohmann::json&)> trace;
};

struct InferenceStats {
  std::size_t joins = 0;
  std::size_t pruned_entries = 0;  // finite entries dropped by delta2
  std::size_t enumerated_assignments = 0;
};

// Backend plus per-relation matrix cache (forward and transposed), shared by
// every query answered through it. Thread-safe.
class InferenceContext {
 public:
  InferenceContext(const ConfidenceBackend& backend, InferenceConfig config = {});

  const ConfidenceBackend& backend() const { return *backend_; }
  const InferenceConfig& config() const { return config_; }
  std::size_t num_entities() const { return backend_->num_entities(); }

  // P_r with cells <= delta1 read as 0, or its transpose.
  const DefaultSparseMatrix& relation(RelationId r, bool transposed) const;

  // Per-cell atom values of an edge with rows indexed by `from`; transposed
  // when the edge points the other way.
  DefaultSparseMatrix edge_matrix(const QueryEdge& edge, bool transposed) const;

 private:
  const ConfidenceBackend* backend_;
  InferenceConfig config_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, std::unique_ptr<DefaultSparseMatrix>> cache_;
};

// Query graph with one state vector per variable node and a scalar for
// contributions that no longer touch any variable. Transformations only
// remove nodes and edges.
struct AnnotatedQueryGraph {
  SoftQueryGraph graph;
  std::vector<StateVector> states;  // empty for constant nodes
  std::vector<bool> node_alive;
  std::vector<bool> edge_alive;
  double scalar = semiring::kOne;
  std::size_t enumerated = 0;  // nodes fixed by cycle enumeration so far
  std::size_t root = 0;        // node index of the free variable

  // Distinct live neighbors other than the node itself, ascending.
  std::vector<std::size_t> neighbors(std::size_t node) const;
  std::vector<std::size_t> live_edges() const;
  std::size_t live_edge_count() const;
};

// All-zero state vectors for every variable.
AnnotatedQueryGraph init_annotated_graph(const SoftConjunctiveQuery& conj,
                                         std::size_t num_entities);

// Folds every edge incident to a constant node into the neighbor's state (or
// the scalar when both ends are constants), then deletes constant nodes.
void remove_constant_nodes(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                           InferenceStats* stats = nullptr);

// Folds the matrix diagonal of every self-loop into the node's state.
void remove_self_loops(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                       InferenceStats* stats = nullptr);

// Removes one leaf variable other than its component root (the free
// variable, or the lowest node index of a component without it): the leaf
// with the smallest state support, ties to the lower existential index.
// Returns false when no such leaf exists.
bool remove_leaf_node(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                      InferenceStats* stats = nullptr);

// Folds each isolated non-root node into the scalar as the max of its state.
void fold_isolated_components(AnnotatedQueryGraph& g, InferenceStats* stats = nullptr);

// Picks the lowest-index existential on a shortest cycle, substitutes every
// entity for it and solves the rest; oplus over the results. Throws
// ValidationError("no cycle") on acyclic input and BudgetExceeded when
// |E|^(#enumerated) would pass the budget.
UtilityVector enumerate_cycle(const AnnotatedQueryGraph& g, const InferenceContext& ctx,
                              InferenceStats* stats = nullptr);

// Runs every reduction to completion; C_y (x) scalar.
UtilityVector solve_annotated(AnnotatedQueryGraph g, const InferenceContext& ctx,
                              InferenceStats* stats = nullptr);

UtilityVector answer_conjunctive(const SoftConjunctiveQuery& conj, const InferenceContext& ctx,
                                 InferenceStats* stats = nullptr);
UtilityVector answer_query(const SoftQuery& query, const InferenceContext& ctx,
                           InferenceStats* stats = nullptr);
UtilityVector answer_query(const SoftQuery& query, const ConfidenceBackend& backend,
                           const InferenceConfig& config = {});

// Entities with utility above the semiring zero, by value descending then
// entity index ascending.
std::vector<std::pair<EntityId, double>> rank_answers(const UtilityVector& u);

}  // namespace softq
