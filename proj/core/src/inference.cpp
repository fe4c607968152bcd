#include "softq/inference.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "softq/error.hpp"

namespace softq {

InferenceContext::InferenceContext(const ConfidenceBackend& backend, InferenceConfig config)
    : backend_(&backend), config_(std::move(config)) {
  if (config_.delta1 && !(*config_.delta1 >= 0.0 && *config_.delta1 <= 1.0)) {
    throw ValidationError("delta1 must lie in [0,1]");
  }
  if (config_.delta2 && !(*config_.delta2 >= 0.0)) {
    throw ValidationError("delta2 must be >= 0");
  }
}

const DefaultSparseMatrix& InferenceContext::relation(RelationId r, bool transposed) const {
  if (r >= backend_->num_relations()) throw ValidationError("relation index out of range");
  const std::uint64_t key = (static_cast<std::uint64_t>(r) << 1) | (transposed ? 1 : 0);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
  }
  // Built outside the lock; a concurrent duplicate build is harmless.
  std::unique_ptr<DefaultSparseMatrix> m;
  if (transposed) {
    m = std::make_unique<DefaultSparseMatrix>(relation(r, false).transposed());
  } else {
    m = std::make_unique<DefaultSparseMatrix>(backend_->relation_matrix(r, config_.delta1));
  }
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(key, std::move(m));
  return *it->second;
}

DefaultSparseMatrix InferenceContext::edge_matrix(const QueryEdge& edge, bool transposed) const {
  return relation(edge.relation, transposed).map([&](double p) {
    return atom_value(p, edge.alpha, edge.beta, edge.negated);
  });
}

std::vector<std::size_t> AnnotatedQueryGraph::neighbors(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (!edge_alive[i]) continue;
    const auto& e = graph.edges[i];
    if (e.head == node && e.tail != node) out.push_back(e.tail);
    if (e.tail == node && e.head != node) out.push_back(e.head);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> AnnotatedQueryGraph::live_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edge_alive.size(); ++i) {
    if (edge_alive[i]) out.push_back(i);
  }
  return out;
}

std::size_t AnnotatedQueryGraph::live_edge_count() const {
  return static_cast<std::size_t>(std::count(edge_alive.begin(), edge_alive.end(), true));
}

AnnotatedQueryGraph init_annotated_graph(const SoftConjunctiveQuery& conj,
                                         std::size_t num_entities) {
  AnnotatedQueryGraph g;
  g.graph = build_query_graph(conj);
  const auto root = g.graph.find(Term::free());
  if (!root) throw ValidationError("free variable y does not occur in a conjunct");
  g.root = *root;
  g.states.resize(g.graph.nodes.size());
  for (std::size_t i = 0; i < g.graph.nodes.size(); ++i) {
    if (g.graph.nodes[i].is_variable()) g.states[i] = StateVector(num_entities);
  }
  g.node_alive.assign(g.graph.nodes.size(), true);
  g.edge_alive.assign(g.graph.edges.size(), true);
  return g;
}

namespace {

std::string node_name(const Term& t) {
  switch (t.kind) {
    case Term::Kind::kConstant:
      return "e" + std::to_string(t.id);
    case Term::Kind::kFree:
      return "y";
    case Term::Kind::kExistential:
      return "x" + std::to_string(t.id);
  }
  return "?";
}

void trace(const InferenceContext& ctx, nlohmann::json event) {
  if (ctx.config().trace) ctx.config().trace(event);
}

std::vector<double> map_atom(std::vector<double> ps, const QueryEdge& e) {
  for (double& p : ps) p = atom_value(p, e.alpha, e.beta, e.negated);
  return ps;
}

void fold_into(StateVector& state, const std::vector<double>& values) {
  state.otimes_assign(SemiringVector(values));
}

// Component label per live node; -1 for dead nodes.
std::vector<long> components(const AnnotatedQueryGraph& g) {
  const std::size_t n = g.graph.nodes.size();
  std::vector<long> label(n, -1);
  long next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (!g.node_alive[start] || label[start] >= 0) continue;
    std::deque<std::size_t> queue{start};
    label[start] = next;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : g.neighbors(u)) {
        if (label[v] < 0) {
          label[v] = next;
          queue.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

// Root per live node: the free variable for its own component, else the
// lowest node index of the component.
std::vector<bool> root_flags(const AnnotatedQueryGraph& g) {
  const auto label = components(g);
  std::vector<bool> is_root(label.size(), false);
  std::vector<bool> labelled(label.size(), false);
  if (g.node_alive[g.root]) {
    is_root[g.root] = true;
    labelled[static_cast<std::size_t>(label[g.root])] = true;
  }
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] < 0) continue;
    const auto l = static_cast<std::size_t>(label[i]);
    if (!labelled[l]) {
      labelled[l] = true;
      is_root[i] = true;
    }
  }
  return is_root;
}

double power_of(std::size_t base, std::size_t exp) {
  double n = 1.0;
  for (std::size_t i = 0; i < exp; ++i) n *= static_cast<double>(base);
  return n;
}

}  // namespace

void remove_constant_nodes(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                           InferenceStats* stats) {
  (void)stats;
  const auto& nodes = g.graph.nodes;
  for (std::size_t i = 0; i < g.graph.edges.size(); ++i) {
    if (!g.edge_alive[i]) continue;
    const QueryEdge& e = g.graph.edges[i];
    const Term& h = nodes[e.head];
    const Term& t = nodes[e.tail];
    if (!h.is_constant() && !t.is_constant()) continue;
    const auto& p = ctx.relation(e.relation, false);
    std::size_t target = 0;
    if (h.is_constant() && t.is_constant()) {
      g.scalar = semiring::otimes(
          g.scalar, atom_value(p.at(h.id, t.id), e.alpha, e.beta, e.negated));
      g.edge_alive[i] = false;
      trace(ctx, {{"step", "constant"}, {"atom", e.atom}, {"node", "scalar"},
                  {"value", g.scalar}});
      continue;
    }
    if (h.is_constant()) {
      target = e.tail;
      fold_into(g.states[target], map_atom(p.row(h.id), e));
    } else {
      target = e.head;
      fold_into(g.states[target], map_atom(p.column(t.id), e));
    }
    g.edge_alive[i] = false;
    trace(ctx, {{"step", "constant"},
                {"atom", e.atom},
                {"node", node_name(nodes[target])},
                {"nnz", g.states[target].support()}});
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (nodes[n].is_constant()) g.node_alive[n] = false;
  }
}

void remove_self_loops(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                       InferenceStats* stats) {
  (void)stats;
  for (std::size_t i = 0; i < g.graph.edges.size(); ++i) {
    if (!g.edge_alive[i]) continue;
    const QueryEdge& e = g.graph.edges[i];
    if (e.head != e.tail || g.graph.nodes[e.head].is_constant()) continue;
    fold_into(g.states[e.head], map_atom(ctx.relation(e.relation, false).diagonal(), e));
    g.edge_alive[i] = false;
    trace(ctx, {{"step", "self_loop"},
                {"atom", e.atom},
                {"node", node_name(g.graph.nodes[e.head])},
                {"nnz", g.states[e.head].support()}});
  }
}

bool remove_leaf_node(AnnotatedQueryGraph& g, const InferenceContext& ctx,
                      InferenceStats* stats) {
  const auto is_root = root_flags(g);
  std::optional<std::size_t> leaf;
  std::size_t neighbor = 0;
  for (std::size_t u = 0; u < g.graph.nodes.size(); ++u) {
    if (!g.node_alive[u] || is_root[u] || g.graph.nodes[u].is_constant()) continue;
    const auto nb = g.neighbors(u);
    if (nb.size() != 1) continue;
    if (!leaf) {
      leaf = u;
      neighbor = nb[0];
      continue;
    }
    const auto su = g.states[u].support(), sl = g.states[*leaf].support();
    if (su < sl || (su == sl && g.graph.nodes[u] < g.graph.nodes[*leaf])) {
      leaf = u;
      neighbor = nb[0];
    }
  }
  if (!leaf) return false;
  const std::size_t u = *leaf, v = neighbor;

  std::optional<DefaultSparseMatrix> m;
  std::vector<std::size_t> atoms;
  for (std::size_t i = 0; i < g.graph.edges.size(); ++i) {
    if (!g.edge_alive[i]) continue;
    const QueryEdge& e = g.graph.edges[i];
    const bool forward = e.head == u && e.tail == v;
    const bool backward = e.head == v && e.tail == u;
    if (!forward && !backward) continue;
    auto em = ctx.edge_matrix(e, backward);
    m = m ? m->otimes(em) : std::move(em);
    g.edge_alive[i] = false;
    atoms.push_back(e.atom);
  }

  const StateVector pruned = prune_state(g.states[u], ctx.config().delta2);
  if (stats) {
    stats->pruned_entries += g.states[u].support() - pruned.support();
    ++stats->joins;
  }
  g.states[v] = max_plus_join(pruned, *m, g.states[v], ctx.config().join_mode);
  g.node_alive[u] = false;
  g.states[u] = StateVector();
  trace(ctx, {{"step", "leaf"},
              {"atoms", atoms},
              {"removed", node_name(g.graph.nodes[u])},
              {"node", node_name(g.graph.nodes[v])},
              {"matrix_nnz", m->stored_count()},
              {"nnz", g.states[v].support()}});
  return true;
}

void fold_isolated_components(AnnotatedQueryGraph& g, InferenceStats* stats) {
  (void)stats;
  for (std::size_t n = 0; n < g.graph.nodes.size(); ++n) {
    if (!g.node_alive[n] || n == g.root || g.graph.nodes[n].is_constant()) continue;
    if (!g.neighbors(n).empty()) continue;
    g.scalar = semiring::otimes(g.scalar, g.states[n].max());
    g.node_alive[n] = false;
    g.states[n] = StateVector();
  }
}

namespace {

// Node to enumerate: lowest existential index among the nodes lying on some
// shortest cycle of the live simple graph.
std::optional<std::size_t> cycle_node(const AnnotatedQueryGraph& g) {
  const std::size_t n = g.graph.nodes.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i : g.live_edges()) {
    const auto& e = g.graph.edges[i];
    if (e.head == e.tail) continue;
    pairs.emplace_back(std::min(e.head, e.tail), std::max(e.head, e.tail));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  auto bfs = [&](std::size_t src, std::pair<std::size_t, std::size_t> skip) {
    std::vector<std::size_t> dist(n, kInf);
    std::deque<std::size_t> queue{src};
    dist[src] = 0;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (const auto& [a, b] : pairs) {
        if (std::pair(a, b) == skip) continue;
        std::size_t w;
        if (a == u) {
          w = b;
        } else if (b == u) {
          w = a;
        } else {
          continue;
        }
        if (dist[w] == kInf) {
          dist[w] = dist[u] + 1;
          queue.push_back(w);
        }
      }
    }
    return dist;
  };

  std::size_t girth = kInf;
  std::vector<std::vector<std::size_t>> from_a(pairs.size()), from_b(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    from_a[k] = bfs(pairs[k].first, pairs[k]);
    from_b[k] = bfs(pairs[k].second, pairs[k]);
    if (from_a[k][pairs[k].second] != kInf) {
      girth = std::min(girth, from_a[k][pairs[k].second] + 1);
    }
  }
  if (girth == kInf) return std::nullopt;

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t w = 0; w < n; ++w) {
      if (from_a[k][w] == kInf || from_b[k][w] == kInf) continue;
      if (from_a[k][w] + from_b[k][w] + 1 != girth) continue;
      const Term& t = g.graph.nodes[w];
      if (t.kind != Term::Kind::kExistential) continue;
      if (!best || t.id < g.graph.nodes[*best].id) best = w;
    }
  }
  return best;
}

}  // namespace

UtilityVector enumerate_cycle(const AnnotatedQueryGraph& g, const InferenceContext& ctx,
                              InferenceStats* stats) {
  const auto x = cycle_node(g);
  if (!x) throw ValidationError("no cycle");
  const std::size_t ne = ctx.num_entities();
  if (power_of(ne, g.enumerated + 1) > static_cast<double>(ctx.config().enumeration_budget)) {
    throw BudgetExceeded("cycle enumeration exceeds the budget");
  }
  trace(ctx, {{"step", "enumerate"}, {"node", node_name(g.graph.nodes[*x])}});
  UtilityVector out(ne, semiring::kZero);
  for (EntityId s = 0; s < ne; ++s) {
    const double offset = g.states[*x][s];
    if (stats) ++stats->enumerated_assignments;
    if (semiring::is_zero(offset)) continue;
    AnnotatedQueryGraph sub = g;
    sub.graph.nodes[*x] = Term::constant(s);
    sub.states[*x] = StateVector();
    sub.scalar = semiring::otimes(sub.scalar, offset);
    sub.enumerated = g.enumerated + 1;
    out.oplus_assign(solve_annotated(std::move(sub), ctx, stats));
  }
  return out;
}

UtilityVector solve_annotated(AnnotatedQueryGraph g, const InferenceContext& ctx,
                              InferenceStats* stats) {
  remove_constant_nodes(g, ctx, stats);
  remove_self_loops(g, ctx, stats);
  while (remove_leaf_node(g, ctx, stats)) {
  }
  fold_isolated_components(g, stats);
  if (g.live_edge_count() > 0) return enumerate_cycle(g, ctx, stats);
  UtilityVector out = g.states[g.root];
  out.otimes_assign(g.scalar);
  return out;
}

UtilityVector answer_conjunctive(const SoftConjunctiveQuery& conj, const InferenceContext& ctx,
                                 InferenceStats* stats) {
  return solve_annotated(init_annotated_graph(conj, ctx.num_entities()), ctx, stats);
}

UtilityVector answer_query(const SoftQuery& query, const InferenceContext& ctx,
                           InferenceStats* stats) {
  validate_query(query, ctx.num_entities(), ctx.backend().num_relations());
  UtilityVector out(ctx.num_entities(), semiring::kZero);
  for (const auto& conj : query.disjuncts) {
    out.oplus_assign(answer_conjunctive(conj, ctx, stats));
  }
  return out;
}

UtilityVector answer_query(const SoftQuery& query, const ConfidenceBackend& backend,
                           const InferenceConfig& config) {
  return answer_query(query, InferenceContext(backend, config));
}

std::vector<std::pair<EntityId, double>> rank_answers(const UtilityVector& u) {
  std::vector<std::pair<EntityId, double>> out;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!semiring::is_zero(u[i])) out.emplace_back(static_cast<EntityId>(i), u[i]);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace softq
