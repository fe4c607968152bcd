#include "softq/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <system_error>

#include "softq/error.hpp"
#include "softq/rng.hpp"

namespace softq {

void to_json(nlohmann::json& j, const ScorerHyper& h) {
  j = {{"dim", h.dim},
       {"epochs", h.epochs},
       {"learning_rate", h.learning_rate},
       {"negatives", h.negatives},
       {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, ScorerHyper& h) {
  h.dim = j.value("dim", h.dim);
  h.epochs = j.value("epochs", h.epochs);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.negatives = j.value("negatives", h.negatives);
  h.seed = j.value("seed", h.seed);
}

EmbeddingScorer::EmbeddingScorer(std::size_t num_entities, std::size_t num_relations,
                                 std::size_t dim)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      dim_(dim),
      entities_(num_entities * dim, 0.0),
      relations_(num_relations * dim, 0.0) {}

EmbeddingScorer EmbeddingScorer::random(std::size_t num_entities, std::size_t num_relations,
                                        std::size_t dim, std::uint64_t seed) {
  EmbeddingScorer s(num_entities, num_relations, dim);
  Rng rng(seed);
  for (double& v : s.entities_) v = rng.uniform(-1.0, 1.0);
  for (double& v : s.relations_) v = rng.uniform(-1.0, 1.0);
  return s;
}

std::span<const double> EmbeddingScorer::entity(EntityId e) const {
  return std::span(entities_).subspan(static_cast<std::size_t>(e) * dim_, dim_);
}
std::span<const double> EmbeddingScorer::relation(RelationId r) const {
  return std::span(relations_).subspan(static_cast<std::size_t>(r) * dim_, dim_);
}
std::span<double> EmbeddingScorer::entity(EntityId e) {
  return std::span(entities_).subspan(static_cast<std::size_t>(e) * dim_, dim_);
}
std::span<double> EmbeddingScorer::relation(RelationId r) {
  return std::span(relations_).subspan(static_cast<std::size_t>(r) * dim_, dim_);
}

double EmbeddingScorer::logit(EntityId s, RelationId r, EntityId o) const {
  if (s >= num_entities_ || o >= num_entities_ || r >= num_relations_) {
    throw ValidationError("triple index out of range");
  }
  const auto es = entity(s), wr = relation(r), eo = entity(o);
  double x = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) x += es[k] * wr[k] * eo[k];
  return x;
}

double EmbeddingScorer::score(EntityId s, RelationId r, EntityId o) const {
  return 1.0 / (1.0 + std::exp(-logit(s, r, o)));
}

double scorer_mse(const EmbeddingScorer& scorer, std::span<const Fact> facts) {
  if (facts.empty()) return 0.0;
  double total = 0.0;
  for (const Fact& f : facts) {
    const double e = scorer.score(f.head, f.relation, f.tail) - f.confidence;
    total += e * e;
  }
  return total / static_cast<double>(facts.size());
}

namespace {

void sgd_step(EmbeddingScorer& m, EntityId s, RelationId r, EntityId o, double target,
              double lr) {
  const double p = m.score(s, r, o);
  const double g = 2.0 * (p - target) * p * (1.0 - p);
  auto es = m.entity(s);
  auto wr = m.relation(r);
  auto eo = m.entity(o);
  for (std::size_t k = 0; k < m.dim(); ++k) {
    const double ds = wr[k] * eo[k], dr = es[k] * eo[k], d_o = es[k] * wr[k];
    es[k] -= lr * g * ds;
    wr[k] -= lr * g * dr;
    eo[k] -= lr * g * d_o;
  }
}

}  // namespace

EmbeddingScorer train_embedding_scorer(const UncertainKG& kg, Split view,
                                       const ScorerHyper& hyper, ScorerTrainingReport* report) {
  if (hyper.dim == 0) throw ValidationError("embedding dimension must be > 0");
  const std::vector<Fact> facts = kg.facts_in(view);
  if (facts.empty()) throw ValidationError("empty training split");

  EmbeddingScorer model = EmbeddingScorer::random(kg.num_entities(), kg.num_relations(),
                                                  hyper.dim, derive_seed(hyper.seed, "init"));
  Rng rng(derive_seed(hyper.seed, "training"));
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), 0);
  if (report) report->mse_per_epoch = {scorer_mse(model, facts)};

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t idx : order) {
      const Fact& f = facts[idx];
      sgd_step(model, f.head, f.relation, f.tail, f.confidence, hyper.learning_rate);
      for (std::size_t k = 0; k < hyper.negatives; ++k) {
        const auto o = static_cast<EntityId>(rng.below(kg.num_entities()));
        if (kg.contains(view, f.head, f.relation, o)) continue;
        sgd_step(model, f.head, f.relation, o, 0.0, hyper.learning_rate);
      }
    }
    if (report) report->mse_per_epoch.push_back(scorer_mse(model, facts));
  }
  return model;
}

double EmbeddingBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  return clamp_confidence(scorer_.score(s, r, o));
}

namespace detail {

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& sidecar) {
  std::ofstream out(path.string() + ".json");
  if (!out) throw Error("cannot write " + path.string() + ".json");
  out << sidecar.dump(2) << '\n';
}

}  // namespace detail

void save_scorer(const EmbeddingScorer& scorer, const std::filesystem::path& path,
                 const nlohmann::json& sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("SQES", 4);
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(scorer.num_entities()));
  detail::write_u32(out, static_cast<std::uint32_t>(scorer.num_relations()));
  detail::write_u32(out, static_cast<std::uint32_t>(scorer.dim()));
  for (double v : scorer.entity_parameters()) detail::write_f64(out, v);
  for (double v : scorer.relation_parameters()) detail::write_f64(out, v);
  detail::write_sidecar(path, sidecar);
}

EmbeddingScorer load_scorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SQES", 4) != 0) {
    throw FormatError("not a scorer checkpoint: " + path.string());
  }
  if (detail::read_u32(in) != 1) throw FormatError("unsupported scorer checkpoint version");
  const auto ne = detail::read_u32(in), nr = detail::read_u32(in), dim = detail::read_u32(in);
  EmbeddingScorer s(ne, nr, dim);
  for (EntityId e = 0; e < ne; ++e) {
    for (double& v : s.entity(e)) v = detail::read_f64(in);
  }
  for (RelationId r = 0; r < nr; ++r) {
    for (double& v : s.relation(r)) v = detail::read_f64(in);
  }
  return s;
}

}  // namespace softq
