#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "softq/confidence.hpp"
#include "softq/kg.hpp"

namespace softq {

struct ScorerHyper {
  std::size_t dim = 16;
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  std::size_t negatives = 2;  // per positive
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const ScorerHyper& h);
void from_json(const nlohmann::json& j, ScorerHyper& h);

// Minimal trilinear scorer: sigmoid(sum_k e_s[k] * w_r[k] * e_o[k]).
// A desk-scale stand-in for a pre-trained uncertain KG embedding.
class EmbeddingScorer {
 public:
  EmbeddingScorer() = default;
  EmbeddingScorer(std::size_t num_entities, std::size_t num_relations, std::size_t dim);

  // Parameters drawn uniformly from [-1, 1].
  static EmbeddingScorer random(std::size_t num_entities, std::size_t num_relations,
                                std::size_t dim, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }

  std::span<const double> entity(EntityId e) const;
  std::span<const double> relation(RelationId r) const;
  std::span<double> entity(EntityId e);
  std::span<double> relation(RelationId r);

  double logit(EntityId s, RelationId r, EntityId o) const;
  double score(EntityId s, RelationId r, EntityId o) const;

  std::span<const double> entity_parameters() const { return entities_; }
  std::span<const double> relation_parameters() const { return relations_; }

  friend bool operator==(const EmbeddingScorer&, const EmbeddingScorer&) = default;

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> entities_;
  std::vector<double> relations_;
};

struct ScorerTrainingReport {
  // Mean squared error on the observed facts; entry 0 is before any update.
  std::vector<double> mse_per_epoch;
};

// SGD on squared error: observed facts toward their confidence, uniformly
// corrupted tails toward 0. Deterministic given hyper.seed.
EmbeddingScorer train_embedding_scorer(const UncertainKG& kg, Split view,
                                       const ScorerHyper& hyper,
                                       ScorerTrainingReport* report = nullptr);

double scorer_mse(const EmbeddingScorer& scorer, std::span<const Fact> facts);

class EmbeddingBackend final : public ConfidenceBackend {
 public:
  explicit EmbeddingBackend(EmbeddingScorer scorer) : scorer_(std::move(scorer)) {}

  std::size_t num_entities() const override { return scorer_.num_entities(); }
  std::size_t num_relations() const override { return scorer_.num_relations(); }
  double confidence(EntityId s, RelationId r, EntityId o) const override;

  const EmbeddingScorer& scorer() const { return scorer_; }

 private:
  EmbeddingScorer scorer_;
};

// Checkpoint: little-endian binary
//   char[4] "SQES" | u32 version=1 | u32 num_entities | u32 num_relations |
//   u32 dim | f64 entity[num_entities][dim] | f64 relation[num_relations][dim]
// plus `<path>.json` holding `sidecar`.
void save_scorer(const EmbeddingScorer& scorer, const std::filesystem::path& path,
                 const nlohmann::json& sidecar);
EmbeddingScorer load_scorer(const std::filesystem::path& path);

namespace detail {
void write_u32(std::ostream& out, std::uint32_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
double read_f64(std::istream& in);
void write_sidecar(const std::filesystem::path& path, const nlohmann::json& sidecar);
}  // namespace detail

}  // namespace softq
