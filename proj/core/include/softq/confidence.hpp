#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <unordered_map>

#include "softq/kg.hpp"
#include "softq/sparse_matrix.hpp"

namespace softq {

// A total confidence function (s, r, o) -> [0,1]. Implementations are
// immutable once constructed and safe for concurrent reads.
class ConfidenceBackend {
 public:
  virtual ~ConfidenceBackend() = default;

  virtual std::size_t num_entities() const = 0;
  virtual std::size_t num_relations() const = 0;

  // Always in [0,1].
  virtual double confidence(EntityId s, RelationId r, EntityId o) const = 0;

  // Confidence matrix of relation r. Cells whose confidence is <= delta1 are
  // read as 0; nullopt keeps every value. The default value is the
  // confidence of every unstored cell (0 for sparse backends).
  //
  // The base implementation evaluates all |E|^2 pairs.
  virtual DefaultSparseMatrix relation_matrix(RelationId r, std::optional<double> delta1) const;
};

// Closed-world lookup over one split view of an uncertain KG.
class ClosedWorldBackend final : public ConfidenceBackend {
 public:
  ClosedWorldBackend(const UncertainKG& kg, Split view);

  std::size_t num_entities() const override { return kg_->num_entities(); }
  std::size_t num_relations() const override { return kg_->num_relations(); }
  double confidence(EntityId s, RelationId r, EntityId o) const override;
  DefaultSparseMatrix relation_matrix(RelationId r, std::optional<double> delta1) const override;

  Split view() const { return view_; }

 private:
  const UncertainKG* kg_;
  Split view_;
  std::vector<std::vector<MatrixCell>> by_relation_;
};

ClosedWorldBackend lookup_backend(const UncertainKG& kg, Split view);

// Externally predicted scores, `head\trelation\ttail\tscore` per line;
// unlisted triples score 0.
class TabularBackend final : public ConfidenceBackend {
 public:
  TabularBackend(const std::filesystem::path& scores, const UncertainKG& kg);

  std::size_t num_entities() const override { return num_entities_; }
  std::size_t num_relations() const override { return num_relations_; }
  double confidence(EntityId s, RelationId r, EntityId o) const override;
  DefaultSparseMatrix relation_matrix(RelationId r, std::optional<double> delta1) const override;

 private:
  std::size_t num_entities_;
  std::size_t num_relations_;
  std::unordered_map<Triple, double, TripleHash> scores_;
  std::vector<std::vector<MatrixCell>> by_relation_;
};

// Pointwise transform f(P(s,r,o)) of another backend, clamped to [0,1].
// f must be deterministic; it is applied to the default and stored cells of
// the base matrices as well.
class TransformedBackend final : public ConfidenceBackend {
 public:
  TransformedBackend(const ConfidenceBackend& base, std::function<double(double)> f);

  std::size_t num_entities() const override { return base_->num_entities(); }
  std::size_t num_relations() const override { return base_->num_relations(); }
  double confidence(EntityId s, RelationId r, EntityId o) const override;
  DefaultSparseMatrix relation_matrix(RelationId r, std::optional<double> delta1) const override;

 private:
  const ConfidenceBackend* base_;
  std::function<double(double)> f_;
};

// Clamps to [0,1]; NaN maps to 0.
double clamp_confidence(double p);

}  // namespace softq
