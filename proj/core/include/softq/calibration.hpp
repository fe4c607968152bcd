#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "softq/confidence.hpp"
#include "softq/embedding.hpp"
#include "softq/query.hpp"

namespace softq {

struct DebiasConfig {
  double delta_alpha = 0.0;
};

// Every atom's alpha becomes max(alpha - delta_alpha, 0).
SoftQuery debias_query(const SoftQuery& query, DebiasConfig cfg);

enum class Role : int { kHead = 0, kRelation = 1, kTail = 2 };

// [rho, lambda] = sum over (head, relation, tail) of W_role * e_j + b_role,
// W_role in R^{2 x d}, b_role in R^2. Zero-initialized.
class AffineCalibration {
 public:
  AffineCalibration() = default;
  explicit AffineCalibration(std::size_t dim);

  std::size_t dim() const { return dim_; }

  // Row i of W is weights(role)[i*dim .. (i+1)*dim).
  std::span<double> weights(Role role);
  std::span<const double> weights(Role role) const;
  std::span<double> bias(Role role);
  std::span<const double> bias(Role role) const;

  // Flattened layout: for role in head, relation, tail: W (row-major), b.
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  static std::size_t block_size(std::size_t dim) { return 2 * dim + 2; }

  // (rho, lambda) for one triple, embeddings taken from `features`.
  std::pair<double, double> affine(const EmbeddingScorer& features, EntityId s, RelationId r,
                                   EntityId o) const;

  friend bool operator==(const AffineCalibration&, const AffineCalibration&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> params_;
};

// clamp(base * (1 + rho) + lambda) to [0,1].
double calibrated_confidence(double base, double rho, double lambda);
double calibrated_confidence(const EmbeddingScorer& base, const AffineCalibration& cal,
                             EntityId s, RelationId r, EntityId o);

// Calibrated view of `base`, with embeddings for (rho, lambda) from `features`.
class CalibratedBackend final : public ConfidenceBackend {
 public:
  CalibratedBackend(const ConfidenceBackend& base, const EmbeddingScorer& features,
                    AffineCalibration cal);

  std::size_t num_entities() const override { return base_->num_entities(); }
  std::size_t num_relations() const override { return base_->num_relations(); }
  double confidence(EntityId s, RelationId r, EntityId o) const override;

 private:
  const ConfidenceBackend* base_;
  const EmbeddingScorer* features_;
  AffineCalibration cal_;
};

struct CalibrationExample {
  SoftQuery query;
  // Ground-truth utilities, only entities with u(s) > 0.
  std::vector<std::pair<EntityId, double>> truth;
};

struct CalibrationHyper {
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::uint64_t budget = 1'000'000;  // assignments per query
};

void to_json(nlohmann::json& j, const CalibrationHyper& h);
void from_json(const nlohmann::json& j, CalibrationHyper& h);

struct LossAndGradient {
  double loss = 0.0;             // sum of squared utility errors
  std::vector<double> gradient;  // same layout as AffineCalibration::parameters()
  std::size_t terms = 0;
};

// L = sum over examples and truth entries of (U(q(s), P_c) - u)^2, with P_c the
// calibrated `base`. Gradients flow through max along the argmax assignment
// (first disjunct, then lowest assignment in lexicographic order, wins ties).
// Requires every atom to have alpha = 0.
LossAndGradient calibration_loss(const AffineCalibration& cal, const ConfidenceBackend& base,
                                 const EmbeddingScorer& features,
                                 std::span<const CalibrationExample> examples,
                                 std::uint64_t budget = 1'000'000);

// Adam on the mean loss over mini-batches. Deterministic given hyper.seed.
// loss_history receives the summed training loss before training and after
// each epoch.
AffineCalibration train_calibration(const ConfidenceBackend& base,
                                    const EmbeddingScorer& features,
                                    std::span<const CalibrationExample> examples,
                                    const CalibrationHyper& hyper,
                                    std::vector<double>* loss_history = nullptr);

// Checkpoint: little-endian binary
//   char[4] "SQAC" | u32 version=1 | u32 dim |
//   for role in head, relation, tail: f64 W[2][dim], f64 b[2]
// plus `<path>.json` holding `sidecar`.
void save_calibration(const AffineCalibration& cal, const std::filesystem::path& path,
                      const nlohmann::json& sidecar);
AffineCalibration load_calibration(const std::filesystem::path& path);

}  // namespace softq
