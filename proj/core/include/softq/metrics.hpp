#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softq/confidence.hpp"
#include "softq/dataset.hpp"
#include "softq/query.hpp"

namespace softq {

// Ground truth A (keys of `truth`) against a predicted utility map.
struct EvalPair {
  AnswerMap truth;
  AnswerMap predicted;
  std::string type;
};

// Predicted support ordered by utility descending (entity index ascending on
// ties), then the members of A that were not predicted, ascending.
std::vector<EntityId> full_ranking(const EvalPair& pair);

// |{a in A : rank(a) <= k}| / k. Throws ValidationError when A is empty or k = 0.
double precision_at_k(const EvalPair& pair, std::size_t k);
// Sum over every ranking position k of P@k * [entity at k in A], over |A|.
double average_precision(const EvalPair& pair);
double mean_average_precision(std::span<const EvalPair> pairs);
// Gains 1 / predicted rank over A sorted by true utility, discount
// 1 / log2(i + 1), normalised by the ideal ranks 1..k. k defaults to |A|.
double ndcg(const EvalPair& pair, std::optional<std::size_t> k = std::nullopt);

// Over A only: true utilities against predicted ones (unpredicted = -inf).
// Tau-b and Spearman with average ranks; 0 when either side is constant.
// Throw ValidationError when |A| < 2.
double kendall_tau(const EvalPair& pair);
double spearman_rho(const EvalPair& pair);

// Rank correlations on raw value vectors, used by the above.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

struct MetricRow {
  std::string type;
  std::size_t queries = 0;
  std::size_t correlation_queries = 0;  // queries with |A| >= 2
  std::size_t skipped = 0;              // queries with |A| < 2
  double map = 0.0;
  double ndcg = 0.0;
  double tau = 0.0;
  double rho = 0.0;
};

struct EvalReport {
  std::vector<MetricRow> per_type;  // sorted by type name
  MetricRow average;                // unweighted mean over types
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Predictions keyed by query id. Ids unknown to `records` are an error; a
// record with no prediction counts as an empty prediction.
EvalReport evaluate_run(std::span<const DatasetRecord> records,
                        const std::map<std::string, AnswerMap>& predictions,
                        std::optional<std::size_t> ndcg_k = std::nullopt);

// `query_id\tentity\tutility` per line. An empty file is a FormatError.
std::map<std::string, AnswerMap> read_predictions(const std::filesystem::path& path,
                                                  const UncertainKG& kg);

// P(s,r,o) plus bounded per-triple noise in [-amplitude, amplitude], clamped
// to [0,1]. Noise values are multiples of 2^-10 and depend only on
// (seed, s, r, o).
class PerturbedBackend final : public ConfidenceBackend {
 public:
  PerturbedBackend(const ConfidenceBackend& base, double amplitude, std::uint64_t seed);

  std::size_t num_entities() const override { return base_->num_entities(); }
  std::size_t num_relations() const override { return base_->num_relations(); }
  double confidence(EntityId s, RelationId r, EntityId o) const override;

 private:
  const ConfidenceBackend* base_;
  double amplitude_;
  std::uint64_t seed_;
};

// |a - b| in the extended reals: 0 when both are -inf, +inf when exactly one is.
double utility_distance(double a, double b);

struct ProbeTrial {
  double observed = 0.0;  // max over entities of |U(P_hat) - U(P)|
  double bound = 0.0;     // sum of per-atom errors
  std::vector<double> epsilons;
  bool violated = false;
};

struct ProbeResult {
  std::vector<ProbeTrial> trials;
  double max_observed = 0.0;
  double min_slack = 0.0;  // min over trials of bound - observed
  bool violated = false;
};

// Per trial: perturb the backend, take eps_i as the largest atom-value error
// of atom i over every entity pair it can touch, and compare the observed
// utility error (oracle on both backends) with sum eps_i.
ProbeResult error_accumulation_probe(const SoftQuery& query, const ConfidenceBackend& truth,
                                     double amplitude, std::size_t trials, std::uint64_t seed,
                                     std::uint64_t budget = 1'000'000);

}  // namespace softq
