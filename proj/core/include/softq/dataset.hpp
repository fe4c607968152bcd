#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "softq/confidence.hpp"
#include "softq/kg.hpp"
#include "softq/query.hpp"
#include "softq/semiring.hpp"

namespace softq {

// Finite, strictly positive utilities keyed by entity.
using AnswerMap = std::map<EntityId, double>;

AnswerMap to_answer_map(const UtilityVector& u);

enum class QueryType { k1P, k2P, k2I, k2IN, k2IL, k2M, k2U, k3IN, kIP, kINP, kIM, kUP };

std::string_view to_string(QueryType type);
QueryType parse_query_type(std::string_view name);  // throws ValidationError
std::span<const QueryType> all_query_types();
bool is_training_type(QueryType type);  // 1P, 2P, 2I, 2IN, 2IL

// Shape of every template, kept in dataset metadata.
inline constexpr int kTemplateVersion = 1;
nlohmann::json template_catalog();

// Grounds a template by walking train facts backward from a sampled answer,
// so the answer has a finite utility under the train view when alpha = 0.
// alpha = 0 and beta = 1 on every atom. Throws Error after `retries` failed
// attempts.
SoftQuery sample_query_skeleton(const UncertainKG& kg, QueryType type, std::uint64_t seed,
                                std::size_t retries = 100);

enum class AlphaMode { kZero, kLow, kNormal, kHigh, kHybrid };
enum class BetaMode { kEqual, kRandom };

std::string_view to_string(AlphaMode mode);
std::string_view to_string(BetaMode mode);
AlphaMode parse_alpha_mode(std::string_view name);
BetaMode parse_beta_mode(std::string_view name);

struct RequirementStrategy {
  AlphaMode alpha_mode = AlphaMode::kZero;
  BetaMode beta_mode = BetaMode::kEqual;
  bool hybrid_per_query = false;  // one drawn mode for all atoms instead of one per atom
};

// alpha from the relation's train percentile (25/50/75 for low/normal/high),
// beta = 1 or uniform in (0,1]. Throws ValidationError when a used relation
// has no train facts and a percentile is needed.
SoftQuery assign_requirements(const SoftQuery& query, const RequirementStrategy& strategy,
                              const UncertainKG& kg, std::uint64_t seed);

// Utility maps under the two backends: the oracle when `exact`, else the
// inference module.
std::pair<AnswerMap, AnswerMap> compute_answers(const SoftQuery& query,
                                                const ConfidenceBackend& base_view,
                                                const ConfidenceBackend& target_view,
                                                bool exact,
                                                std::uint64_t budget = 1'000'000);

inline constexpr double kUtilityTolerance = 1e-12;
inline constexpr std::size_t kDefaultMaxAnswers = 100;

struct DatasetRecord {
  std::string id;
  QueryType type = QueryType::k1P;
  SoftQuery query;
  AnswerMap train_answers;  // base view
  AnswerMap test_answers;   // target view
  std::uint64_t seed = 0;
};

// Maps differ (support, or a value by more than the tolerance) and the
// target view has between 1 and max_answers answers.
bool filter_useful(const DatasetRecord& record, std::size_t max_answers = kDefaultMaxAnswers);

nlohmann::json record_to_json(const DatasetRecord& record, const UncertainKG& kg);
DatasetRecord record_from_json(const nlohmann::json& json, const UncertainKG& kg);

// One JSON object per line.
void save_records(const std::filesystem::path& path, std::span<const DatasetRecord> records,
                  const UncertainKG& kg);
// Accepts a JSONL file or a directory of them (sorted by name). Every record
// must pass filter_useful, else FormatError.
std::vector<DatasetRecord> load_records(const std::filesystem::path& path, const UncertainKG& kg,
                                        std::size_t max_answers = kDefaultMaxAnswers);

struct DatasetConfig {
  std::uint64_t seed = 0;
  std::size_t max_answers = kDefaultMaxAnswers;
  std::size_t attempts_per_record = 200;
  std::size_t skeleton_retries = 100;
  bool exact = false;
  std::uint64_t budget = 1'000'000;
  RequirementStrategy strategy;
  // Requested record counts per split and type.
  std::map<Split, std::vector<std::pair<QueryType, std::size_t>>> counts;
};

void to_json(nlohmann::json& j, const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct DatasetReport {
  struct Entry {
    Split split;
    QueryType type;
    std::size_t requested = 0;
    std::size_t emitted = 0;
    std::size_t attempts = 0;
  };
  std::vector<Entry> entries;
  bool shortfall() const;
  nlohmann::json to_json() const;
};

// Records of a split are compared against the train view (base) and the
// split's own view (target; train records use the valid view). Writes
// <out>/<split>/<type>.jsonl, <out>/stats.json and <out>/metadata.json.
// Eval-only types requested for the train split are rejected.
DatasetReport build_dataset(const UncertainKG& kg, const DatasetConfig& config,
                            const std::filesystem::path& out_dir);

// In-memory variant of build_dataset for one split and type.
std::vector<DatasetRecord> generate_records(const UncertainKG& kg, const DatasetConfig& config,
                                            Split split, QueryType type, std::size_t count,
                                            DatasetReport::Entry* entry = nullptr);

// Target view of a split's records.
Split target_view(Split split);

}  // namespace softq
