#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace softq::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,         // internal error or failed check
  kUsage = 2,           // bad flags or conflicting configuration
  kFileNotFound = 3,
  kBudgetExceeded = 4,
  kInvalidInput = 5,    // malformed or invalid input data
};

class ConfigConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Entry point used by main and by the integration tests.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CommonOptions {
  std::string config;  // consumed by expand_config before parsing
  std::string kg_dir;
  std::string out;
  std::uint64_t seed = 0;
  std::uint64_t budget = 1'000'000;
};

struct AnswerOptions {
  CommonOptions common;
  std::string backend = "exact:train";
  std::string queries;
  std::string query;
  std::optional<double> delta1;
  std::optional<double> delta2;
  double debias = 0.0;
  std::string calibration;
  bool emit_trace = false;
  bool dense = false;
};

struct DatasetOptions {
  CommonOptions common;
  std::vector<std::string> train_types{"1P", "2P", "2I", "2IN", "2IL"};
  std::vector<std::string> eval_types{"1P", "2P", "2I", "2IN", "2IL", "2M",
                                      "2U", "3IN", "IP", "INP", "IM", "UP"};
  std::size_t train_count = 0;
  std::size_t valid_count = 0;
  std::size_t test_count = 0;
  std::string alpha_mode = "zero";
  std::string beta_mode = "equal";
  bool hybrid_per_query = false;
  std::size_t max_answers = 100;
  std::size_t attempts = 200;
  bool exact = false;
};

struct ScorerOptions {
  CommonOptions common;
  std::string split = "train";
  std::size_t dim = 16;
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  std::size_t negatives = 2;
};

struct CalibrateOptions {
  CommonOptions common;
  std::string backend;
  std::string queries;
  std::string target = "train";
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
};

struct EvaluateOptions {
  CommonOptions common;
  std::string records;
  std::string predictions;
  std::optional<std::size_t> ndcg_k;
};

struct OracleCheckOptions {
  CommonOptions common;
  std::size_t n = 1000;
  std::size_t entities = 12;
  std::size_t relations = 3;
  double cyclic_fraction = 0.1;
};

int cmd_answer(const AnswerOptions& o, std::ostream& out, std::ostream& err);
int cmd_build_dataset(const DatasetOptions& o, std::ostream& out, std::ostream& err);
int cmd_train_scorer(const ScorerOptions& o, std::ostream& out, std::ostream& err);
int cmd_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err);
int cmd_oracle_check(const OracleCheckOptions& o, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Writes <out>/run.json: command, resolved config, seed, input digests.
void write_run_json(const std::filesystem::path& out_dir, const std::string& command,
                    const nlohmann::json& config, std::uint64_t seed,
                    const std::vector<std::filesystem::path>& inputs);

}  // namespace softq::cli
