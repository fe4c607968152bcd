#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace softq {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Nested views: every train fact is visible in valid, every valid fact in test.
enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// Ordered name <-> dense index mapping; indices follow first insertion.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  // Throws ValidationError for unknown names.
  std::uint32_t at(std::string_view name) const;
  const std::string& name(std::uint32_t id) const;
  std::size_t size() const { return names_.size(); }
  std::span<const std::string> names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept;
};

struct Fact {
  EntityId head;
  RelationId relation;
  EntityId tail;
  double confidence;
  Split split;  // the file the fact was read from
};

// Confidences observed for one relation in the train view, ascending.
struct RelationStats {
  RelationId relation = 0;
  std::vector<double> sorted;
  std::size_t count() const { return sorted.size(); }
};

// Nearest-rank percentile: the ceil(q/100 * n)-th smallest element (rank
// clamped to >= 1). Throws ValidationError on empty stats or q outside [0,100].
double relation_percentile(const RelationStats& stats, double q);

// Immutable after construction; safe for concurrent reads.
class UncertainKG {
 public:
  class Builder {
   public:
    // Duplicate (h, r, t) within one split is an error; a fact repeated in a
    // later split overrides the value for that split's view (with a warning).
    Builder& add(std::string_view head, std::string_view relation,
                 std::string_view tail, double confidence, Split split = Split::kTrain,
                 std::size_t line = 0);
    // Reserve vocabulary entries that may not appear in any fact.
    Builder& add_entity(std::string_view name);
    Builder& add_relation(std::string_view name);
    UncertainKG build() &&;

   private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Fact> facts_;
    std::unordered_map<Triple, std::size_t, TripleHash> seen_[3];
    std::vector<std::string> warnings_;
  };

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }

  // Facts in file order, each tagged with the split file it came from.
  std::span<const Fact> facts() const { return facts_; }

  // All facts visible in `view` with the view's confidence, in file order.
  std::vector<Fact> facts_in(Split view) const;

  // Closed-world confidence: stored value if visible in `view`, else 0.
  double confidence(Split view, EntityId s, RelationId r, EntityId o) const;
  bool contains(Split view, EntityId s, RelationId r, EntityId o) const;

  const RelationStats& relation_stats(RelationId r) const;

  std::span<const std::string> warnings() const { return warnings_; }

 private:
  void check_indices(EntityId s, RelationId r, EntityId o) const;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Fact> facts_;
  std::unordered_map<Triple, double, TripleHash> views_[3];
  std::vector<RelationStats> stats_;
  std::vector<std::string> warnings_;
};

// Reads one `head\trelation\ttail\tconfidence` file; every fact lands in `split`.
UncertainKG load_kg(const std::filesystem::path& path, Split split = Split::kTrain);

// Reads train.tsv, valid.tsv and test.tsv from `dir`. The valid and test files
// list only their incremental facts; nesting is reconstructed here.
UncertainKG load_kg_dir(const std::filesystem::path& dir);

}  // namespace softq
